//! Acceptance suite for the workspace.
//!
//! The crate has no library code. `tests/acceptance.rs` runs every
//! acceptance criterion end to end and prints one PASS/FAIL line per
//! criterion:
//!
//! ```text
//! cargo test -p opo-validation --test acceptance
//! ```
