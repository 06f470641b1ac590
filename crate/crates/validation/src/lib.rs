//! Acceptance checks live in `tests/acceptance.rs`. Run them with
//! `cargo test -p tipping-validation --test acceptance`.
