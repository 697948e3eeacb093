//! Holds the acceptance run in `tests/acceptance.rs`. It is a separate
//! package so that `cargo test --workspace` runs it after every other test.
