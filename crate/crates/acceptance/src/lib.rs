//! Host package for the `acceptance` test target, which lives next to the
//! other integration tests in `crates/core/tests/`. Keeping it in its own
//! package makes it run after every other suite in `cargo test --workspace`.
