//! Holds the `acceptance` test target. Run it with
//! `cargo test -p formation-validation --test acceptance`.
