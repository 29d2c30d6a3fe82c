//! Holds the `acceptance` test target; run it with
//! `cargo test -p ccspectra-validation --test acceptance`.
