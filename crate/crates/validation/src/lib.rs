//! Holds the `acceptance` test target. Run it with
//! `cargo test -p tablesp-validation --test acceptance`; extra arguments
//! select criteria by substring.
