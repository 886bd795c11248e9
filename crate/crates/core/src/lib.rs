//! Learned proxies for DC optimal power flow.
//!
//! The crate builds labeled datasets `(l, δ(l), C*(l))` by sampling load
//! vectors uniformly from a box around the nominal demand with Hit&Run and
//! labeling each one with an exact interior-point DC-OPF solve, then trains
//! and benchmarks classifiers for feasibility `δ` and regressors for the
//! optimal cost `C*`.
//!
//! ```
//! use opfproxy::{bundled, netcase, opf};
//!
//! let case = netcase::parse_case(bundled::CASE2).unwrap();
//! let model = netcase::build_dc_model(&case).unwrap();
//! let outcome = opf::solve_opf(&model, &[0.0, 1.0]).unwrap();
//! assert!(outcome.feasible);
//! assert!((outcome.cost.unwrap() - 11.0).abs() < 1e-6);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod hyper;
pub mod kmeans;
pub mod linalg;
pub mod mlp;
pub mod model;
pub mod netcase;
pub mod opf;
pub mod regress;
pub mod rng;
pub mod sampler;
pub mod standardize;
pub mod tree;

pub use error::{Error, Result};

/// Guide chapters, compiled so their snippets stay runnable.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/opf.md")]
    mod opf {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/classifiers.md")]
    mod classifiers {}
    #[doc = include_str!("../../../book/src/regressors.md")]
    mod regressors {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}

/// Test networks and data shipped with the crate.
pub mod bundled {
    /// Two buses, one generator, one line.
    pub const CASE2: &str = include_str!("../data/case2.net");
    /// Three-bus ring with two generators.
    pub const CASE3: &str = include_str!("../data/case3.net");
    /// Five-bus system with loads on three buses.
    pub const CASE5: &str = include_str!("../data/case5.net");
    /// Peak-normalized 24-hour load profile, `hour,multiplier`.
    pub const DAILY_PROFILE: &str = include_str!("../data/daily_profile.csv");

    /// Look up a bundled case by name (`case2`, `case3`, `case5`).
    pub fn case(name: &str) -> Option<&'static str> {
        match name {
            "case2" => Some(CASE2),
            "case3" => Some(CASE3),
            "case5" => Some(CASE5),
            _ => None,
        }
    }
}
