//! Pedagogical rule-list induction for black-box classifiers.
//!
//! The crate estimates the joint distribution of a tabular training set,
//! samples synthetic instances from it, labels them with the model being
//! explained, and fits an ordered list of IF-THEN rules (a Bayesian rule list
//! searched by MCMC) that mimics the model. It also computes everything an
//! inspection interface needs per rule: support, confidence, fidelity,
//! evidence and data flow.
//!
//! Everything here is pure computation over in-memory tables and builds with
//! `#![no_std]` + `alloc`. File formats, subprocess oracles and the HTTP
//! service live in the `rulematrix` crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![deny(rust_2018_idioms, unused_must_use)]

extern crate alloc;

pub mod dataset;
pub mod density;
pub mod discretize;
pub mod error;
pub mod fpgrowth;
pub mod induce;
pub mod knn;
pub mod matrix;
pub mod math;
pub mod metrics;
pub mod mlp;
pub mod oracle;
pub mod rulelist;
pub mod sbrl;

mod bitset;

pub use dataset::{DataTable, DatasetSchema, FeatureKind, FeatureSpec, Instances};
pub use error::{Error, Result};
pub use oracle::Oracle;
pub use rulelist::{Clause, ClauseTest, Rule, RuleList};

/// Version tag carried by every serialized payload.
pub const PAYLOAD_VERSION: u32 = 1;
