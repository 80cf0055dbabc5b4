//! Subjective-logic label encodings.
//!
//! Crowd annotations carrying confidence and reliability metadata are
//! encoded as subjective opinions, discounted by annotator trust and fused
//! into per-item Dirichlet targets. The crate also provides the baseline
//! aggregators and metrics used to compare encodings, a synthetic
//! annotation generator, a small Dirichlet-output classifier trained by
//! distribution matching, and the experiment harness behind the `sle` CLI.

pub mod aggregate;
pub mod dirichlet;
pub mod encoding;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod opinion;
pub mod seed;
pub mod special;
pub mod synth;

pub use dirichlet::{dirichlet_kl, DirichletParams};
pub use encoding::{build_sle, encode_annotation, AnnotationRecord, EncodedTarget, Label};
pub use error::{ErrorKind, Result, SleError};
pub use opinion::{fuse_many, Opinion, ReliabilityScore};
