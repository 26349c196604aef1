//! Allocation-only core of testforge: the domain model for generated behavioral
//! test suites and every algorithm that turns templates into verified,
//! capability-expanded suites.
//!
//! Nothing in this crate touches the filesystem, the network or a clock.
//! Remote models are reached through the traits in [`model`]; the `testforge`
//! crate supplies HTTP and in-process mock implementations.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attack;
pub mod error;
pub mod eval;
pub mod expand;
pub mod fraction;
pub mod hashing;
pub mod instantiate;
pub mod lexicon;
pub mod llmgen;
pub mod model;
pub mod pos;
pub mod suite;
pub mod text;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use fraction::Fraction;
pub use types::{
    CapabilityTag, CaseStatus, Label, LabelId, ProvenanceEntry, SlotTemplate, Stage, TaskKind,
    TaskSpec, TestCase, TestSuite, VerificationRecord,
};
