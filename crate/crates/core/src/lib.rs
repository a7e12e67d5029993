//! Numerical bifurcation toolkit for the positive steady states of a
//! logistic interior reaction coupled to sublinear boundary absorption.
//!
//! The crate provides meshes and assembled forms ([`domain`], [`assembly`]),
//! pencil eigensolvers ([`spectra`]), fibering/Nehari analysis
//! ([`variational`]), nonlinear solvers ([`solvers`]), pseudo-arclength
//! continuation with fold detection and chart switching ([`continuation`]),
//! and an independent 1D shooting oracle ([`oracle1d`]).

pub mod assembly;
pub mod continuation;
pub mod domain;
pub mod error;
pub mod linalg;
pub mod oracle1d;
pub mod solvers;
pub mod spectra;
pub mod variational;

pub use assembly::{assemble, AssembledForms, Field, ProblemParams, DELTA_J};
pub use domain::{build_mesh, measures, DomainSpec, Mesh};
pub use error::{Error, Result};
