//! Local discontinuous Galerkin solver for two-dimensional space-fractional
//! diffusion on unstructured triangle meshes.

pub mod error;
pub mod fractional;
pub mod harness;
pub mod ldg;
pub mod mesh;
pub mod quadrature;
pub mod reference;
pub mod stiffness;
pub mod time;

pub use error::{Error, Result};
pub use harness::{CaseConfig, Example, RunResult};
pub use ldg::{local_operators, Coefficients, FieldVector, LdgContext, LocalOperators};
pub use mesh::{Axis, Mesh, Side};
pub use reference::ReferenceElement;
pub use stiffness::{BlockCsr, FracStiffness};
pub use time::{StepSize, TimeSpec};
