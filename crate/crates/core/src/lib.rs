//! Time-discrete finite-element simulation of nonlinear Kelvin-Voigt
//! viscoelasticity with an implicit power-law constitutive relation on a
//! domain with a prescribed, time-growing crack, together with an
//! energy-dissipation ledger.

pub mod cli;
pub mod constitutive;
pub mod domain;
pub mod energy;
pub mod error;
pub mod loads;
pub mod scenario;
pub mod stepper;
pub mod tensor;

pub use constitutive::PowerLaw;
pub use error::{Error, Result};
pub use tensor::SymTensor2;
