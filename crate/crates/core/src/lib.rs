//! Entanglement transfer from two-mode continuous-variable resources to a
//! pair of qubits, computed from the resource covariance matrix.
//!
//! The pipeline is: build or reduce a covariance matrix to standard form
//! ([`gaussian`]), expand the state in the Fock basis ([`gamma`]), couple each
//! mode to a qubit through a resonant Jaynes–Cummings interaction and read
//! off the qubit negativity ([`transfer`]). Photon-subtracted resources live
//! in [`nongaussian`]; [`fock`] is an independent brute-force check of all of
//! the above.

pub mod error;
pub mod experiment;
pub mod fock;
pub mod gamma;
pub mod gaussian;
pub mod nongaussian;
pub mod quadrature;
pub mod special;
pub mod svg;
pub mod transfer;

pub use error::{Error, Result};
pub use gamma::{build_table, CoherenceMethod, Cutoffs, GammaTable};
pub use gaussian::{
    make_squeezed_thermal_bs, make_tmsv, nu_minus, to_standard_form, CovarianceMatrix, ResourceParams, StandardForm,
    SymplecticOp,
};
pub use transfer::{negativity, transfer_curve, AmplitudeMode, QubitXState, TransferCurve};
