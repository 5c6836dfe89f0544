//! Spin dynamics toolkit for anisotropic effective-spin-1/2 ions in crystals.
//!
//! The crate is organised by concern:
//!
//! * [`spin`] builds and diagonalises the electron–nuclear spin Hamiltonian and
//!   synthesises field-swept (EDFS) and ENDOR spectra.
//! * [`relaxation`] evaluates and fits spin-lattice relaxation rates (direct
//!   one-phonon plus a generalised two-phonon integral).
//! * [`coherence`] holds closed-form decoherence models: stretched
//!   exponentials, Lorentzian spectral diffusion, instantaneous diffusion and
//!   the stimulated-echo decay.
//! * [`bath`] is an event-driven Monte Carlo of a dipolar telegraph bath used as
//!   a stochastic oracle for the closed forms.
//! * [`fitkit`] is the least-squares engine and the registered fit models.
//! * [`io`] covers the config schema, CSV ingestion/emission, run manifests and
//!   the minimal SVG plotter used by the command-line front end.

pub mod bath;
pub mod coherence;
pub mod constants;
pub mod curve;
pub mod error;
pub mod fitkit;
pub mod io;
pub mod numerics;
pub mod relaxation;
pub mod spin;

pub use error::{Error, Result};
/// Re-exported so downstream crates share the vector and matrix types.
pub use nalgebra;

pub use bath::{BathConfig, BathSpecies, SequenceKind, SequenceWindow};
pub use coherence::{IdParams, SdParams, StimEchoParams, StretchedExp};
pub use curve::DecayCurve;
pub use fitkit::{FitProblem, FitResult};
pub use relaxation::{RelaxModel, T1Series};
pub use spin::{
    EnergyLevels, FieldConfig, Site, Spectrum, SpinSystemSpec, Transition, TransitionKind,
};
