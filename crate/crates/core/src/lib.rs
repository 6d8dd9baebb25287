//! Provable secret-key rates for BB84 with weak coherent-state signals.
//!
//! The crate covers three source families: an unmodulated reference pulse whose
//! phase the eavesdropper may know, phase-randomized signals, and a bright
//! reference pulse read out with a double Mach-Zehnder interferometer. It also
//! contains the unambiguous-key-discrimination attack against a source that
//! modulates the reference phase, a Monte Carlo protocol simulator used to
//! cross-check the analytics, and GF(2) privacy-amplification matrices.
//!
//! Module map:
//!
//! * [`qmath`]: small complex matrices, coherent-state overlaps, fidelity,
//!   trace distance, binary entropy.
//! * [`source`]: signal sets and the quantum-coin imbalance.
//! * [`detection`]: threshold detectors, channel loss, detection probability
//!   and intrinsic error rate.
//! * [`rates`]: phase-error bound, key rates, μ optimisation, distance sweeps.
//! * [`attack`]: unambiguous key discrimination on the qutrit signal space.
//! * [`protosim`]: seeded Monte Carlo of protocol rounds.
//! * [`postproc`]: privacy-amplification matrices over GF(2).
//! * [`params`]: the flat `key=value` parameter file shared by all front ends.

// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod detection;
mod error;
pub mod params;
pub mod postproc;
pub mod protosim;
pub mod qmath;
pub mod rates;
pub mod source;
pub mod tolerances;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use detection::{BrightReference, ChannelParams, DetectorParams, DoubleClickPolicy};
pub use params::SystemParams;
pub use postproc::{BitVector, Gf2Matrix};
pub use protosim::{EveStrategy, RoundTally};
pub use qmath::{ComplexAmplitude, SmallMatrix};
pub use rates::{RateInputs, RatePoint, SourceKind};
pub use source::{SignalSet, SourceVariant, VariantKind};
