//! Waveguide-QED toolkit for giant artificial atoms.
//!
//! A "giant atom" couples to a 1D waveguide at several discrete points whose
//! separation is comparable to the mode wavelength. Interference between the
//! coupling points makes the atom-waveguide decay rate, the waveguide-mediated
//! exchange coupling, and the collective decay all frequency dependent, so the
//! coupling spectrum can be engineered through device geometry.
//!
//! The crate is organized around that pipeline:
//!
//! * [`device`] — geometric layouts (coupling points, strengths, delays),
//! * [`spectra`] — decay/exchange/collective spectra and decoherence-free
//!   frequency search,
//! * [`dynamics`] — the Lindblad master equation and matrix-exponential
//!   propagation,
//! * [`sequences`] — pulse schedules, the entangling protocol, two-qubit state
//!   tomography and fidelity,
//! * [`calibration`] — transmon flux curves and flux-line crosstalk,
//! * [`estimation`] — least-squares fitting of spectrum models to data.
//!
//! All internal frequencies and rates are angular (rad/s); external I/O (JSON,
//! CSV) uses cyclic units (Hz), i.e. `omega / 2 pi`.

pub mod calibration;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod optim;
pub mod sequences;
pub mod spectra;

pub use error::{Error, Result};

use std::iter::Sum;

use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the core math is generic over (`f32`, `f64`).
pub trait Scalar:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Sum + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Sum + Send + Sync + 'static
{
}

/// Shorthand for converting an `f64` constant into the working scalar type.
#[inline]
pub(crate) fn r<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

#[inline]
pub(crate) fn tmin<T: Scalar>(a: T, b: T) -> T {
    if a < b {
        a
    } else {
        b
    }
}

#[inline]
pub(crate) fn tmax<T: Scalar>(a: T, b: T) -> T {
    if a > b {
        a
    } else {
        b
    }
}

/// Complex number over the working scalar type.
pub type C<T> = nalgebra::Complex<T>;

pub type DeviceLayout64 = device::DeviceLayout<f64>;
pub type DeviceLayout32 = device::DeviceLayout<f32>;
pub type SpectrumSample64 = spectra::SpectrumSample<f64>;
pub type DensityMatrix64 = dynamics::DensityMatrix<f64>;
pub type Liouvillian64 = dynamics::Liouvillian<f64>;
pub type PulseSchedule64 = sequences::PulseSchedule<f64>;
pub type FitResult64 = estimation::FitResult<f64>;
