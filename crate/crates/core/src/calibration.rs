//! Transmon frequency-vs-flux model and flux-line crosstalk compensation.
//!
//! Unlike the rest of the crate this module works directly in cyclic units
//! (Hz) and flux quanta, matching how calibration data is tabulated.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{r, Error, Result, Scalar};

/// Flux dispersion of one tunable transmon:
/// `f(flux) = f_max (d^2 + (1 - d^2) cos^2(pi flux - phi0))^{1/4}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmonFluxModel<T> {
    /// Maximum (sweet-spot) frequency, Hz.
    pub f_max: T,
    /// Junction asymmetry, in (0, 1]. The minimum frequency is `f_max sqrt(d)`.
    pub d: T,
    /// Offset of the sweet spot from zero flux, radians.
    pub phi0_offset: T,
    /// Own-line period: volts per flux quantum.
    pub v0: T,
}

impl<T: Scalar> TransmonFluxModel<T> {
    pub fn new(f_max: T, d: T, phi0_offset: T, v0: T) -> Result<Self> {
        if !(f_max > T::zero()) {
            return Err(Error::validation("f_max must be > 0"));
        }
        if !(d > T::zero()) || d > T::one() {
            return Err(Error::validation("asymmetry d must be in (0, 1]"));
        }
        if v0 == T::zero() {
            return Err(Error::validation("V0 must be non-zero"));
        }
        Ok(TransmonFluxModel {
            f_max,
            d,
            phi0_offset,
            v0,
        })
    }
}

/// Transmon frequency at a given flux (in flux quanta). Periodic with period
/// one; the value lies in `[f_max sqrt(d), f_max]`.
pub fn transmon_frequency<T: Scalar>(model: &TransmonFluxModel<T>, flux: T) -> T {
    let c = (r::<T>(std::f64::consts::PI) * flux - model.phi0_offset).cos();
    let d2 = model.d * model.d;
    model.f_max * (d2 + (T::one() - d2) * c * c).sqrt().sqrt()
}

/// Inverts the flux dispersion:
/// `pi flux - phi0 = +/-arccos(sqrt((r^4 - d^2)/(1 - d^2))) + m pi` with
/// `r = target / f_max`. Even branches take the positive root, odd the
/// mirror; branches `k` and `k + 2` differ by exactly one flux quantum.
pub fn flux_for_frequency<T: Scalar>(
    model: &TransmonFluxModel<T>,
    target: T,
    branch: i32,
) -> Result<T> {
    let f_min = model.f_max * model.d.sqrt();
    if target < f_min || target > model.f_max {
        return Err(Error::domain(format!(
            "target frequency out of range [{f_min:?}, {:?}]",
            model.f_max
        )));
    }
    let ratio = target / model.f_max;
    let r4 = ratio * ratio * ratio * ratio;
    let d2 = model.d * model.d;
    let c = if d2 >= T::one() {
        // d = 1: flat dispersion, only target == f_max is in range.
        T::one()
    } else {
        let arg = (r4 - d2) / (T::one() - d2);
        crate::tmin(crate::tmax(arg, T::zero()), T::one()).sqrt()
    };
    // pi flux - phi0 = +/- arccos(c) + m pi: even branches take the positive
    // root, odd branches the mirror, with m advancing every two branches.
    let pi = r::<T>(std::f64::consts::PI);
    let m = r::<T>(branch.div_euclid(2) as f64);
    let a = if branch.rem_euclid(2) == 0 {
        c.acos()
    } else {
        -c.acos()
    };
    Ok((a + model.phi0_offset) / pi + m)
}

/// Flux for a target frequency on the branch closest to zero flux.
pub fn flux_for_frequency_nearest<T: Scalar>(
    model: &TransmonFluxModel<T>,
    target: T,
) -> Result<T> {
    let mut best: Option<T> = None;
    for branch in -4..=4 {
        let flux = flux_for_frequency(model, target, branch)?;
        if best.map_or(true, |b| flux.abs() < b.abs()) {
            best = Some(flux);
        }
    }
    Ok(best.unwrap())
}

/// Linear map from flux-line voltages to fluxes threading each qubit loop,
/// `S_{i,j}` in flux quanta per volt.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkMatrix<T: Scalar> {
    s: DMatrix<T>,
}

impl<T: Scalar> CrosstalkMatrix<T> {
    pub fn new(s: DMatrix<T>) -> Result<Self> {
        if s.nrows() != s.ncols() || s.nrows() == 0 {
            return Err(Error::validation("crosstalk matrix must be square"));
        }
        let svd = s.clone().svd(false, false);
        let max_sv = svd.singular_values.iter().copied().fold(T::zero(), crate::tmax);
        let min_sv = svd
            .singular_values
            .iter()
            .copied()
            .fold(T::max_value().unwrap(), crate::tmin);
        if min_sv <= T::zero() || max_sv / min_sv >= r(1e6) {
            return Err(Error::validation(
                "crosstalk matrix is singular or too ill-conditioned (cond >= 1e6)",
            ));
        }
        Ok(CrosstalkMatrix { s })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.s
    }

    /// True when every diagonal entry dominates the off-diagonal entries of
    /// its row in magnitude; callers may warn otherwise.
    pub fn diagonally_dominant(&self) -> bool {
        let n = self.s.nrows();
        (0..n).all(|i| {
            (0..n)
                .filter(|&j| j != i)
                .all(|j| self.s[(i, i)].abs() > self.s[(i, j)].abs())
        })
    }

    /// Fluxes produced by a voltage configuration.
    pub fn fluxes_for_voltages(&self, voltages: &[T]) -> Result<Vec<T>> {
        if voltages.len() != self.s.nrows() {
            return Err(Error::domain("one voltage per qubit required"));
        }
        let v = nalgebra::DVector::from_column_slice(voltages);
        Ok((&self.s * v).iter().copied().collect())
    }

    /// Solves `S V = flux` for the voltage configuration.
    pub fn voltages_for_fluxes(&self, fluxes: &[T]) -> Result<Vec<T>> {
        if fluxes.len() != self.s.nrows() {
            return Err(Error::domain("one flux per qubit required"));
        }
        let lu = self.s.clone().lu();
        let phi = nalgebra::DVector::from_column_slice(fluxes);
        let v = lu
            .solve(&phi)
            .ok_or_else(|| Error::numerical("crosstalk matrix is singular"))?;
        Ok(v.iter().copied().collect())
    }
}

/// Per-qubit flux models plus the voltage-to-flux crosstalk matrix.
#[derive(Debug, Clone)]
pub struct FluxCalibration<T: Scalar> {
    pub qubit_ids: Vec<String>,
    pub models: Vec<TransmonFluxModel<T>>,
    pub crosstalk: CrosstalkMatrix<T>,
}

/// Maps a target frequency configuration (Hz) to the voltage configuration
/// realizing it, using the nearest-to-zero flux branch per qubit.
pub fn voltages_for_targets<T: Scalar>(
    calibration: &FluxCalibration<T>,
    targets: &[T],
) -> Result<Vec<T>> {
    if targets.len() != calibration.models.len() {
        return Err(Error::domain("one target frequency per qubit required"));
    }
    let mut fluxes = Vec::with_capacity(targets.len());
    for ((model, &target), id) in calibration
        .models
        .iter()
        .zip(targets)
        .zip(&calibration.qubit_ids)
    {
        let flux = flux_for_frequency_nearest(model, target)
            .map_err(|e| Error::domain(format!("qubit {id:?}: {e}")))?;
        fluxes.push(flux);
    }
    calibration.crosstalk.voltages_for_fluxes(&fluxes)
}

/// JSON calibration schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub qubits: Vec<QubitCalConfig>,
    /// Crosstalk matrix in flux quanta per volt.
    #[serde(rename = "S_fq_per_volt")]
    pub s_fq_per_volt: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QubitCalConfig {
    pub id: String,
    pub f_max_hz: f64,
    pub d: f64,
    #[serde(default)]
    pub phi0_rad: f64,
}

impl CalibrationConfig {
    pub fn to_calibration<T: Scalar>(&self) -> Result<FluxCalibration<T>> {
        let n = self.qubits.len();
        if self.s_fq_per_volt.len() != n || self.s_fq_per_volt.iter().any(|row| row.len() != n) {
            return Err(Error::config(
                "S_fq_per_volt must be square with one row per qubit",
            ));
        }
        let s = DMatrix::from_fn(n, n, |i, j| r::<T>(self.s_fq_per_volt[i][j]));
        let crosstalk = CrosstalkMatrix::new(s)?;
        let models = self
            .qubits
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let s_ii = self.s_fq_per_volt[i][i];
                if s_ii == 0.0 {
                    return Err(Error::config(format!(
                        "qubit {:?}: diagonal crosstalk entry must be non-zero",
                        q.id
                    )));
                }
                TransmonFluxModel::new(r(q.f_max_hz), r(q.d), r(q.phi0_rad), r(1.0 / s_ii))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FluxCalibration {
            qubit_ids: self.qubits.iter().map(|q| q.id.clone()).collect(),
            models,
            crosstalk,
        })
    }
}
