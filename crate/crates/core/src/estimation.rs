//! Fitting spectral models to measured or synthetic relaxation and exchange
//! data.
//!
//! Models are parameterized in cyclic units: rates in Hz, phases in radians
//! at a fixed reference frequency and scaled linearly with frequency, point
//! strengths scaled quadratically. The optimizer is the bounded multi-start
//! Nelder-Mead from [`crate::optim`].

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::device::DeviceLayout;
use crate::optim::{multistart, Bounds, NelderMeadOptions};
use crate::{r, spectra, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableKind {
    /// Per-atom relaxation rate.
    Gamma,
    /// Pairwise exchange coupling.
    G,
}

impl ObservableKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObservableKind::Gamma => "gamma",
            ObservableKind::G => "g",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(ObservableKind::Gamma),
            "g" => Ok(ObservableKind::G),
            other => Err(Error::config(format!("unknown observable kind {other:?}"))),
        }
    }
}

/// One measured spectrum point.
#[derive(Debug, Clone)]
pub struct DataPoint<T> {
    pub kind: ObservableKind,
    pub label: String,
    pub f_hz: T,
    pub value_hz: T,
    pub sigma_hz: Option<T>,
}

pub type SpectrumDataset<T> = Vec<DataPoint<T>>;

/// Which closed-form (or general) spectrum model to evaluate.
#[derive(Debug, Clone)]
pub enum ModelKind<T: Scalar> {
    TwoPoint,
    ThreePoint,
    /// Scales an explicit layout: point strengths by `gamma_scale`, delays by
    /// `phi_scale`.
    General(DeviceLayout<T>),
}

impl<T: Scalar> ModelKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::TwoPoint => "two_point",
            ModelKind::ThreePoint => "three_point",
            ModelKind::General(_) => "general",
        }
    }

    /// Parameter names the model requires.
    pub fn required_params(&self) -> Vec<&'static str> {
        match self {
            ModelKind::TwoPoint => vec!["f_ref_hz", "gamma0_hz", "phi_ref", "gamma_nr_hz", "g_p_hz"],
            ModelKind::ThreePoint => vec![
                "f_ref_hz",
                "gamma1_hz",
                "gamma2_hz",
                "phi2_ref",
                "ratio",
                "gamma_nr_hz",
                "g_p_hz",
            ],
            ModelKind::General(_) => vec!["gamma_scale", "phi_scale", "gamma_nr_hz", "g_p_hz"],
        }
    }
}

pub type Params<T> = BTreeMap<String, T>;

fn get<T: Scalar>(params: &Params<T>, name: &str) -> Result<T> {
    params
        .get(name)
        .copied()
        .ok_or_else(|| Error::config(format!("missing model parameter {name:?}")))
}

/// Evaluates the model at one frequency (Hz in, Hz out). Matches the
/// closed forms in [`crate::spectra`] exactly.
pub fn model_predict<T: Scalar>(
    kind: &ModelKind<T>,
    params: &Params<T>,
    f_hz: T,
    observable: ObservableKind,
) -> Result<T> {
    if !(f_hz > T::zero()) {
        return Err(Error::domain("frequency must be > 0"));
    }
    let gamma_nr = get(params, "gamma_nr_hz")?;
    let g_p = get(params, "g_p_hz")?;
    match kind {
        ModelKind::TwoPoint => {
            let f_ref = get(params, "f_ref_hz")?;
            let scale = f_hz / f_ref;
            let gamma = get(params, "gamma0_hz")? * scale * scale;
            let phi = get(params, "phi_ref")? * scale;
            Ok(match observable {
                ObservableKind::Gamma => spectra::two_point_gamma(gamma, phi, gamma_nr),
                ObservableKind::G => {
                    spectra::apply_parasitic(spectra::two_point_g(gamma, phi), g_p)
                }
            })
        }
        ModelKind::ThreePoint => {
            let f_ref = get(params, "f_ref_hz")?;
            let scale = f_hz / f_ref;
            let gamma1 = get(params, "gamma1_hz")? * scale * scale;
            let gamma2 = get(params, "gamma2_hz")? * scale * scale;
            let phi2 = get(params, "phi2_ref")? * scale;
            let phi1 = get(params, "ratio")? * phi2;
            Ok(match observable {
                ObservableKind::Gamma => {
                    spectra::three_point_gamma(gamma1, gamma2, phi1, phi2, phi1, gamma_nr)
                }
                ObservableKind::G => spectra::apply_parasitic(
                    spectra::three_point_g(gamma1, gamma2, phi1, phi2, phi1),
                    g_p,
                ),
            })
        }
        ModelKind::General(layout) => {
            let gamma_scale = get(params, "gamma_scale")?;
            let phi_scale = get(params, "phi_scale")?;
            let scaled = scale_layout(layout, gamma_scale, phi_scale)?;
            let tau = r::<T>(std::f64::consts::TAU);
            let omega = tau * f_hz;
            Ok(match observable {
                ObservableKind::Gamma => {
                    spectra::gamma_radiative(&scaled, 0, omega)? / tau + gamma_nr
                }
                ObservableKind::G => {
                    spectra::apply_parasitic(spectra::g_general(&scaled, 0, 1, omega)? / tau, g_p)
                }
            })
        }
    }
}

fn scale_layout<T: Scalar>(
    layout: &DeviceLayout<T>,
    gamma_scale: T,
    phi_scale: T,
) -> Result<DeviceLayout<T>> {
    use crate::device::{CouplingPoint, GiantAtom};
    let atoms = layout
        .atoms()
        .iter()
        .map(|a| {
            let pts = a
                .points()
                .iter()
                .map(|p| CouplingPoint::new(p.delay() * phi_scale, p.gamma_ref() * gamma_scale))
                .collect::<Result<Vec<_>>>()?;
            GiantAtom::new(a.id(), pts, a.gamma_nr(), a.gamma_phi())
        })
        .collect::<Result<Vec<_>>>()?;
    DeviceLayout::new(atoms, layout.omega_ref())
}

/// One fit parameter: fixed when `lo == hi`, free when `lo < hi`.
#[derive(Debug, Clone)]
pub struct ParamSpec<T> {
    pub name: String,
    pub init: T,
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> ParamSpec<T> {
    pub fn free(name: impl Into<String>, init: T, lo: T, hi: T) -> Self {
        ParamSpec {
            name: name.into(),
            init,
            lo,
            hi,
        }
    }

    pub fn fixed(name: impl Into<String>, value: T) -> Self {
        ParamSpec {
            name: name.into(),
            init: value,
            lo: value,
            hi: value,
        }
    }

    fn is_free(&self) -> bool {
        self.lo < self.hi
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<T> {
    pub params: Params<T>,
    /// Root-mean-square weighted residual, Hz.
    pub residual_rms: T,
    pub iterations: usize,
    pub converged: bool,
    /// Per-free-parameter 1-sigma uncertainty from finite-difference
    /// curvature of the objective; absent when the curvature is singular.
    pub uncertainties: Params<T>,
}

/// Serializable (f64) view of a fit result.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub params: BTreeMap<String, f64>,
    pub residual_rms_hz: f64,
    pub iterations: usize,
    pub converged: bool,
    pub uncertainties: BTreeMap<String, f64>,
}

impl<T: Scalar> FitResult<T> {
    pub fn to_report(&self) -> FitReport {
        let f = |x: &T| num_traits::ToPrimitive::to_f64(x).unwrap();
        FitReport {
            params: self.params.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
            residual_rms_hz: f(&self.residual_rms),
            iterations: self.iterations,
            converged: self.converged,
            uncertainties: self
                .uncertainties
                .iter()
                .map(|(k, v)| (k.clone(), f(v)))
                .collect(),
        }
    }
}

fn objective<T: Scalar>(
    dataset: &[DataPoint<T>],
    kind: &ModelKind<T>,
    params: &Params<T>,
) -> T {
    let weighted = dataset.iter().all(|p| p.sigma_hz.is_some());
    let mut acc = T::zero();
    for point in dataset {
        let pred = match model_predict(kind, params, point.f_hz, point.kind) {
            Ok(v) => v,
            Err(_) => return T::max_value().unwrap(),
        };
        let resid = pred - point.value_hz;
        let w = if weighted {
            let s = point.sigma_hz.unwrap();
            T::one() / (s * s)
        } else {
            T::one()
        };
        acc += w * resid * resid;
    }
    acc
}

/// Weighted least-squares fit with multi-start Nelder-Mead. Deterministic for
/// a given seed.
pub fn fit<T: Scalar>(
    dataset: &SpectrumDataset<T>,
    kind: &ModelKind<T>,
    spec: &[ParamSpec<T>],
    restarts: usize,
    seed: u64,
) -> Result<FitResult<T>> {
    for required in kind.required_params() {
        if !spec.iter().any(|p| p.name == required) {
            return Err(Error::config(format!(
                "missing parameter spec for {required:?}"
            )));
        }
    }
    let free: Vec<&ParamSpec<T>> = spec.iter().filter(|p| p.is_free()).collect();
    if free.is_empty() {
        return Err(Error::config("no free parameters to fit"));
    }
    if dataset.len() < free.len() {
        return Err(Error::config(format!(
            "dataset has {} points but the model has {} free parameters",
            dataset.len(),
            free.len()
        )));
    }

    let assemble = |x: &[T]| -> Params<T> {
        let mut params: Params<T> = spec
            .iter()
            .map(|p| (p.name.clone(), p.init))
            .collect();
        for (p, &v) in free.iter().zip(x) {
            params.insert(p.name.clone(), v);
        }
        params
    };
    let f = move |x: &[T]| objective(dataset, kind, &assemble(x));

    let bounds = Bounds::new(
        free.iter().map(|p| p.lo).collect(),
        free.iter().map(|p| p.hi).collect(),
    )?;
    let init: Vec<T> = free.iter().map(|p| p.init).collect();
    let options = NelderMeadOptions::default();
    let best = multistart(&f, Some(&init), &bounds, restarts, seed, &options)?;

    let params = assemble(&best.x);
    let n = r::<T>(dataset.len() as f64);
    let residual_rms = (best.fx / n).sqrt();

    // 1-sigma from the finite-difference Hessian of chi^2: cov = 2 H^{-1}.
    let mut uncertainties = Params::new();
    let dim = free.len();
    let mut hessian = nalgebra::DMatrix::<T>::zeros(dim, dim);
    let step: Vec<T> = free
        .iter()
        .zip(&best.x)
        .map(|(p, &x)| crate::tmax(x.abs() * r(1e-5), (p.hi - p.lo) * r(1e-8)))
        .collect();
    let f0 = best.fx;
    let eval = |x: &[T]| f(x);
    for i in 0..dim {
        for j in i..dim {
            let mut xpp = best.x.clone();
            let mut xpm = best.x.clone();
            let mut xmp = best.x.clone();
            let mut xmm = best.x.clone();
            xpp[i] += step[i];
            xpp[j] += step[j];
            xpm[i] += step[i];
            xpm[j] -= step[j];
            xmp[i] -= step[i];
            xmp[j] += step[j];
            xmm[i] -= step[i];
            xmm[j] -= step[j];
            let h = if i == j {
                let mut xp = best.x.clone();
                let mut xm = best.x.clone();
                xp[i] += step[i];
                xm[i] -= step[i];
                (eval(&xp) - f0 * r(2.0) + eval(&xm)) / (step[i] * step[i])
            } else {
                (eval(&xpp) - eval(&xpm) - eval(&xmp) + eval(&xmm))
                    / (r::<T>(4.0) * step[i] * step[j])
            };
            hessian[(i, j)] = h;
            hessian[(j, i)] = h;
        }
    }
    if let Some(inv) = hessian.try_inverse() {
        for (k, p) in free.iter().enumerate() {
            let var = r::<T>(2.0) * inv[(k, k)];
            if var > T::zero() {
                uncertainties.insert(p.name.clone(), var.sqrt());
            }
        }
    }

    Ok(FitResult {
        params,
        residual_rms,
        iterations: best.iterations,
        converged: best.converged,
        uncertainties,
    })
}

/// Generates a synthetic dataset (gamma rows for atom "a", g rows for pair
/// "a_b") from the forward model, with optional Gaussian noise of absolute
/// standard deviation `noise_sigma_hz`.
pub fn synthesize<T: Scalar>(
    kind: &ModelKind<T>,
    params: &Params<T>,
    f_grid_hz: &[T],
    noise_sigma_hz: T,
    seed: u64,
) -> Result<SpectrumDataset<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * f_grid_hz.len());
    for &f_hz in f_grid_hz {
        for (kind_obs, label) in [(ObservableKind::Gamma, "a"), (ObservableKind::G, "a_b")] {
            let clean = model_predict(kind, params, f_hz, kind_obs)?;
            let noise = if noise_sigma_hz > T::zero() {
                noise_sigma_hz * gaussian(&mut rng)
            } else {
                T::zero()
            };
            out.push(DataPoint {
                kind: kind_obs,
                label: label.to_string(),
                f_hz,
                value_hz: clean + noise,
                sigma_hz: if noise_sigma_hz > T::zero() {
                    Some(noise_sigma_hz)
                } else {
                    None
                },
            });
        }
    }
    Ok(out)
}

fn gaussian<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    // Box-Muller.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    r((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos())
}

/// Writes the dataset in the `kind,label,f_hz,value_hz,sigma_hz` CSV layout.
pub fn dataset_to_csv<T: Scalar>(dataset: &SpectrumDataset<T>) -> String {
    let f = |x: &T| format!("{}", num_traits::ToPrimitive::to_f64(x).unwrap());
    let mut out = String::from("kind,label,f_hz,value_hz,sigma_hz\n");
    for p in dataset {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.kind.as_str(),
            p.label,
            f(&p.f_hz),
            f(&p.value_hz),
            p.sigma_hz.as_ref().map(|s| f(s)).unwrap_or_default()
        ));
    }
    out
}

/// Parses the dataset CSV layout written by [`dataset_to_csv`].
pub fn dataset_from_csv<T: Scalar>(text: &str) -> Result<SpectrumDataset<T>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config("empty dataset CSV"))?;
    if header.trim() != "kind,label,f_hz,value_hz,sigma_hz" {
        return Err(Error::config(format!(
            "unexpected dataset CSV header {header:?}"
        )));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::config(format!(
                "dataset CSV line {}: expected 5 fields",
                lineno + 2
            )));
        }
        let parse = |s: &str| -> Result<T> {
            s.trim()
                .parse::<f64>()
                .map(r)
                .map_err(|_| Error::config(format!("bad number {s:?} on line {}", lineno + 2)))
        };
        let f_hz = parse(fields[2])?;
        let value_hz = parse(fields[3])?;
        if !(f_hz > T::zero()) {
            return Err(Error::config(format!(
                "dataset CSV line {}: f_hz must be > 0",
                lineno + 2
            )));
        }
        let sigma_hz = if fields[4].trim().is_empty() {
            None
        } else {
            let s = parse(fields[4])?;
            if !(s > T::zero()) {
                return Err(Error::config(format!(
                    "dataset CSV line {}: sigma_hz must be > 0 when present",
                    lineno + 2
                )));
            }
            Some(s)
        };
        out.push(DataPoint {
            kind: ObservableKind::parse(fields[0].trim())?,
            label: fields[1].trim().to_string(),
            f_hz,
            value_hz,
            sigma_hz,
        });
    }
    Ok(out)
}
