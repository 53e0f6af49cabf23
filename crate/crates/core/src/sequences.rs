//! Pulse schedules, instantaneous single-qubit gates, the entangling
//! protocol, and two-qubit state tomography.
//!
//! A schedule is a list of piecewise-constant frequency segments with ideal
//! unitary gates applied instantaneously at segment boundaries. Each segment
//! rebuilds the spectra at its own frequencies, so moving an atom between
//! decoherence-free points switches the dissipation on and off.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::device::DeviceLayout;
use crate::dynamics::{liouvillian_at, propagate, DensityMatrix};
use crate::linalg::{
    embed, identity, nearest_density_matrix, pauli_x, pauli_y, pauli_z, sqrtm_psd, CMat,
};
use crate::{r, C, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone)]
pub struct Segment<T> {
    pub duration: T,
    /// Per-atom angular frequencies, in layout atom order.
    pub frequencies: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct Gate<T> {
    pub after_segment: usize,
    pub atom: String,
    pub axis: Axis,
    pub angle: T,
}

#[derive(Debug, Clone)]
pub struct Measurement {
    pub after_segment: usize,
    /// Pauli string such as "XY" or "ZI".
    pub basis: String,
}

#[derive(Debug, Clone, Default)]
pub struct PulseSchedule<T> {
    pub segments: Vec<Segment<T>>,
    pub gates: Vec<Gate<T>>,
    pub measurements: Vec<Measurement>,
}

impl<T: Scalar> PulseSchedule<T> {
    pub fn validate(&self, layout: &DeviceLayout<T>, band: Option<(T, T)>) -> Result<()> {
        let n = layout.atoms().len();
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.duration >= T::zero()) {
                return Err(Error::validation(format!(
                    "segment {i} has negative duration"
                )));
            }
            if seg.frequencies.len() != n {
                return Err(Error::validation(format!(
                    "segment {i} must list one frequency per atom"
                )));
            }
            if let Some((lo, hi)) = band {
                for (&f, atom) in seg.frequencies.iter().zip(layout.atoms()) {
                    if f < lo || f > hi {
                        return Err(Error::validation(format!(
                            "segment {i}: frequency for atom {:?} outside configured band",
                            atom.id()
                        )));
                    }
                }
            }
        }
        for gate in &self.gates {
            if gate.after_segment >= self.segments.len() {
                return Err(Error::validation(format!(
                    "gate after_segment {} out of range",
                    gate.after_segment
                )));
            }
            if layout.atom_index(&gate.atom).is_none() {
                return Err(Error::validation(format!(
                    "gate refers to unknown atom {:?}",
                    gate.atom
                )));
            }
        }
        for m in &self.measurements {
            if m.after_segment >= self.segments.len() {
                return Err(Error::validation("measurement after_segment out of range"));
            }
            if m.basis.len() != n || m.basis.chars().any(|c| !"IXYZ".contains(c)) {
                return Err(Error::validation(format!(
                    "measurement basis {:?} must be a length-{n} Pauli string",
                    m.basis
                )));
            }
        }
        Ok(())
    }
}

fn single_qubit_rotation<T: Scalar>(axis: Axis, angle: T) -> CMat<T> {
    let sigma = match axis {
        Axis::X => pauli_x::<T>(),
        Axis::Y => pauli_y::<T>(),
        Axis::Z => -pauli_z::<T>(), // physical sigma_z, |1> excited
    };
    let half = angle * r::<T>(0.5);
    identity::<T>(2) * C::new(half.cos(), T::zero()) + sigma * C::new(T::zero(), -half.sin())
}

/// Applies the ideal unitary `exp(-i angle sigma_axis / 2)` on one atom.
pub fn apply_gate<T: Scalar>(
    rho: &DensityMatrix<T>,
    layout: &DeviceLayout<T>,
    atom: &str,
    axis: Axis,
    angle: T,
) -> Result<DensityMatrix<T>> {
    let idx = layout
        .atom_index(atom)
        .ok_or_else(|| Error::validation(format!("unknown atom {atom:?}")))?;
    let n = layout.atoms().len();
    let u = embed(&single_qubit_rotation(axis, angle), idx, n);
    DensityMatrix::new(&u * rho.matrix() * u.adjoint())
}

/// Output of a schedule run: the state after every segment (with boundary
/// gates applied), plus the rotating-frame phase each atom accumulated.
#[derive(Debug, Clone)]
pub struct ScheduleRun<T: Scalar> {
    pub states: Vec<DensityMatrix<T>>,
    /// `sum_seg (omega_atom - omega_rot) * duration` per atom.
    pub accumulated_phase: Vec<T>,
    /// `phase_increments[s][j]`: detuning phase atom `j` picked up during
    /// segment `s` alone.
    pub phase_increments: Vec<Vec<T>>,
    pub rotating_frame_omega: T,
    /// Requested Pauli-string expectations, in schedule order.
    pub measured: Vec<(String, T)>,
}

impl<T: Scalar> ScheduleRun<T> {
    pub fn final_state(&self) -> &DensityMatrix<T> {
        self.states.last().expect("non-empty run")
    }

    /// Final state with the full deterministic detuning phase rotated out,
    /// i.e. expressed in each atom's own rotating frame.
    pub fn frame_corrected_final(&self, layout: &DeviceLayout<T>) -> Result<DensityMatrix<T>> {
        self.frame_corrected_since(layout, 0)
    }

    /// Final state with the detuning phase accumulated from segment
    /// `first_segment` onward rotated out. Phase picked up while an atom held
    /// no coherence is physically irrelevant, so callers correct only from
    /// the segment that created the coherence of interest.
    pub fn frame_corrected_since(
        &self,
        layout: &DeviceLayout<T>,
        first_segment: usize,
    ) -> Result<DensityMatrix<T>> {
        let n = layout.atoms().len();
        let mut rho = self.final_state().clone();
        for idx in 0..n {
            let theta: T = self
                .phase_increments
                .iter()
                .skip(first_segment)
                .map(|seg| seg[idx])
                .sum();
            rho = apply_gate(&rho, layout, layout.atom(idx).id(), Axis::Z, -theta)?;
        }
        Ok(rho)
    }
}

/// Runs a schedule segment by segment: spectra are recomputed at each
/// segment's frequencies and a fresh generator built.
pub fn run_schedule<T: Scalar>(
    layout: &DeviceLayout<T>,
    schedule: &PulseSchedule<T>,
    rho0: &DensityMatrix<T>,
    rotating_frame_omega: Option<T>,
) -> Result<ScheduleRun<T>> {
    schedule.validate(layout, None)?;
    let n = layout.atoms().len();
    let omega_rot = rotating_frame_omega.unwrap_or_else(|| {
        if schedule.segments.is_empty() {
            layout.omega_ref()
        } else {
            schedule.segments[0].frequencies.iter().copied().sum::<T>() / r::<T>(n as f64)
        }
    });

    let mut rho = rho0.clone();
    let mut states = Vec::with_capacity(schedule.segments.len() + 1);
    let mut phases = vec![T::zero(); n];
    let mut increments = Vec::with_capacity(schedule.segments.len());
    let mut measured = Vec::new();
    if schedule.segments.is_empty() {
        states.push(rho.clone());
    }
    for (i, seg) in schedule.segments.iter().enumerate() {
        if seg.duration > T::zero() {
            let l = liouvillian_at(layout, &seg.frequencies, omega_rot)?;
            rho = propagate(&rho, &l, seg.duration)?;
        }
        let inc: Vec<T> = seg
            .frequencies
            .iter()
            .map(|&f| (f - omega_rot) * seg.duration)
            .collect();
        for (p, &d) in phases.iter_mut().zip(&inc) {
            *p += d;
        }
        increments.push(inc);
        for gate in schedule.gates.iter().filter(|g| g.after_segment == i) {
            rho = apply_gate(&rho, layout, &gate.atom, gate.axis, gate.angle)?;
        }
        for m in schedule.measurements.iter().filter(|m| m.after_segment == i) {
            measured.push((m.basis.clone(), pauli_string_expectation(&rho, &m.basis)?));
        }
        states.push(rho.clone());
    }
    Ok(ScheduleRun {
        states,
        accumulated_phase: phases,
        phase_increments: increments,
        rotating_frame_omega: omega_rot,
        measured,
    })
}

fn pauli_operator<T: Scalar>(c: char) -> CMat<T> {
    match c {
        'X' => pauli_x(),
        'Y' => pauli_y(),
        'Z' => pauli_z(),
        _ => identity(2),
    }
}

/// Expectation of an N-qubit Pauli string like "XY" or "ZIZ".
pub fn pauli_string_expectation<T: Scalar>(rho: &DensityMatrix<T>, basis: &str) -> Result<T> {
    let n = rho.n_qubits();
    if basis.len() != n {
        return Err(Error::domain(format!(
            "Pauli string {basis:?} does not match {n}-qubit state"
        )));
    }
    let mut op = identity::<T>(1);
    for c in basis.chars() {
        op = op.kronecker(&pauli_operator::<T>(c));
    }
    Ok(rho.expectation(&op))
}

/// The 15 non-identity two-qubit Pauli labels, in canonical order.
pub fn pauli_labels() -> Vec<String> {
    let axes = ['I', 'X', 'Y', 'Z'];
    let mut out = Vec::with_capacity(15);
    for a in axes {
        for b in axes {
            if a == 'I' && b == 'I' {
                continue;
            }
            out.push(format!("{a}{b}"));
        }
    }
    out
}

/// All 15 non-identity two-qubit Pauli expectation values.
pub fn pauli_expectations<T: Scalar>(rho: &DensityMatrix<T>) -> Result<Vec<T>> {
    if rho.dim() != 4 {
        return Err(Error::domain("tomography expects a two-qubit state"));
    }
    pauli_labels()
        .iter()
        .map(|l| pauli_string_expectation(rho, l))
        .collect()
}

/// Linear-inversion state estimate followed by projection onto the nearest
/// unit-trace PSD matrix.
pub fn reconstruct<T: Scalar>(expectations: &[T]) -> Result<DensityMatrix<T>> {
    if expectations.len() != 15 {
        return Err(Error::domain(format!(
            "need 15 Pauli expectations, got {}",
            expectations.len()
        )));
    }
    let mut m = identity::<T>(4) * C::new(T::one(), T::zero());
    for (label, &e) in pauli_labels().iter().zip(expectations) {
        let mut op = identity::<T>(1);
        for c in label.chars() {
            op = op.kronecker(&pauli_operator::<T>(c));
        }
        m += op * C::new(e, T::zero());
    }
    m *= C::new(r(0.25), T::zero());
    DensityMatrix::new(nearest_density_matrix(&m))
}

/// Adds binomial shot noise to expectation values: each Pauli expectation is
/// re-estimated from `shots` simulated single-shot outcomes.
pub fn add_shot_noise<T: Scalar>(expectations: &[T], shots: u64, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    expectations
        .iter()
        .map(|&e| {
            let p = crate::tmin(crate::tmax((e + T::one()) * r::<T>(0.5), T::zero()), T::one());
            let p64 = num_traits::ToPrimitive::to_f64(&p).unwrap();
            let mut ups = 0u64;
            for _ in 0..shots {
                if rng.gen::<f64>() < p64 {
                    ups += 1;
                }
            }
            r::<T>(2.0 * ups as f64 / shots as f64 - 1.0)
        })
        .collect()
}

/// Uhlmann fidelity `Tr(sqrt(sqrt(sigma) rho sqrt(sigma)))^2`.
pub fn fidelity<T: Scalar>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    if rho.dim() != sigma.dim() {
        return Err(Error::domain("states must have equal dimension"));
    }
    let s = sqrtm_psd(sigma.matrix())?;
    let inner = &s * rho.matrix() * &s;
    let root = sqrtm_psd(&inner)?;
    let tr = root.trace().re;
    Ok(tr * tr)
}

/// The target of the entangling protocol, `(|01> - i |10>)/sqrt(2)`.
pub fn entangled_target<T: Scalar>() -> DensityMatrix<T> {
    let inv_sqrt2 = r::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let mut v = DVector::zeros(4);
    v[1] = C::new(inv_sqrt2, T::zero());
    v[2] = C::new(T::zero(), -inv_sqrt2);
    DensityMatrix::pure(&v).expect("normalized")
}

/// Tomography output of the entangling protocol.
#[derive(Debug, Clone)]
pub struct TomographyResult<T: Scalar> {
    /// (label, value) pairs in canonical Pauli order.
    pub expectations: Vec<(String, T)>,
    pub rho_hat: DensityMatrix<T>,
    pub fidelity: T,
}

/// Settings for [`entangling_protocol`].
#[derive(Debug, Clone, Copy)]
pub struct ProtocolOptions<T> {
    /// Idle-segment duration before and after the interaction (s).
    pub idle_duration: T,
    /// Optional binomial shot noise on the tomography expectations.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl<T: Scalar> Default for ProtocolOptions<T> {
    fn default() -> Self {
        ProtocolOptions {
            idle_duration: r(100e-9),
            shots: None,
            seed: 0,
        }
    }
}

/// Prepares `(|01> - i |10>)/sqrt(2)`: atom 0 idles at `omega_df1`, atom 1 is
/// excited at `omega_df2`, atom 0 is brought onto resonance for
/// `pi / (4 g_eff)` and returned, then the state is tomographed against the
/// ideal target.
pub fn entangling_protocol<T: Scalar>(
    layout: &DeviceLayout<T>,
    omega_df1: T,
    omega_df2: T,
    g_eff: T,
    options: &ProtocolOptions<T>,
) -> Result<TomographyResult<T>> {
    if layout.atoms().len() != 2 {
        return Err(Error::config("entangling protocol needs exactly 2 atoms"));
    }
    if !(g_eff > T::zero()) {
        return Err(Error::config("g_eff must be > 0"));
    }
    let t_int = r::<T>(std::f64::consts::PI) / (r::<T>(4.0) * g_eff);
    let idle = options.idle_duration;
    let schedule = PulseSchedule {
        segments: vec![
            Segment {
                duration: idle,
                frequencies: vec![omega_df1, omega_df2],
            },
            Segment {
                duration: t_int,
                frequencies: vec![omega_df2, omega_df2],
            },
            Segment {
                duration: idle,
                frequencies: vec![omega_df1, omega_df2],
            },
        ],
        gates: vec![Gate {
            after_segment: 0,
            atom: layout.atom(1).id().to_string(),
            axis: Axis::X,
            angle: r(std::f64::consts::PI),
        }],
        measurements: Vec::new(),
    };
    let run = run_schedule(
        layout,
        &schedule,
        &DensityMatrix::ground(2),
        Some(omega_df2),
    )?;
    // The entangling coherence is created during the interaction segment;
    // only phase accumulated from there on is physical for it.
    let rho = run.frame_corrected_since(layout, 1)?;
    let mut expectations = pauli_expectations(&rho)?;
    if let Some(shots) = options.shots {
        expectations = add_shot_noise(&expectations, shots, options.seed);
    }
    let rho_hat = reconstruct(&expectations)?;
    let fid = fidelity(&rho_hat, &entangled_target())?;
    Ok(TomographyResult {
        expectations: pauli_labels().into_iter().zip(expectations).collect(),
        rho_hat,
        fidelity: fid,
    })
}

/// JSON schedule schema. Frequencies are cyclic (Hz), keyed by atom id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub segments: Vec<SegmentConfig>,
    #[serde(default)]
    pub gates: Vec<GateConfig>,
    #[serde(default)]
    pub measurements: Vec<MeasurementConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub duration_s: f64,
    pub frequencies_hz: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateConfig {
    pub after_segment: usize,
    pub atom: String,
    pub axis: Axis,
    pub angle_rad: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementConfig {
    pub after_segment: usize,
    pub basis: String,
}

impl ScheduleConfig {
    pub fn to_schedule<T: Scalar>(&self, layout: &DeviceLayout<T>) -> Result<PulseSchedule<T>> {
        let tau = r::<T>(std::f64::consts::TAU);
        let segments = self
            .segments
            .iter()
            .map(|s| {
                let mut freqs = Vec::with_capacity(layout.atoms().len());
                for atom in layout.atoms() {
                    let f = s.frequencies_hz.get(atom.id()).ok_or_else(|| {
                        Error::config(format!(
                            "segment missing frequency for atom {:?}",
                            atom.id()
                        ))
                    })?;
                    freqs.push(tau * r::<T>(*f));
                }
                Ok(Segment {
                    duration: r(s.duration_s),
                    frequencies: freqs,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let schedule = PulseSchedule {
            segments,
            gates: self
                .gates
                .iter()
                .map(|g| Gate {
                    after_segment: g.after_segment,
                    atom: g.atom.clone(),
                    axis: g.axis,
                    angle: r(g.angle_rad),
                })
                .collect(),
            measurements: self
                .measurements
                .iter()
                .map(|m| Measurement {
                    after_segment: m.after_segment,
                    basis: m.basis.clone(),
                })
                .collect(),
        };
        schedule.validate(layout, None)?;
        Ok(schedule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::braided_two_point;
    use approx::assert_relative_eq;

    const TAU: f64 = std::f64::consts::TAU;
    const PI: f64 = std::f64::consts::PI;

    fn df_layout() -> crate::DeviceLayout64 {
        braided_two_point(TAU * 2e6, PI / 2.0, TAU * 4.645e9, [0.0, 0.0], [0.0, 0.0]).unwrap()
    }

    #[test]
    fn pi_pulse_excites_the_target_atom() {
        let layout = df_layout();
        let rho = apply_gate(&DensityMatrix::ground(2), &layout, "b", Axis::X, PI).unwrap();
        assert_relative_eq!(rho.population(0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(rho.population(1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn z_rotation_leaves_populations_alone() {
        let layout = df_layout();
        let plus = apply_gate(&DensityMatrix::ground(2), &layout, "a", Axis::Y, PI / 2.0).unwrap();
        let rot = apply_gate(&plus, &layout, "a", Axis::Z, 1.234).unwrap();
        assert_relative_eq!(rot.population(0), plus.population(0), epsilon = 1e-12);
        // <X> rotates into <Y> under a Z rotation.
        let x0 = pauli_string_expectation(&plus, "XI").unwrap();
        let x1 = pauli_string_expectation(&rot, "XI").unwrap();
        assert!((x1 - x0).abs() > 0.1);
    }

    #[test]
    fn canonical_pauli_labels() {
        let labels = pauli_labels();
        assert_eq!(labels.len(), 15);
        assert_eq!(labels[0], "IX");
        assert_eq!(labels[14], "ZZ");
        assert!(!labels.contains(&"II".to_string()));
    }

    #[test]
    fn tomography_round_trips_exact_expectations() {
        let target = entangled_target::<f64>();
        let exps = pauli_expectations(&target).unwrap();
        let rho = reconstruct(&exps).unwrap();
        let f = fidelity(&rho, &target).unwrap();
        assert_relative_eq!(f, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded() {
        let a = entangled_target::<f64>();
        let b = DensityMatrix::maximally_mixed(2);
        let fab = fidelity(&a, &b).unwrap();
        let fba = fidelity(&b, &a).unwrap();
        assert_relative_eq!(fab, fba, epsilon = 1e-9);
        assert!(fab > 0.0 && fab < 1.0);
        assert_relative_eq!(fidelity(&a, &a).unwrap(), 1.0, epsilon = 1e-9);
        // Pure target vs maximally mixed: F = <psi|rho|psi> = 1/4.
        assert_relative_eq!(fab, 0.25, epsilon = 1e-9);
    }

    #[test]
    fn shot_noise_is_seeded_and_converges() {
        let exps: Vec<f64> = vec![0.5; 15];
        let a = add_shot_noise(&exps, 1000, 42);
        let b = add_shot_noise(&exps, 1000, 42);
        assert_eq!(a, b);
        let c = add_shot_noise(&exps, 1000, 43);
        assert_ne!(a, c);
        let big = add_shot_noise(&exps, 2_000_000, 1);
        for v in big {
            assert!((v - 0.5).abs() < 2e-3);
        }
    }

    #[test]
    fn schedule_validation_catches_mistakes() {
        let layout = df_layout();
        let w0 = layout.omega_ref();
        let mut sched = PulseSchedule::<f64> {
            segments: vec![Segment {
                duration: 1e-6,
                frequencies: vec![w0, w0],
            }],
            gates: vec![],
            measurements: vec![],
        };
        assert!(sched.validate(&layout, None).is_ok());
        sched.gates.push(Gate {
            after_segment: 5,
            atom: "a".into(),
            axis: Axis::X,
            angle: PI,
        });
        assert!(sched.validate(&layout, None).is_err());
        sched.gates[0].after_segment = 0;
        sched.gates[0].atom = "nope".into();
        assert!(sched.validate(&layout, None).is_err());
        sched.gates.clear();
        sched.measurements.push(Measurement {
            after_segment: 0,
            basis: "XQ".into(),
        });
        assert!(sched.validate(&layout, None).is_err());
    }

    #[test]
    fn accumulated_phase_tracks_detuning() {
        let layout = df_layout();
        let w0 = layout.omega_ref();
        let delta = TAU * 1e6;
        let sched = PulseSchedule::<f64> {
            segments: vec![Segment {
                duration: 1e-7,
                frequencies: vec![w0 + delta, w0],
            }],
            gates: vec![],
            measurements: vec![],
        };
        let run = run_schedule(&layout, &sched, &DensityMatrix::ground(2), Some(w0)).unwrap();
        assert_relative_eq!(run.accumulated_phase[0], delta * 1e-7, max_relative = 1e-12);
        assert_relative_eq!(run.accumulated_phase[1], 0.0);
    }

    #[test]
    fn ideal_entangling_protocol_hits_the_target() {
        let layout = df_layout();
        let w0 = layout.omega_ref();
        let g = crate::spectra::g_general(&layout, 0, 1, w0).unwrap();
        // Both decoherence-free points collapse onto w0 for the two-point
        // device test: idle at w0 is already decay-free.
        let opts = ProtocolOptions {
            idle_duration: 0.0,
            shots: None,
            seed: 0,
        };
        let res = entangling_protocol(&layout, w0, w0, g, &opts).unwrap();
        assert!(res.fidelity >= 0.999, "fidelity {}", res.fidelity);
    }

    #[test]
    fn schedule_config_maps_ids_and_units() {
        let layout = df_layout();
        let mut freqs = BTreeMap::new();
        freqs.insert("a".to_string(), 4.5e9);
        freqs.insert("b".to_string(), 4.645e9);
        let config = ScheduleConfig {
            segments: vec![SegmentConfig {
                duration_s: 1e-7,
                frequencies_hz: freqs,
            }],
            gates: vec![GateConfig {
                after_segment: 0,
                atom: "b".into(),
                axis: Axis::X,
                angle_rad: PI,
            }],
            measurements: vec![],
        };
        let sched = config.to_schedule(&layout).unwrap();
        assert_relative_eq!(sched.segments[0].frequencies[0], TAU * 4.5e9);
        assert_relative_eq!(sched.segments[0].frequencies[1], TAU * 4.645e9);
        // Unknown atom in the frequency map target.
        let mut bad = config.clone();
        bad.segments[0].frequencies_hz.remove("a");
        assert!(bad.to_schedule(&layout).is_err());
    }
}
