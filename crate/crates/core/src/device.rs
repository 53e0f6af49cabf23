//! Giant-atom device geometry.
//!
//! A layout stores absolute photon travel delays (seconds) for every coupling
//! point rather than phases, since phases are frequency dependent. Helpers
//! construct layouts from phase-at-reference specifications matching the
//! braided device patterns.

use serde::{Deserialize, Serialize};

use crate::{r, C, Error, Result, Scalar};

/// One point where an atom couples to the waveguide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingPoint<T> {
    /// Photon travel time from the waveguide origin to this point (s).
    delay: T,
    /// Physical coupling strength at the layout's reference frequency (rad/s).
    gamma_ref: T,
}

impl<T: Scalar> CouplingPoint<T> {
    pub fn new(delay: T, gamma_ref: T) -> Result<Self> {
        if !(gamma_ref > T::zero()) {
            return Err(Error::validation(format!(
                "coupling point gamma_ref must be > 0, got {gamma_ref:?}"
            )));
        }
        if !(delay >= T::zero()) || !delay.is_finite() {
            return Err(Error::validation(format!(
                "coupling point delay must be finite and >= 0, got {delay:?}"
            )));
        }
        Ok(CouplingPoint { delay, gamma_ref })
    }

    pub fn delay(&self) -> T {
        self.delay
    }

    pub fn gamma_ref(&self) -> T {
        self.gamma_ref
    }
}

/// A giant atom: an emitter attached to the waveguide at one or more points.
#[derive(Debug, Clone, PartialEq)]
pub struct GiantAtom<T> {
    id: String,
    points: Vec<CouplingPoint<T>>,
    gamma_nr: T,
    gamma_phi: T,
}

impl<T: Scalar> GiantAtom<T> {
    pub fn new(
        id: impl Into<String>,
        mut points: Vec<CouplingPoint<T>>,
        gamma_nr: T,
        gamma_phi: T,
    ) -> Result<Self> {
        let id = id.into();
        if points.is_empty() {
            return Err(Error::validation(format!(
                "atom {id:?} needs at least one coupling point"
            )));
        }
        if !(gamma_nr >= T::zero()) {
            return Err(Error::validation(format!(
                "atom {id:?}: gamma_nr must be >= 0"
            )));
        }
        if !(gamma_phi >= T::zero()) {
            return Err(Error::validation(format!(
                "atom {id:?}: gamma_phi must be >= 0"
            )));
        }
        points.sort_by(|a, b| a.delay.partial_cmp(&b.delay).expect("finite delays"));
        Ok(GiantAtom {
            id,
            points,
            gamma_nr,
            gamma_phi,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Coupling points, sorted by delay.
    pub fn points(&self) -> &[CouplingPoint<T>] {
        &self.points
    }

    /// Non-radiative decay rate (rad/s).
    pub fn gamma_nr(&self) -> T {
        self.gamma_nr
    }

    /// Pure dephasing rate (rad/s), 0 unless configured.
    pub fn gamma_phi(&self) -> T {
        self.gamma_phi
    }
}

/// Full device: a set of giant atoms along one waveguide plus the reference
/// frequency at which the point strengths are quoted.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceLayout<T> {
    atoms: Vec<GiantAtom<T>>,
    omega_ref: T,
}

impl<T: Scalar> DeviceLayout<T> {
    pub fn new(atoms: Vec<GiantAtom<T>>, omega_ref: T) -> Result<Self> {
        if !(omega_ref > T::zero()) {
            return Err(Error::validation("omega_ref must be > 0"));
        }
        if atoms.is_empty() {
            return Err(Error::validation("layout needs at least one atom"));
        }
        for (i, a) in atoms.iter().enumerate() {
            for b in atoms.iter().skip(i + 1) {
                if a.id == b.id {
                    return Err(Error::validation(format!(
                        "duplicate atom id {:?}",
                        a.id
                    )));
                }
            }
        }
        Ok(DeviceLayout { atoms, omega_ref })
    }

    pub fn atoms(&self) -> &[GiantAtom<T>] {
        &self.atoms
    }

    pub fn atom(&self, index: usize) -> &GiantAtom<T> {
        &self.atoms[index]
    }

    pub fn atom_index(&self, id: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.id == id)
    }

    /// Reference angular frequency at which `gamma_ref` values hold (rad/s).
    pub fn omega_ref(&self) -> T {
        self.omega_ref
    }
}

fn check_omega<T: Scalar>(omega: T) -> Result<()> {
    if !(omega > T::zero()) {
        return Err(Error::domain(format!(
            "frequency must be > 0, got {omega:?}"
        )));
    }
    Ok(())
}

/// Physical coupling strength of one point at frequency `omega`, following the
/// quadratic capacitive scaling `gamma(omega) = gamma_ref (omega/omega_ref)^2`.
pub fn coupling_rate<T: Scalar>(
    point: &CouplingPoint<T>,
    omega: T,
    omega_ref: T,
) -> Result<T> {
    check_omega(omega)?;
    let ratio = omega / omega_ref;
    Ok(point.gamma_ref * ratio * ratio)
}

/// Phase a waveguide photon at `omega` picks up travelling between two
/// coupling points: `phi = omega |tau_a - tau_b|`.
pub fn phase_between<T: Scalar>(
    point_a: &CouplingPoint<T>,
    point_b: &CouplingPoint<T>,
    omega: T,
) -> Result<T> {
    check_omega(omega)?;
    let dt = if point_a.delay >= point_b.delay {
        point_a.delay - point_b.delay
    } else {
        point_b.delay - point_a.delay
    };
    Ok(omega * dt)
}

/// Complex coupling amplitude of one atom, `A(omega) = sum_n exp(-i omega tau_n)`.
///
/// Its magnitude lies in `[0, M]` for an atom with `M` coupling points.
pub fn complex_amplitude<T: Scalar>(atom: &GiantAtom<T>, omega: T) -> Result<C<T>> {
    check_omega(omega)?;
    let mut acc = C::new(T::zero(), T::zero());
    for p in &atom.points {
        let phase = -omega * p.delay;
        acc += C::new(phase.cos(), phase.sin());
    }
    Ok(acc)
}

/// Phase-at-reference description of a device, used to build a [`DeviceLayout`]
/// when only the inter-point phases at one frequency are known.
///
/// Points are listed in waveguide order; `assignment[i]` is the index of the
/// atom owning the i-th point, `gaps[i]` the phase (radians, at `omega_ref`)
/// between points `i` and `i + 1`, and `strengths[i]` the point's coupling
/// rate at `omega_ref`.
#[derive(Debug, Clone)]
pub struct PhasePattern<T> {
    pub omega_ref: T,
    pub atom_ids: Vec<String>,
    pub assignment: Vec<usize>,
    pub gaps: Vec<T>,
    pub strengths: Vec<T>,
    pub gamma_nr: Vec<T>,
    pub gamma_phi: Vec<T>,
}

/// Converts per-gap phases at the reference frequency into cumulative delays
/// `tau = sum phi / omega_ref` and assembles the layout.
pub fn layout_from_phase_refs<T: Scalar>(pattern: &PhasePattern<T>) -> Result<DeviceLayout<T>> {
    let n_pts = pattern.assignment.len();
    let n_atoms = pattern.atom_ids.len();
    if n_pts == 0 {
        return Err(Error::validation("pattern has no coupling points"));
    }
    if pattern.gaps.len() + 1 != n_pts {
        return Err(Error::validation(format!(
            "pattern with {n_pts} points needs {} gaps, got {}",
            n_pts - 1,
            pattern.gaps.len()
        )));
    }
    if pattern.strengths.len() != n_pts {
        return Err(Error::validation("one strength per point required"));
    }
    if pattern.gamma_nr.len() != n_atoms || pattern.gamma_phi.len() != n_atoms {
        return Err(Error::validation(
            "gamma_nr/gamma_phi must have one entry per atom",
        ));
    }
    if pattern.gaps.iter().any(|g| !(*g >= T::zero())) {
        return Err(Error::validation("phase gaps must be >= 0"));
    }
    if pattern.assignment.iter().any(|&a| a >= n_atoms) {
        return Err(Error::validation("assignment refers to unknown atom index"));
    }
    for a in 0..n_atoms {
        if !pattern.assignment.contains(&a) {
            return Err(Error::validation(format!(
                "atom {:?} owns no coupling point",
                pattern.atom_ids[a]
            )));
        }
    }
    if !(pattern.omega_ref > T::zero()) {
        return Err(Error::validation("omega_ref must be > 0"));
    }

    let mut delay = T::zero();
    let mut per_atom_points: Vec<Vec<CouplingPoint<T>>> = vec![Vec::new(); n_atoms];
    for (i, &atom_idx) in pattern.assignment.iter().enumerate() {
        if i > 0 {
            delay += pattern.gaps[i - 1] / pattern.omega_ref;
        }
        per_atom_points[atom_idx].push(CouplingPoint::new(delay, pattern.strengths[i])?);
    }

    let atoms = pattern
        .atom_ids
        .iter()
        .zip(per_atom_points)
        .enumerate()
        .map(|(i, (id, pts))| GiantAtom::new(id.clone(), pts, pattern.gamma_nr[i], pattern.gamma_phi[i]))
        .collect::<Result<Vec<_>>>()?;
    DeviceLayout::new(atoms, pattern.omega_ref)
}

/// Two braided two-point atoms (a, b, a, b) with equal gaps and equal
/// strengths.
pub fn braided_two_point<T: Scalar>(
    gamma_ref: T,
    phi_ref: T,
    omega_ref: T,
    gamma_nr: [T; 2],
    gamma_phi: [T; 2],
) -> Result<DeviceLayout<T>> {
    layout_from_phase_refs(&PhasePattern {
        omega_ref,
        atom_ids: vec!["a".into(), "b".into()],
        assignment: vec![0, 1, 0, 1],
        gaps: vec![phi_ref; 3],
        strengths: vec![gamma_ref; 4],
        gamma_nr: gamma_nr.to_vec(),
        gamma_phi: gamma_phi.to_vec(),
    })
}

/// Two braided three-point atoms (a, b, a, b, a, b) with gap pattern
/// (phi1, phi2, phi3, phi2, phi1): outer points couple at `gamma1`, the
/// central point of each atom at `gamma2`.
#[allow(clippy::too_many_arguments)]
pub fn braided_three_point<T: Scalar>(
    gamma1: T,
    gamma2: T,
    phi1: T,
    phi2: T,
    phi3: T,
    omega_ref: T,
    gamma_nr: [T; 2],
    gamma_phi: [T; 2],
) -> Result<DeviceLayout<T>> {
    layout_from_phase_refs(&PhasePattern {
        omega_ref,
        atom_ids: vec!["a".into(), "b".into()],
        assignment: vec![0, 1, 0, 1, 0, 1],
        gaps: vec![phi1, phi2, phi3, phi2, phi1],
        strengths: vec![gamma1, gamma1, gamma2, gamma2, gamma1, gamma1],
        gamma_nr: gamma_nr.to_vec(),
        gamma_phi: gamma_phi.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

/// Checks model validity without aborting.
///
/// The effective master equation assumes negligible photon travel time across
/// the device: a warning is emitted when `Gamma_scale * tau_span > 1e-3`,
/// where `Gamma_scale` is each atom's maximal fully-constructive decay rate.
pub fn validate<T: Scalar>(layout: &DeviceLayout<T>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let threshold = r::<T>(1e-3);
    let tau_cyc = r::<T>(std::f64::consts::TAU);
    for atom in layout.atoms() {
        let tau_min = atom
            .points()
            .iter()
            .map(|p| p.delay)
            .fold(T::max_value().unwrap(), crate::tmin);
        let tau_max = atom
            .points()
            .iter()
            .map(|p| p.delay)
            .fold(T::zero(), crate::tmax);
        let span = tau_max - tau_min;
        // Strongest point strength, in cyclic units (matches how rates are
        // quoted; a MHz-rate, ps-delay device sits far below threshold).
        let scale = atom
            .points()
            .iter()
            .map(|p| p.gamma_ref)
            .fold(T::zero(), crate::tmax)
            / tau_cyc;
        if scale * span > threshold {
            out.push(Diagnostic {
                severity: Severity::Warning,
                message: format!(
                    "atom {:?}: Gamma*tau_span = {:?} exceeds the negligible-travel-time \
                     validity threshold 1e-3",
                    atom.id(),
                    scale * span
                ),
            });
        }
    }
    out
}

/// JSON device configuration. All rates are cyclic (`value = rate / 2 pi`, Hz).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub omega_ref_hz: f64,
    pub atoms: Vec<AtomConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomConfig {
    pub id: String,
    pub gamma_nr_hz: f64,
    #[serde(default)]
    pub gamma_phi_hz: f64,
    pub points: Vec<PointConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointConfig {
    pub delay_s: f64,
    pub gamma_ref_hz: f64,
}

impl DeviceConfig {
    pub fn to_layout<T: Scalar>(&self) -> Result<DeviceLayout<T>> {
        let tau = r::<T>(std::f64::consts::TAU);
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let points = a
                    .points
                    .iter()
                    .map(|p| CouplingPoint::new(r(p.delay_s), tau * r(p.gamma_ref_hz)))
                    .collect::<Result<Vec<_>>>()?;
                GiantAtom::new(
                    a.id.clone(),
                    points,
                    tau * r(a.gamma_nr_hz),
                    tau * r(a.gamma_phi_hz),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        DeviceLayout::new(atoms, tau * r(self.omega_ref_hz))
    }

    pub fn from_layout<T: Scalar>(layout: &DeviceLayout<T>) -> Self {
        let tau = std::f64::consts::TAU;
        let f = |x: T| num_traits::ToPrimitive::to_f64(&x).expect("scalar convertible to f64");
        DeviceConfig {
            omega_ref_hz: f(layout.omega_ref()) / tau,
            atoms: layout
                .atoms()
                .iter()
                .map(|a| AtomConfig {
                    id: a.id().to_string(),
                    gamma_nr_hz: f(a.gamma_nr()) / tau,
                    gamma_phi_hz: f(a.gamma_phi()) / tau,
                    points: a
                        .points()
                        .iter()
                        .map(|p| PointConfig {
                            delay_s: f(p.delay()),
                            gamma_ref_hz: f(p.gamma_ref()) / tau,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}
