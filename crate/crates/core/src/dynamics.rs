//! Lindblad master equation for a register of giant atoms and its
//! matrix-exponential propagation.
//!
//! The generator combines a rotating-frame Hamiltonian (detunings plus
//! exchange couplings), individual decay, collective decay between atom
//! pairs, and optional pure dephasing. Schedules in this crate are piecewise
//! constant, so each segment is propagated exactly with a scaling-and-squaring
//! matrix exponential.

use nalgebra::DMatrix;

use crate::device::DeviceLayout;
use crate::linalg::{
    dagger, embed, hermitize, identity, pauli_z, sandwich, sigma_minus, spost, spre, unvectorize,
    vectorize, CMat,
};
use crate::{r, spectra, C, Error, Result, Scalar};

/// Maximum number of atoms for dense superoperator propagation
/// (4^5 = 1024-dimensional generator).
pub const MAX_ATOMS: usize = 5;

fn herm_tol<T: Scalar>() -> T {
    let eps = T::default_epsilon() * r::<T>(100.0);
    if eps > r::<T>(1e-12) {
        eps
    } else {
        r(1e-12)
    }
}

fn trace_tol<T: Scalar>() -> T {
    let eps = T::default_epsilon() * r::<T>(1e4);
    if eps > r::<T>(1e-9) {
        eps
    } else {
        r(1e-9)
    }
}

/// A 2^N-dimensional complex Hermitian unit-trace PSD state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Scalar> {
    matrix: CMat<T>,
}

impl<T: Scalar> DensityMatrix<T> {
    /// Validates Hermiticity, unit trace, and positivity before wrapping.
    pub fn new(matrix: CMat<T>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || matrix.ncols() != dim || !dim.is_power_of_two() {
            return Err(Error::validation(
                "density matrix must be square with power-of-two dimension",
            ));
        }
        let scale = matrix
            .iter()
            .fold(T::one(), |acc, z| crate::tmax(acc, (z.re * z.re + z.im * z.im).sqrt()));
        let herm_defect = (&matrix - matrix.adjoint()).norm();
        if herm_defect > herm_tol::<T>() * scale * r(10.0) {
            return Err(Error::validation(format!(
                "density matrix not Hermitian (defect {herm_defect:?})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - T::one()).abs() > trace_tol() || tr.im.abs() > trace_tol() {
            return Err(Error::validation(format!(
                "density matrix trace must be 1, got {tr:?}"
            )));
        }
        let herm = hermitize(&matrix);
        let (vals, _) = crate::linalg::eigh(&herm);
        if vals.iter().any(|&v| v < -trace_tol::<T>()) {
            return Err(Error::validation(format!(
                "density matrix has negative eigenvalue {:?}",
                vals[0]
            )));
        }
        Ok(DensityMatrix { matrix: herm })
    }

    /// All qubits in the ground state.
    pub fn ground(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut m = CMat::zeros(dim, dim);
        m[(0, 0)] = C::new(T::one(), T::zero());
        DensityMatrix { matrix: m }
    }

    /// Pure state from a normalized state vector.
    pub fn pure(state: &nalgebra::DVector<C<T>>) -> Result<Self> {
        let norm = state.norm();
        if (norm - T::one()).abs() > trace_tol() {
            return Err(Error::validation("state vector must be normalized"));
        }
        let m = state * state.adjoint();
        Ok(DensityMatrix { matrix: m })
    }

    /// Maximally mixed state.
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let w = T::one() / r::<T>(dim as f64);
        DensityMatrix {
            matrix: CMat::identity(dim, dim) * C::new(w, T::zero()),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &CMat<T> {
        &self.matrix
    }

    /// Real expectation value of a Hermitian operator.
    pub fn expectation(&self, op: &CMat<T>) -> T {
        (op * &self.matrix).trace().re
    }

    /// Excited-state population of one qubit.
    pub fn population(&self, qubit: usize) -> T {
        let n = self.n_qubits();
        let proj = embed(
            &(dagger(&sigma_minus::<T>()) * sigma_minus::<T>()),
            qubit,
            n,
        );
        self.expectation(&proj)
    }

    pub fn purity(&self) -> T {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn min_eigenvalue(&self) -> T {
        let (vals, _) = crate::linalg::eigh(&self.matrix);
        vals[0]
    }
}

/// Dense superoperator generator `d rho / dt = L rho` on vectorized states.
#[derive(Debug, Clone)]
pub struct Liouvillian<T: Scalar> {
    matrix: CMat<T>,
    dim: usize,
    /// Atom frequencies this generator was built for (rad/s), when known.
    pub frequencies: Vec<T>,
}

impl<T: Scalar> Liouvillian<T> {
    pub fn matrix(&self) -> &CMat<T> {
        &self.matrix
    }

    /// Hilbert-space dimension (the superoperator is `dim^2 x dim^2`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Norm of `L^T vec(I)`; zero for a trace-preserving generator.
    pub fn trace_preservation_defect(&self) -> T {
        let id = vectorize(&identity::<T>(self.dim));
        (self.matrix.transpose() * id).norm()
    }
}

/// Rotating-frame Hamiltonian: detunings `(omega_j - omega_rot)/2` on the
/// physical sigma_z of each atom plus excitation-conserving exchange terms.
pub fn build_hamiltonian<T: Scalar>(
    frequencies: &[T],
    g_matrix: &DMatrix<T>,
    rotating_frame_omega: T,
) -> Result<CMat<T>> {
    let n = frequencies.len();
    if n == 0 || n > MAX_ATOMS {
        return Err(Error::domain(format!(
            "atom count must be in 1..={MAX_ATOMS}, got {n}"
        )));
    }
    if g_matrix.nrows() != n || g_matrix.ncols() != n {
        return Err(Error::domain("g_matrix must be N x N"));
    }
    let scale = g_matrix
        .iter()
        .fold(T::one(), |acc, &v| if v.abs() > acc { v.abs() } else { acc });
    for j in 0..n {
        if g_matrix[(j, j)].abs() > herm_tol::<T>() * scale {
            return Err(Error::domain("g_matrix must have zero diagonal"));
        }
        for k in 0..n {
            if (g_matrix[(j, k)] - g_matrix[(k, j)]).abs() > herm_tol::<T>() * scale {
                return Err(Error::domain("g_matrix must be symmetric"));
            }
        }
    }

    let dim = 1 << n;
    let mut h = CMat::zeros(dim, dim);
    // Physical sigma_z = |1><1| - |0><0| = -pauli_z (quantum-information Z).
    let sz_phys = -pauli_z::<T>();
    for (j, &w) in frequencies.iter().enumerate() {
        let delta = w - rotating_frame_omega;
        h += embed(&sz_phys, j, n) * C::new(delta * r(0.5), T::zero());
    }
    let sm = sigma_minus::<T>();
    let sp = dagger(&sm);
    for j in 0..n {
        for k in (j + 1)..n {
            let ex = embed(&sp, j, n) * embed(&sm, k, n) + embed(&sm, j, n) * embed(&sp, k, n);
            h += ex * C::new(g_matrix[(j, k)], T::zero());
        }
    }
    Ok(h)
}

fn lindblad_term<T: Scalar>(op: &CMat<T>) -> CMat<T> {
    let opdop = dagger(op) * op;
    sandwich(op) - (spre(&opdop) + spost(&opdop)) * C::new(r(0.5), T::zero())
}

/// Cross dissipator `A rho B^dag - (1/2){B^dag A, rho}` as a superoperator.
fn cross_term<T: Scalar>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    let bda = dagger(b) * a;
    b.conjugate().kronecker(a) - (spre(&bda) + spost(&bda)) * C::new(r(0.5), T::zero())
}

/// Assembles the full generator from a Hamiltonian and the decay rates.
///
/// `gammas` are total per-atom decay rates, `gamma_coll` the symmetric
/// pairwise collective rates, `gamma_phi` per-atom pure dephasing rates. The
/// decay matrix (diag `gammas`, off-diag `gamma_coll`) must be PSD within
/// tolerance or the generator is rejected as unphysical.
pub fn build_liouvillian<T: Scalar>(
    h: &CMat<T>,
    gammas: &[T],
    gamma_coll: &DMatrix<T>,
    gamma_phi: &[T],
) -> Result<Liouvillian<T>> {
    let n = gammas.len();
    let dim = h.nrows();
    if dim != (1 << n) {
        return Err(Error::domain(
            "Hamiltonian dimension does not match atom count",
        ));
    }
    if n > MAX_ATOMS {
        return Err(Error::domain(format!(
            "atom count must be <= {MAX_ATOMS} for dense propagation"
        )));
    }
    if gamma_coll.nrows() != n || gamma_coll.ncols() != n || gamma_phi.len() != n {
        return Err(Error::domain("rate containers must all be N-sized"));
    }
    if gammas.iter().any(|&g| g < T::zero()) || gamma_phi.iter().any(|&g| g < T::zero()) {
        return Err(Error::domain("decay and dephasing rates must be >= 0"));
    }

    let mut decay = gamma_coll.clone();
    for j in 0..n {
        decay[(j, j)] = gammas[j];
    }
    let scale = decay
        .iter()
        .fold(T::one(), |acc, &v| if v.abs() > acc { v.abs() } else { acc });
    let eig = nalgebra::SymmetricEigen::new(decay);
    let min_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(T::max_value().unwrap(), crate::tmin);
    if min_eig < -r::<T>(1e-9) * scale {
        return Err(Error::numerical(format!(
            "unphysical generator: decay matrix has eigenvalue {min_eig:?}"
        )));
    }

    let mut l = (spre(h) - spost(h)) * C::new(T::zero(), -T::one());
    let sm = sigma_minus::<T>();
    for j in 0..n {
        let op = embed(&sm, j, n);
        l += lindblad_term(&op) * C::new(gammas[j], T::zero());
        if gamma_phi[j] > T::zero() {
            let z = embed(&pauli_z::<T>(), j, n);
            l += lindblad_term(&z) * C::new(gamma_phi[j] * r(0.5), T::zero());
        }
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let rate = gamma_coll[(j, k)];
            if rate != T::zero() {
                let oj = embed(&sm, j, n);
                let ok = embed(&sm, k, n);
                l += (cross_term(&oj, &ok) + cross_term(&ok, &oj)) * C::new(rate, T::zero());
            }
        }
    }
    Ok(Liouvillian {
        matrix: l,
        dim,
        frequencies: Vec::new(),
    })
}

/// Applies `exp(L dt)` to the state. The result is re-Hermitized; trace drift
/// beyond 1e-6 is reported as an integrator failure.
pub fn propagate<T: Scalar>(
    rho: &DensityMatrix<T>,
    l: &Liouvillian<T>,
    dt: T,
) -> Result<DensityMatrix<T>> {
    if dt < T::zero() {
        return Err(Error::domain("dt must be >= 0"));
    }
    if rho.dim() != l.dim {
        return Err(Error::domain("state and generator dimensions differ"));
    }
    let p = (l.matrix.clone() * C::new(dt, T::zero())).exp();
    let v = p * vectorize(rho.matrix());
    let out = unvectorize(&v, l.dim);
    let tr = out.trace();
    let drift = ((tr.re - T::one()) * (tr.re - T::one()) + tr.im * tr.im).sqrt();
    if drift > r(1e-6) {
        return Err(Error::numerical(format!(
            "trace drifted by {drift:?} during propagation"
        )));
    }
    DensityMatrix::new(hermitize(&out))
}

/// Per-atom and pairwise rates of a layout when the atoms sit at the given
/// frequencies: self rates at each atom's own frequency, cross terms at the
/// arithmetic mean of the pair. Collective rates are clamped to the
/// Cauchy-Schwarz bound `sqrt(rad_j rad_k)` so the decay matrix stays PSD
/// when the atoms are detuned.
pub fn rates_at<T: Scalar>(
    layout: &DeviceLayout<T>,
    frequencies: &[T],
) -> Result<(Vec<T>, DMatrix<T>, DMatrix<T>)> {
    let n = layout.atoms().len();
    if frequencies.len() != n {
        return Err(Error::domain("one frequency per atom required"));
    }
    let mut gammas = Vec::with_capacity(n);
    let mut rad = Vec::with_capacity(n);
    for j in 0..n {
        let r_j = spectra::gamma_radiative(layout, j, frequencies[j])?;
        rad.push(r_j);
        gammas.push(r_j + layout.atom(j).gamma_nr());
    }
    let mut g = DMatrix::zeros(n, n);
    let mut coll = DMatrix::zeros(n, n);
    let half = r::<T>(0.5);
    for j in 0..n {
        for k in (j + 1)..n {
            let mean = (frequencies[j] + frequencies[k]) * half;
            let gv = spectra::g_general(layout, j, k, mean)?;
            let mut cv = spectra::gamma_coll_general(layout, j, k, mean)?;
            let bound = (rad[j] * rad[k]).sqrt();
            if cv.abs() > bound {
                cv = if cv >= T::zero() { bound } else { -bound };
            }
            g[(j, k)] = gv;
            g[(k, j)] = gv;
            coll[(j, k)] = cv;
            coll[(k, j)] = cv;
        }
    }
    Ok((gammas, g, coll))
}

/// Builds the generator for the layout with atoms parked at `frequencies`,
/// in the frame rotating at `rotating_frame_omega`.
pub fn liouvillian_at<T: Scalar>(
    layout: &DeviceLayout<T>,
    frequencies: &[T],
    rotating_frame_omega: T,
) -> Result<Liouvillian<T>> {
    let (gammas, g, coll) = rates_at(layout, frequencies)?;
    let gamma_phi: Vec<T> = layout.atoms().iter().map(|a| a.gamma_phi()).collect();
    let h = build_hamiltonian(frequencies, &g, rotating_frame_omega)?;
    let mut l = build_liouvillian(&h, &gammas, &coll, &gamma_phi)?;
    l.frequencies = frequencies.to_vec();
    Ok(l)
}

/// Simulated relaxation experiment at one qubit frequency.
#[derive(Debug, Clone)]
pub struct T1Result<T> {
    pub times: Vec<T>,
    pub populations: Vec<T>,
    /// Fitted decay rate (rad/s).
    pub gamma_fit: T,
    /// `1 / gamma_fit`; infinite when the rate is below resolution.
    pub t1: T,
    /// False when the trace was not a clean monotone exponential.
    pub fit_ok: bool,
}

/// Excites one atom (the others assumed far detuned, hence simulated alone),
/// evolves, and fits a single exponential to the population decay.
pub fn t1_experiment<T: Scalar>(
    layout: &DeviceLayout<T>,
    atom_index: usize,
    omega: T,
    t_grid: &[T],
) -> Result<T1Result<T>> {
    if t_grid.is_empty() {
        return Err(Error::domain("time grid must be non-empty"));
    }
    let gamma = spectra::gamma_general(layout, atom_index, omega)?;
    let gamma_phi = layout.atom(atom_index).gamma_phi();
    let h = build_hamiltonian(&[omega], &DMatrix::zeros(1, 1), omega)?;
    let l = build_liouvillian(&h, &[gamma], &DMatrix::zeros(1, 1), &[gamma_phi])?;

    let excited = {
        let mut m = CMat::<T>::zeros(2, 2);
        m[(1, 1)] = C::new(T::one(), T::zero());
        DensityMatrix { matrix: m }
    };
    let mut rho = excited;
    let mut prev_t = T::zero();
    let mut populations = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if t < prev_t {
            return Err(Error::domain("time grid must be non-decreasing"));
        }
        rho = propagate(&rho, &l, t - prev_t)?;
        populations.push(rho.population(0));
        prev_t = t;
    }

    // Log-linear least squares on p(t) = p0 exp(-Gamma t).
    let floor = r::<T>(1e-300);
    let pts: Vec<(T, T)> = t_grid
        .iter()
        .zip(&populations)
        .filter(|(_, &p)| p > floor)
        .map(|(&t, &p)| (t, p.ln()))
        .collect();
    let (gamma_fit, fit_ok) = if pts.len() < 2 {
        (T::zero(), false)
    } else {
        let n = r::<T>(pts.len() as f64);
        let sx: T = pts.iter().map(|p| p.0).sum();
        let sy: T = pts.iter().map(|p| p.1).sum();
        let sxx: T = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: T = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom == T::zero() {
            (T::zero(), false)
        } else {
            let slope = (n * sxy - sx * sy) / denom;
            let monotone = populations
                .windows(2)
                .all(|w| w[1] <= w[0] + trace_tol::<T>());
            (-slope, monotone)
        }
    };
    let span = *t_grid.last().unwrap();
    let resolution = if span > T::zero() {
        r::<T>(1e-9) / span
    } else {
        T::zero()
    };
    let t1 = if gamma_fit > resolution {
        T::one() / gamma_fit
    } else {
        T::max_value().unwrap()
    };
    Ok(T1Result {
        times: t_grid.to_vec(),
        populations,
        gamma_fit,
        t1,
        fit_ok,
    })
}

/// Population map of a swap-chevron experiment.
#[derive(Debug, Clone)]
pub struct ChevronMap<T> {
    pub deltas: Vec<T>,
    pub times: Vec<T>,
    /// `population[i][k]`: excited-state population of the initially excited
    /// atom at detuning `deltas[i]` and time `times[k]`.
    pub population: Vec<Vec<T>>,
}

/// Two-atom exchange chevron: atom 0 is parked at `omega_df + delta`, atom 1
/// at `omega_df`, atom 0 starts excited.
pub fn chevron_experiment<T: Scalar>(
    layout: &DeviceLayout<T>,
    omega_df: T,
    delta_grid: &[T],
    t_grid: &[T],
) -> Result<ChevronMap<T>> {
    if layout.atoms().len() != 2 {
        return Err(Error::domain("chevron experiment needs exactly 2 atoms"));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("time grid must be non-decreasing"));
    }
    use rayon::prelude::*;
    let population: Vec<Vec<T>> = delta_grid
        .par_iter()
        .map(|&delta| -> Result<Vec<T>> {
            let freqs = [omega_df + delta, omega_df];
            let l = liouvillian_at(layout, &freqs, omega_df)?;
            let mut rho = excited_state::<T>(2, 0);
            let mut prev = T::zero();
            let mut col = Vec::with_capacity(t_grid.len());
            for &t in t_grid {
                rho = propagate(&rho, &l, t - prev)?;
                col.push(rho.population(0));
                prev = t;
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChevronMap {
        deltas: delta_grid.to_vec(),
        times: t_grid.to_vec(),
        population,
    })
}

/// Product state with a single atom excited.
pub fn excited_state<T: Scalar>(n_qubits: usize, which: usize) -> DensityMatrix<T> {
    let dim = 1 << n_qubits;
    let idx = 1 << (n_qubits - 1 - which);
    let mut m = CMat::zeros(dim, dim);
    m[(idx, idx)] = C::new(T::one(), T::zero());
    DensityMatrix { matrix: m }
}

/// Eigenfrequencies of the hybridized single-excitation doublet:
/// `omega_pm = (omega_a + omega_b)/2 +/- sqrt(Delta^2/4 + g^2)`.
pub fn avoided_crossing_branches<T: Scalar>(omega_a: T, omega_b: T, g: T) -> (T, T) {
    let half = r::<T>(0.5);
    let mean = (omega_a + omega_b) * half;
    let delta = omega_a - omega_b;
    let split = (delta * delta * r::<T>(0.25) + g * g).sqrt();
    (mean + split, mean - split)
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
    fn ground_state_is_stationary() {
        let layout = df_layout();
        let w0 = layout.omega_ref();
        let l = liouvillian_at(&layout, &[w0, w0], w0).unwrap();
        let rho = propagate(&DensityMatrix::ground(2), &l, 1e-6).unwrap();
        assert_relative_eq!(rho.population(0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(rho.population(1), 0.0, epsilon = 1e-12);
        assert_relative_eq!(rho.purity(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn single_atom_decays_exponentially() {
        let layout = df_layout();
        // Park away from the decoupling point so the radiative rate is finite.
        let w = TAU * 4.2e9;
        let gamma = crate::spectra::gamma_general(&layout, 0, w).unwrap();
        let h = build_hamiltonian(&[w], &DMatrix::zeros(1, 1), w).unwrap();
        let l = build_liouvillian(&h, &[gamma], &DMatrix::zeros(1, 1), &[0.0]).unwrap();
        let rho0 = excited_state::<f64>(1, 0);
        for &t in &[50e-9, 300e-9, 1e-6] {
            let rho = propagate(&rho0, &l, t).unwrap();
            assert_relative_eq!(rho.population(0), (-gamma * t).exp(), max_relative = 1e-9);
        }
    }

    #[test]
    fn t1_fit_recovers_the_decay_rate() {
        let layout = df_layout();
        let w = TAU * 4.3e9;
        let gamma = crate::spectra::gamma_general(&layout, 0, w).unwrap();
        let t_grid: Vec<f64> = (1..=40).map(|i| i as f64 * 2.0 / gamma / 40.0).collect();
        let res = t1_experiment(&layout, 0, w, &t_grid).unwrap();
        assert!(res.fit_ok);
        assert_relative_eq!(res.gamma_fit, gamma, max_relative = 1e-6);
        assert_relative_eq!(res.t1, 1.0 / gamma, max_relative = 1e-6);
    }

    #[test]
    fn liouvillian_preserves_trace() {
        let layout = df_layout();
        let w0 = layout.omega_ref();
        let l = liouvillian_at(&layout, &[TAU * 4.3e9, w0], w0).unwrap();
        assert!(l.trace_preservation_defect() < 1e-6 * TAU * 2e6);
    }

    #[test]
    fn hamiltonian_rejects_bad_coupling_matrices() {
        let mut g = DMatrix::zeros(2, 2);
        g[(0, 1)] = 1.0;
        assert!(build_hamiltonian(&[1.0, 1.0], &g, 1.0).is_err()); // asymmetric
        let mut g = DMatrix::zeros(2, 2);
        g[(0, 0)] = 1.0;
        assert!(build_hamiltonian(&[1.0, 1.0], &g, 1.0).is_err()); // diagonal
        assert!(build_hamiltonian(&[1.0; 6], &DMatrix::zeros(6, 6), 1.0).is_err());
    }

    #[test]
    fn liouvillian_rejects_unphysical_decay_matrix() {
        let h = CMat::<f64>::zeros(4, 4);
        let mut coll = DMatrix::zeros(2, 2);
        coll[(0, 1)] = 3.0;
        coll[(1, 0)] = 3.0;
        // Collective rate far above sqrt(gamma_1 gamma_2): not PSD.
        let err = build_liouvillian(&h, &[1.0, 1.0], &coll, &[0.0, 0.0]);
        assert!(matches!(err, Err(crate::Error::Numerical(_))));
    }

    #[test]
    fn resonant_swap_follows_sine_squared() {
        let layout = df_layout();
        let w0 = layout.omega_ref();
        // Both atoms at the decoupling point: coherent exchange at g with no
        // decay, so the transfer is exactly sin^2(g t).
        let g = crate::spectra::g_general(&layout, 0, 1, w0).unwrap();
        let l = liouvillian_at(&layout, &[w0, w0], w0).unwrap();
        let rho0 = excited_state::<f64>(2, 0);
        for k in 1..=8 {
            let t = k as f64 * 30e-9;
            let rho = propagate(&rho0, &l, t).unwrap();
            assert_relative_eq!(rho.population(1), (g * t).sin().powi(2), epsilon = 1e-6);
        }
    }

    #[test]
    fn chevron_detuning_caps_the_transfer() {
        let layout = df_layout();
        let w0 = layout.omega_ref();
        let g = crate::spectra::g_general(&layout, 0, 1, w0).unwrap();
        let deltas = [0.0, 2.0 * g, 5.0 * g];
        let times: Vec<f64> = (0..240).map(|i| i as f64 * 2e-9).collect();
        let map = chevron_experiment(&layout, w0, &deltas, &times).unwrap();
        for (i, &delta) in deltas.iter().enumerate() {
            let min_p0 = map.population[i]
                .iter()
                .fold(f64::MAX, |a, &b| a.min(b));
            let transfer = 1.0 - min_p0;
            let cap = g * g / (g * g + delta * delta / 4.0);
            assert!(
                (transfer - cap).abs() < 2e-3,
                "delta={delta}: transfer {transfer} vs cap {cap}"
            );
        }
    }

    #[test]
    fn avoided_crossing_splits_by_2g_on_resonance() {
        let (hi, lo) = avoided_crossing_branches(5.0, 5.0, 0.25);
        assert_relative_eq!(hi - lo, 0.5);
        let (hi, lo) = avoided_crossing_branches(6.0, 5.0, 0.0);
        assert_relative_eq!(hi, 6.0);
        assert_relative_eq!(lo, 5.0);
    }

    #[test]
    fn density_matrix_validation_rejects_bad_inputs() {
        let mut m = CMat::<f64>::zeros(2, 2);
        m[(0, 0)] = crate::C::new(0.5, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_err()); // trace 1/2
        m[(1, 1)] = crate::C::new(0.5, 0.0);
        m[(0, 1)] = crate::C::new(0.0, 0.9);
        m[(1, 0)] = crate::C::new(0.0, 0.9);
        assert!(DensityMatrix::new(m).is_err()); // not Hermitian
        let mut m = CMat::<f64>::zeros(2, 2);
        m[(0, 0)] = crate::C::new(1.5, 0.0);
        m[(1, 1)] = crate::C::new(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err()); // negative eigenvalue
    }

    #[test]
    fn dephasing_damps_coherence_at_gamma_phi() {
        let gamma_phi = 1.0e6;
        let h = CMat::<f64>::zeros(2, 2);
        let l = build_liouvillian(&h, &[0.0], &DMatrix::zeros(1, 1), &[gamma_phi]).unwrap();
        let mut m = CMat::<f64>::zeros(2, 2);
        m[(0, 0)] = crate::C::new(0.5, 0.0);
        m[(1, 1)] = crate::C::new(0.5, 0.0);
        m[(0, 1)] = crate::C::new(0.5, 0.0);
        m[(1, 0)] = crate::C::new(0.5, 0.0);
        let rho0 = DensityMatrix::new(m).unwrap();
        let t = 0.4e-6;
        let rho = propagate(&rho0, &l, t).unwrap();
        // (gamma_phi/2) D[sigma_z] damps off-diagonals at exp(-gamma_phi t),
        // so gamma_phi maps to 1/T2* - 1/(2 T1).
        assert_relative_eq!(
            rho.matrix()[(0, 1)].re,
            0.5 * (-gamma_phi * t).exp(),
            max_relative = 1e-9
        );
    }
}
