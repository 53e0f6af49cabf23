//! Relaxation, exchange, and collective-decay spectra.
//!
//! Everything here derives from the same interference sums over pairs of
//! coupling points: the per-atom relaxation rate is
//! `Gamma_j = sum_nm sqrt(gamma_n gamma_m) cos(phi_nm)`, the exchange coupling
//! `g_jk = sum_nm sqrt(gamma_n gamma_m)/2 sin(phi_nm)`, and the collective
//! decay uses the cosine sum across two atoms. The closed forms for the
//! braided two- and three-point devices are provided alongside the general
//! sums so each can check the other.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::device::{coupling_rate, phase_between, DeviceLayout};
use crate::{r, Error, Result, Scalar};

fn check_pair<T: Scalar>(layout: &DeviceLayout<T>, j: usize, k: usize) -> Result<()> {
    if j == k {
        return Err(Error::domain(format!(
            "cross-atom rate needs two distinct atoms, got index {j} twice"
        )));
    }
    let n = layout.atoms().len();
    if j >= n || k >= n {
        return Err(Error::domain(format!(
            "atom index out of range ({j}, {k} vs {n} atoms)"
        )));
    }
    Ok(())
}

/// Radiative part of the relaxation rate of one atom at `omega` (no
/// `gamma_nr`). Always non-negative: the double cosine sum equals
/// `|sum_n sqrt(gamma_n) e^{i omega tau_n}|^2`.
pub fn gamma_radiative<T: Scalar>(
    layout: &DeviceLayout<T>,
    atom_index: usize,
    omega: T,
) -> Result<T> {
    let atom = layout.atom(atom_index);
    let pts = atom.points();
    let mut acc = T::zero();
    for n in pts {
        for m in pts {
            let gn = coupling_rate(n, omega, layout.omega_ref())?;
            let gm = coupling_rate(m, omega, layout.omega_ref())?;
            let phi = phase_between(n, m, omega)?;
            acc += (gn * gm).sqrt() * phi.cos();
        }
    }
    // The sum is a perfect square; cancellation at a decoherence-free point
    // can leave a rounding-level negative, which downstream physicality
    // checks would reject.
    Ok(crate::tmax(acc, T::zero()))
}

/// Total relaxation rate `Gamma_j` of one atom at its own frequency `omega`,
/// including the non-radiative contribution.
pub fn gamma_general<T: Scalar>(
    layout: &DeviceLayout<T>,
    atom_index: usize,
    omega: T,
) -> Result<T> {
    Ok(gamma_radiative(layout, atom_index, omega)? + layout.atom(atom_index).gamma_nr())
}

/// Waveguide-mediated exchange coupling `g_{j,k}` at `omega`. Signed.
pub fn g_general<T: Scalar>(
    layout: &DeviceLayout<T>,
    atom_j: usize,
    atom_k: usize,
    omega: T,
) -> Result<T> {
    check_pair(layout, atom_j, atom_k)?;
    let half = r::<T>(0.5);
    let mut acc = T::zero();
    for n in layout.atom(atom_j).points() {
        for m in layout.atom(atom_k).points() {
            let gn = coupling_rate(n, omega, layout.omega_ref())?;
            let gm = coupling_rate(m, omega, layout.omega_ref())?;
            let phi = phase_between(n, m, omega)?;
            acc += half * (gn * gm).sqrt() * phi.sin();
        }
    }
    Ok(acc)
}

/// Collective decay rate `Gamma_coll,{j,k}` at `omega`. May be negative; its
/// magnitude is bounded by `sqrt(Gamma_rad,j Gamma_rad,k)`.
pub fn gamma_coll_general<T: Scalar>(
    layout: &DeviceLayout<T>,
    atom_j: usize,
    atom_k: usize,
    omega: T,
) -> Result<T> {
    check_pair(layout, atom_j, atom_k)?;
    let mut acc = T::zero();
    for n in layout.atom(atom_j).points() {
        for m in layout.atom(atom_k).points() {
            let gn = coupling_rate(n, omega, layout.omega_ref())?;
            let gm = coupling_rate(m, omega, layout.omega_ref())?;
            let phi = phase_between(n, m, omega)?;
            acc += (gn * gm).sqrt() * phi.cos();
        }
    }
    Ok(acc)
}

/// Closed form for the two-point braided device:
/// `Gamma_1 = 2 gamma [1 + cos(2 phi)] + gamma_nr`.
pub fn two_point_gamma<T: Scalar>(gamma: T, phi: T, gamma_nr: T) -> T {
    r::<T>(2.0) * gamma * (T::one() + (r::<T>(2.0) * phi).cos()) + gamma_nr
}

/// Closed form for the two-point braided device:
/// `g = (gamma / 2) [3 sin(phi) + sin(3 phi)]`.
pub fn two_point_g<T: Scalar>(gamma: T, phi: T) -> T {
    r::<T>(0.5) * gamma * (r::<T>(3.0) * phi.sin() + (r::<T>(3.0) * phi).sin())
}

/// Closed form for the three-point braided device relaxation rate.
pub fn three_point_gamma<T: Scalar>(
    gamma1: T,
    gamma2: T,
    phi1: T,
    phi2: T,
    phi3: T,
    gamma_nr: T,
) -> T {
    let two = r::<T>(2.0);
    gamma2
        + two * gamma1 * (T::one() + (phi1 + two * phi2 + phi3).cos())
        + two * (gamma1 * gamma2).sqrt() * ((phi1 + phi2).cos() + (phi2 + phi3).cos())
        + gamma_nr
}

/// Closed form for the three-point braided device exchange coupling.
pub fn three_point_g<T: Scalar>(gamma1: T, gamma2: T, phi1: T, phi2: T, phi3: T) -> T {
    let two = r::<T>(2.0);
    let half = r::<T>(0.5);
    (gamma1 * gamma2).sqrt() * (phi2.sin() + (phi1 + phi2 + phi3).sin())
        + half
            * gamma1
            * (two * phi1.sin() + (two * phi2 + phi3).sin() + (two * phi1 + two * phi2 + phi3).sin())
        + half * gamma2 * phi3.sin()
}

/// Folds a parasitic exchange offset into a model prediction: the observed
/// coupling floors at `|g_p|` instead of passing through zero.
pub fn apply_parasitic<T: Scalar>(g: T, g_p: T) -> T {
    let mag = (g * g + g_p * g_p).sqrt();
    if g < T::zero() {
        -mag
    } else {
        mag
    }
}

/// Per-frequency spectrum values for every atom and atom pair of a layout.
#[derive(Debug, Clone)]
pub struct SpectrumSample<T> {
    pub omega: T,
    /// Total per-atom relaxation rates (including `gamma_nr`).
    pub gamma: Vec<T>,
    /// Pairwise exchange couplings, symmetric with zero diagonal.
    pub g: DMatrix<T>,
    /// Pairwise collective decay rates, symmetric with zero diagonal.
    pub gamma_coll: DMatrix<T>,
}

impl<T: Scalar> SpectrumSample<T> {
    /// Minimum eigenvalue of the radiative decay matrix (radiative rates on
    /// the diagonal, collective rates off it). Physical samples are PSD.
    pub fn decay_matrix_min_eig(&self, layout: &DeviceLayout<T>) -> T {
        let n = self.gamma.len();
        let mut m = self.gamma_coll.clone();
        for j in 0..n {
            m[(j, j)] = self.gamma[j] - layout.atom(j).gamma_nr();
        }
        let eig = nalgebra::SymmetricEigen::new(m);
        eig.eigenvalues
            .iter()
            .copied()
            .fold(T::max_value().unwrap(), crate::tmin)
    }
}

/// Evaluates all rates of the layout at a single frequency.
pub fn sample<T: Scalar>(layout: &DeviceLayout<T>, omega: T) -> Result<SpectrumSample<T>> {
    let n = layout.atoms().len();
    let gamma = (0..n)
        .map(|j| gamma_general(layout, j, omega))
        .collect::<Result<Vec<_>>>()?;
    let mut g = DMatrix::zeros(n, n);
    let mut gamma_coll = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in (j + 1)..n {
            let gv = g_general(layout, j, k, omega)?;
            let cv = gamma_coll_general(layout, j, k, omega)?;
            g[(j, k)] = gv;
            g[(k, j)] = gv;
            gamma_coll[(j, k)] = cv;
            gamma_coll[(k, j)] = cv;
        }
    }
    Ok(SpectrumSample {
        omega,
        gamma,
        g,
        gamma_coll,
    })
}

/// Evaluates the spectrum on a frequency grid. The grid must be sorted and
/// positive; samples come back in grid order regardless of scheduling.
pub fn sweep<T: Scalar>(layout: &DeviceLayout<T>, omega_grid: &[T]) -> Result<Vec<SpectrumSample<T>>> {
    if omega_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("frequency grid must be strictly increasing"));
    }
    omega_grid
        .par_iter()
        .map(|&w| sample(layout, w))
        .collect()
}

/// A frequency at which an atom decouples from the waveguide.
#[derive(Debug, Clone)]
pub struct DfFrequency<T> {
    pub omega: T,
    pub atom: String,
    /// Radiative rate left at the refined minimum (rad/s).
    pub residual: T,
}

/// Locates the decoherence-free frequencies of one atom inside a band.
///
/// The radiative rate is a perfect square, so it touches zero without a sign
/// change; the search finds grid-local minima and refines each by
/// golden-section minimization, keeping minima whose residual is within `tol`.
pub fn find_df_frequencies<T: Scalar>(
    layout: &DeviceLayout<T>,
    atom_index: usize,
    band: (T, T),
    tol: T,
) -> Result<Vec<DfFrequency<T>>> {
    let (lo, hi) = band;
    if !(lo > T::zero()) || !(hi > lo) {
        return Err(Error::domain("band must satisfy 0 < lo < hi"));
    }
    if !(tol > T::zero()) {
        return Err(Error::domain("tol must be > 0"));
    }
    let n_grid = 4001usize;
    let step = (hi - lo) / r::<T>((n_grid - 1) as f64);
    let rate = |w: T| gamma_radiative(layout, atom_index, w);
    let mut values = Vec::with_capacity(n_grid);
    for i in 0..n_grid {
        let w = lo + step * r::<T>(i as f64);
        values.push(rate(w)?);
    }

    let mut out: Vec<DfFrequency<T>> = Vec::new();
    for i in 1..(n_grid - 1) {
        if values[i] <= values[i - 1] && values[i] <= values[i + 1] {
            let a = lo + step * r::<T>((i - 1) as f64);
            let b = lo + step * r::<T>((i + 1) as f64);
            let (w_min, res) = golden_min(&rate, a, b)?;
            if res <= tol {
                let dup = out
                    .iter()
                    .any(|d| (d.omega - w_min).abs() <= step * r::<T>(0.5));
                if !dup {
                    out.push(DfFrequency {
                        omega: w_min,
                        atom: layout.atom(atom_index).id().to_string(),
                        residual: res,
                    });
                }
            }
        }
    }
    out.sort_by(|x, y| x.omega.partial_cmp(&y.omega).unwrap());
    Ok(out)
}

fn golden_min<T: Scalar>(
    f: &dyn Fn(T) -> Result<T>,
    mut a: T,
    mut b: T,
) -> Result<(T, T)> {
    let inv_phi = r::<T>(0.618_033_988_749_894_8);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let eps = r::<T>(1e-14);
    while (b - a) > eps * (a.abs() + b.abs()) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d)?;
        }
    }
    let w = (a + b) * r::<T>(0.5);
    Ok((w, f(w)?))
}

/// Two-point braided layout pinned so the decoherence-free point sits at
/// `omega_df`: the gap phase there is `pi/2 + winding * pi`.
pub fn two_point_df_layout<T: Scalar>(
    gamma0: T,
    omega_df: T,
    winding: u32,
    gamma_nr: [T; 2],
    gamma_phi: [T; 2],
) -> Result<crate::device::DeviceLayout<T>> {
    let phi = r::<T>(std::f64::consts::FRAC_PI_2)
        + r::<T>(std::f64::consts::PI) * r::<T>(winding as f64);
    crate::device::braided_two_point(gamma0, phi, omega_df, gamma_nr, gamma_phi)
}

/// Three-point braided layout with gap ratio `phi1 = phi3 = ratio * phi2`,
/// pinned so the upper decoherence-free frequency sits at `omega_df2`.
///
/// With `x = (1 + ratio) phi2`, the radiative rate reduces to the perfect
/// square `(2 sqrt(gamma1) cos x + sqrt(gamma2))^2`, which vanishes when
/// `cos x = -sqrt(gamma2 / gamma1) / 2` (requires `gamma2 <= 4 gamma1`).
/// Of the solution family `2 pi n +/- arccos(.)`, the adjacent pair
/// `(2 pi + A, 4 pi - A)` is the one whose frequency ratio matches the
/// measured pair of decoherence-free points; the upper solution is pinned at
/// `omega_df2`, placing the lower one at `omega_df2 (2 pi + A)/(4 pi - A)`.
pub fn three_point_df2_layout<T: Scalar>(
    gamma1: T,
    gamma2: T,
    ratio: T,
    omega_df2: T,
    gamma_nr: [T; 2],
    gamma_phi: [T; 2],
) -> Result<crate::device::DeviceLayout<T>> {
    if !(gamma1 > T::zero()) || !(gamma2 > T::zero()) {
        return Err(Error::domain("gamma1 and gamma2 must be > 0"));
    }
    let c = -(gamma2 / gamma1).sqrt() * r::<T>(0.5);
    if c < -T::one() {
        return Err(Error::domain(
            "no decoherence-free point exists: gamma2 > 4 gamma1",
        ));
    }
    let a = c.acos();
    let x_upper = r::<T>(4.0 * std::f64::consts::PI) - a;
    let phi2 = x_upper / (T::one() + ratio);
    let phi1 = ratio * phi2;
    crate::device::braided_three_point(
        gamma1, gamma2, phi1, phi2, phi1, omega_df2, gamma_nr, gamma_phi,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::braided_two_point;
    use approx::assert_relative_eq;

    const TAU: f64 = std::f64::consts::TAU;
    const PI: f64 = std::f64::consts::PI;

    fn two_point(phi: f64) -> crate::DeviceLayout64 {
        braided_two_point(TAU * 2e6, phi, TAU * 4.645e9, [0.0, 0.0], [0.0, 0.0]).unwrap()
    }

    fn three_point() -> crate::DeviceLayout64 {
        three_point_df2_layout(
            TAU * 1.58e6,
            TAU * 3.68e6,
            0.505,
            TAU * 5.23e9,
            [0.0, 0.0],
            [0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn closed_forms_match_general_sums_two_point() {
        let layout = two_point(PI / 2.0);
        let w0 = layout.omega_ref();
        for k in 0..50 {
            let w = w0 * (0.7 + 0.012 * k as f64);
            let scale = (w / w0).powi(2);
            let gamma = TAU * 2e6 * scale;
            let phi = (PI / 2.0) * (w / w0);
            assert_relative_eq!(
                gamma_general(&layout, 0, w).unwrap(),
                two_point_gamma(gamma, phi, 0.0),
                max_relative = 1e-12,
                epsilon = 1e-6 * gamma
            );
            assert_relative_eq!(
                g_general(&layout, 0, 1, w).unwrap(),
                two_point_g(gamma, phi),
                max_relative = 1e-12,
                epsilon = 1e-6 * gamma
            );
        }
    }

    #[test]
    fn closed_forms_match_general_sums_three_point() {
        let layout = three_point();
        let w0 = layout.omega_ref();
        let phi2_ref = 6.729_250_303_985_48;
        for k in 0..50 {
            let w = w0 * (0.75 + 0.01 * k as f64);
            let scale = (w / w0).powi(2);
            let g1 = TAU * 1.58e6 * scale;
            let g2 = TAU * 3.68e6 * scale;
            let p2 = phi2_ref * (w / w0);
            let p1 = 0.505 * p2;
            assert_relative_eq!(
                gamma_general(&layout, 0, w).unwrap(),
                three_point_gamma(g1, g2, p1, p2, p1, 0.0),
                max_relative = 1e-10,
                epsilon = 1e-5 * g1
            );
            assert_relative_eq!(
                g_general(&layout, 0, 1, w).unwrap(),
                three_point_g(g1, g2, p1, p2, p1),
                max_relative = 1e-10,
                epsilon = 1e-5 * g1
            );
        }
    }

    #[test]
    fn radiative_rate_is_never_negative() {
        let layout = two_point(1.2345);
        for k in 1..200 {
            let w = TAU * (2.0e9 + 0.03e9 * k as f64);
            assert!(gamma_radiative(&layout, 0, w).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn two_point_decouples_at_quarter_wavelength_phase() {
        let gamma_nr = TAU * 10e3;
        assert_relative_eq!(
            two_point_gamma(TAU * 2e6, PI / 2.0, gamma_nr),
            gamma_nr,
            epsilon = 1e-6
        );
        // At the same phase the exchange coupling equals gamma itself.
        assert_relative_eq!(two_point_g(TAU * 2e6, PI / 2.0), TAU * 2e6, max_relative = 1e-12);
    }

    #[test]
    fn df_search_finds_the_two_point_null() {
        let layout = two_point(PI / 2.0);
        let w0 = layout.omega_ref();
        let found = find_df_frequencies(&layout, 0, (0.9 * w0, 1.1 * w0), 1e-6 * TAU * 2e6).unwrap();
        assert_eq!(found.len(), 1);
        assert_relative_eq!(found[0].omega, w0, max_relative = 1e-7);
        assert!(found[0].residual <= 1e-6 * TAU * 2e6);
    }

    #[test]
    fn three_point_layout_has_both_decoupling_frequencies() {
        let layout = three_point();
        let found = find_df_frequencies(
            &layout,
            0,
            (TAU * 4.0e9, TAU * 5.3e9),
            1e-6 * TAU * 1.58e6,
        )
        .unwrap();
        assert_eq!(found.len(), 2);
        // Frozen from the closed-form null condition with the winding pinned
        // so the upper null sits at 5.23 GHz.
        assert_relative_eq!(found[0].omega / TAU, 4.504_172e9, max_relative = 1e-5);
        assert_relative_eq!(found[1].omega / TAU, 5.23e9, max_relative = 1e-7);
    }

    #[test]
    fn three_point_exchange_crosses_zero_near_4p95_ghz() {
        let layout = three_point();
        // Frozen root of the closed-form g between the decoupling points.
        let w = TAU * 4.935_920_3e9;
        let g = g_general(&layout, 0, 1, w).unwrap();
        assert!(g.abs() / TAU < 1e3, "g/2pi = {} Hz", g / TAU);
    }

    #[test]
    fn three_point_rejects_too_asymmetric_strengths() {
        let err = three_point_df2_layout(
            TAU * 1.0e6,
            TAU * 4.1e6,
            0.505,
            TAU * 5.23e9,
            [0.0, 0.0],
            [0.0, 0.0],
        );
        assert!(err.is_err());
    }

    #[test]
    fn parasitic_offset_floors_the_magnitude() {
        let gp = TAU * 70e3;
        assert_relative_eq!(apply_parasitic(0.0, gp), gp);
        assert!(apply_parasitic(-TAU * 1e3, gp) < 0.0);
        assert!(apply_parasitic(TAU * 1e3, gp).abs() >= gp);
        let big = TAU * 5e6;
        assert_relative_eq!(apply_parasitic(big, gp), (big * big + gp * gp).sqrt());
    }

    #[test]
    fn sweep_requires_increasing_grid_and_preserves_order() {
        let layout = two_point(PI / 2.0);
        assert!(sweep(&layout, &[2.0, 1.0]).is_err());
        let grid: Vec<f64> = (0..32).map(|i| TAU * (4.0e9 + 0.02e9 * i as f64)).collect();
        let samples = sweep(&layout, &grid).unwrap();
        for (s, &w) in samples.iter().zip(&grid) {
            assert_eq!(s.omega, w);
        }
    }

    #[test]
    fn decay_matrix_is_psd_on_resonance() {
        let layout = two_point(PI / 3.0);
        for k in 0..40 {
            let w = TAU * (4.2e9 + 0.02e9 * k as f64);
            let s = sample(&layout, w).unwrap();
            let scale = s.gamma.iter().fold(1.0f64, |a, &b| a.max(b));
            assert!(s.decay_matrix_min_eig(&layout) >= -1e-9 * scale);
        }
    }

    #[test]
    fn cross_rate_arguments_are_checked() {
        let layout = two_point(PI / 2.0);
        assert!(g_general(&layout, 0, 0, TAU * 4e9).is_err());
        assert!(g_general(&layout, 0, 5, TAU * 4e9).is_err());
        assert!(gamma_radiative(&layout, 0, -1.0).is_err());
    }
}
