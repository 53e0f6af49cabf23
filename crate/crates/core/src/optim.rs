//! Derivative-free bounded minimization: Nelder-Mead simplex descent with
//! deterministic random multi-starts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{r, Error, Result, Scalar};

/// Box bounds, `lo[i] < hi[i]` for every dimension.
#[derive(Debug, Clone)]
pub struct Bounds<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> Bounds<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::validation("bounds must be non-empty and matched"));
        }
        if lo.iter().zip(&hi).any(|(&l, &h)| !(l < h)) {
            return Err(Error::validation("bounds must satisfy lo < hi"));
        }
        Ok(Bounds { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn clamp(&self, x: &mut [T]) {
        for ((v, &l), &h) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = crate::tmin(crate::tmax(*v, l), h);
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| l + (h - l) * r::<T>(rng.gen::<f64>()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult<T> {
    pub x: Vec<T>,
    pub fx: T,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions<T> {
    pub max_iterations: usize,
    /// Relative objective-spread tolerance.
    pub tol_rel: T,
}

impl<T: Scalar> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        NelderMeadOptions {
            max_iterations: 4000,
            tol_rel: r(1e-10),
        }
    }
}

/// Bounded Nelder-Mead: candidate points are projected back into the box.
pub fn nelder_mead<T: Scalar>(
    f: &(dyn Fn(&[T]) -> T + Sync),
    x0: &[T],
    bounds: &Bounds<T>,
    options: &NelderMeadOptions<T>,
) -> Result<MinimizeResult<T>> {
    let n = bounds.dim();
    if x0.len() != n {
        return Err(Error::domain("initial point dimension mismatch"));
    }
    let (alpha, gamma, rho, sigma) = (r::<T>(1.0), r::<T>(2.0), r::<T>(0.5), r::<T>(0.5));

    let mut start = x0.to_vec();
    bounds.clamp(&mut start);
    let mut simplex: Vec<Vec<T>> = vec![start.clone()];
    for i in 0..n {
        let mut v = start.clone();
        let span = bounds.hi[i] - bounds.lo[i];
        let step = span * r::<T>(0.05);
        v[i] = if v[i] + step <= bounds.hi[i] {
            v[i] + step
        } else {
            v[i] - step
        };
        simplex.push(v);
    }
    let mut values: Vec<T> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        iterations += 1;
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let scale = values[0].abs() + r::<T>(1e-300);
        if spread <= options.tol_rel * scale {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![T::zero(); n];
        for v in simplex.iter().take(n) {
            for (c, &x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
        }
        let inv = T::one() / r::<T>(n as f64);
        for c in centroid.iter_mut() {
            *c *= inv;
        }

        let worst = simplex[n].clone();
        let mut reflected: Vec<T> = centroid
            .iter()
            .zip(&worst)
            .map(|(&c, &w)| c + alpha * (c - w))
            .collect();
        bounds.clamp(&mut reflected);
        let f_reflected = f(&reflected);

        if f_reflected < values[0] {
            let mut expanded: Vec<T> = centroid
                .iter()
                .zip(&worst)
                .map(|(&c, &w)| c + gamma * (c - w))
                .collect();
            bounds.clamp(&mut expanded);
            let f_expanded = f(&expanded);
            if f_expanded < f_reflected {
                simplex[n] = expanded;
                values[n] = f_expanded;
            } else {
                simplex[n] = reflected;
                values[n] = f_reflected;
            }
        } else if f_reflected < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_reflected;
        } else {
            let mut contracted: Vec<T> = centroid
                .iter()
                .zip(&worst)
                .map(|(&c, &w)| c + rho * (w - c))
                .collect();
            bounds.clamp(&mut contracted);
            let f_contracted = f(&contracted);
            if f_contracted < values[n] {
                simplex[n] = contracted;
                values[n] = f_contracted;
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].clone();
                for i in 1..=n {
                    for (x, &b) in simplex[i].iter_mut().zip(&best) {
                        *x = b + sigma * (*x - b);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    Ok(MinimizeResult {
        x: simplex[best].clone(),
        fx: values[best],
        iterations,
        converged,
    })
}

/// Runs Nelder-Mead from `restarts` seeded random starting points (plus the
/// optional explicit initial point) and returns the best result. Deterministic
/// for a given seed, independent of worker scheduling.
pub fn multistart<T: Scalar>(
    f: &(dyn Fn(&[T]) -> T + Sync),
    init: Option<&[T]>,
    bounds: &Bounds<T>,
    restarts: usize,
    seed: u64,
    options: &NelderMeadOptions<T>,
) -> Result<MinimizeResult<T>> {
    let mut starts: Vec<Vec<T>> = Vec::with_capacity(restarts + 1);
    if let Some(x0) = init {
        starts.push(x0.to_vec());
    }
    for i in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        starts.push(bounds.sample(&mut rng));
    }
    if starts.is_empty() {
        return Err(Error::domain("need an initial point or restarts > 0"));
    }
    let mut results: Vec<MinimizeResult<T>> = starts
        .par_iter()
        .map(|s| nelder_mead(f, s, bounds, options))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for i in 1..results.len() {
        if results[i].fx < results[best].fx {
            best = i;
        }
    }
    Ok(results.swap_remove(best))
}
