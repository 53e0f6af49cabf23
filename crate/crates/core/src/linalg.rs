//! Small dense complex linear-algebra helpers shared by the dynamics and
//! tomography code: Pauli operators, qubit embeddings, vectorization, and
//! Hermitian eigen utilities.

use nalgebra::{DMatrix, DVector};

use crate::{r, C, Error, Result, Scalar};

pub type CMat<T> = DMatrix<C<T>>;
pub type CVec<T> = DVector<C<T>>;

#[inline]
pub fn cx<T: Scalar>(re: f64, im: f64) -> C<T> {
    C::new(r(re), r(im))
}

pub fn identity<T: Scalar>(dim: usize) -> CMat<T> {
    CMat::identity(dim, dim)
}

pub fn pauli_x<T: Scalar>() -> CMat<T> {
    CMat::from_row_slice(2, 2, &[cx(0., 0.), cx(1., 0.), cx(1., 0.), cx(0., 0.)])
}

pub fn pauli_y<T: Scalar>() -> CMat<T> {
    CMat::from_row_slice(2, 2, &[cx(0., 0.), cx(0., -1.), cx(0., 1.), cx(0., 0.)])
}

/// `Z = diag(1, -1)` in the (|0>, |1>) ordering: the ground state has
/// eigenvalue +1.
pub fn pauli_z<T: Scalar>() -> CMat<T> {
    CMat::from_row_slice(2, 2, &[cx(1., 0.), cx(0., 0.), cx(0., 0.), cx(-1., 0.)])
}

/// Lowering operator `|0><1|`.
pub fn sigma_minus<T: Scalar>() -> CMat<T> {
    CMat::from_row_slice(2, 2, &[cx(0., 0.), cx(1., 0.), cx(0., 0.), cx(0., 0.)])
}

/// Embeds a single-qubit operator on qubit `which` of an `n`-qubit register.
/// Qubit 0 is the most significant factor in the tensor ordering.
pub fn embed<T: Scalar>(op: &CMat<T>, which: usize, n: usize) -> CMat<T> {
    assert!(which < n);
    let mut acc = if which == 0 {
        op.clone()
    } else {
        identity::<T>(2)
    };
    for q in 1..n {
        let f = if q == which { op.clone() } else { identity(2) };
        acc = acc.kronecker(&f);
    }
    acc
}

pub fn dagger<T: Scalar>(m: &CMat<T>) -> CMat<T> {
    m.adjoint()
}

/// Column-major vectorization of a matrix.
pub fn vectorize<T: Scalar>(m: &CMat<T>) -> CVec<T> {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvectorize<T: Scalar>(v: &CVec<T>, dim: usize) -> CMat<T> {
    CMat::from_column_slice(dim, dim, v.as_slice())
}

/// Left-multiplication superoperator: `vec(A X) = (I kron A) vec(X)`
/// (column-major convention).
pub fn spre<T: Scalar>(a: &CMat<T>) -> CMat<T> {
    identity::<T>(a.nrows()).kronecker(a)
}

/// Right-multiplication superoperator: `vec(X B) = (B^T kron I) vec(X)`.
pub fn spost<T: Scalar>(b: &CMat<T>) -> CMat<T> {
    b.transpose().kronecker(&identity::<T>(b.nrows()))
}

/// Sandwich superoperator for `A X A^dagger`.
pub fn sandwich<T: Scalar>(a: &CMat<T>) -> CMat<T> {
    a.conjugate().kronecker(a)
}

/// Hermitian eigendecomposition; returns real eigenvalues (ascending) and the
/// matching eigenvector columns.
pub fn eigh<T: Scalar>(m: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals: Vec<T> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let dim = m.nrows();
    let mut vecs = CMat::zeros(dim, dim);
    for (col, &i) in idx.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Hermitian part `(M + M^dagger)/2`.
pub fn hermitize<T: Scalar>(m: &CMat<T>) -> CMat<T> {
    (m + m.adjoint()) * cx::<T>(0.5, 0.0)
}

/// PSD square root of a Hermitian matrix via eigendecomposition. Slightly
/// negative eigenvalues (numerical noise) are clipped to zero.
pub fn sqrtm_psd<T: Scalar>(m: &CMat<T>) -> Result<CMat<T>> {
    let (vals, vecs) = eigh(m);
    let scale = vals
        .iter()
        .fold(T::zero(), |acc, v| if v.abs() > acc { v.abs() } else { acc });
    let floor = -r::<T>(1e-9) * if scale > T::zero() { scale } else { T::one() };
    let mut d = CMat::zeros(m.nrows(), m.ncols());
    for (i, &v) in vals.iter().enumerate() {
        if v < floor {
            return Err(Error::numerical(format!(
                "matrix is not PSD: eigenvalue {v:?} below tolerance"
            )));
        }
        let clipped = if v > T::zero() { v } else { T::zero() };
        d[(i, i)] = C::new(clipped.sqrt(), T::zero());
    }
    Ok(&vecs * d * vecs.adjoint())
}

/// Projects a Hermitian matrix onto the nearest (Frobenius) unit-trace PSD
/// matrix by Euclidean projection of its eigenvalues onto the probability
/// simplex.
pub fn nearest_density_matrix<T: Scalar>(m: &CMat<T>) -> CMat<T> {
    let h = hermitize(m);
    let (vals, vecs) = eigh(&h);
    let projected = project_simplex(&vals);
    let mut d = CMat::zeros(m.nrows(), m.ncols());
    for (i, &v) in projected.iter().enumerate() {
        d[(i, i)] = C::new(v, T::zero());
    }
    &vecs * d * vecs.adjoint()
}

fn project_simplex<T: Scalar>(vals: &[T]) -> Vec<T> {
    let mut sorted = vals.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - T::one()) / r::<T>((k + 1) as f64);
        if v - t > T::zero() {
            theta = t;
        } else {
            break;
        }
    }
    vals.iter()
        .map(|&v| {
            let x = v - theta;
            if x > T::zero() {
                x
            } else {
                T::zero()
            }
        })
        .collect()
}
