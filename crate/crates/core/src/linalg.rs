//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Orthonormal basis (as columns) of the Euclidean complement of `v`,
/// built from a Householder reflector that maps `v/|v|` to the last axis.
pub fn orthogonal_complement(v: &DVector<f64>) -> DMatrix<f64> {
    let h = householder_to_last(v);
    let n = v.len();
    h.transpose().columns(0, n - 1).into_owned()
}

/// Orthogonal `H` (a Householder reflector, last row possibly negated) with
/// `H v̂ = e_n`.
pub fn householder_to_last(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let norm = v.norm();
    let mut u = v / norm;
    // reflect u onto e_n; pick the sign that avoids cancellation
    let sign = if u[n - 1] >= 0.0 { 1.0 } else { -1.0 };
    u[n - 1] += sign;
    let un = u.norm_squared();
    let mut h = DMatrix::identity(n, n);
    if un > 0.0 {
        h -= (&u * u.transpose()) * (2.0 / un);
    }
    // H v̂ = -sign·e_n; flip the last row so the map is +e_n
    if sign > 0.0 {
        let mut last_row = h.row_mut(n - 1);
        last_row.neg_mut();
    }
    h
}

pub fn bilinear(g: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    u.dot(&(g * v))
}

/// Symmetrized outer product `½(a bᵀ + b aᵀ)`.
pub fn sym_outer(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    (a * b.transpose() + b * a.transpose()) * 0.5
}

/// `[[0, ωᵀ], [ω, g]]`.
pub fn bordered(g: &DMatrix<f64>, omega: &DVector<f64>) -> DMatrix<f64> {
    let n = omega.len();
    let mut b = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        b[(0, i + 1)] = omega[i];
        b[(i + 1, 0)] = omega[i];
        for j in 0..n {
            b[(i + 1, j + 1)] = g[(i, j)];
        }
    }
    b
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
