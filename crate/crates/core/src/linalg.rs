//! Tridiagonal linear algebra: Thomas factorisation, pivoted LU, and the
//! Sturm-bisection / inverse-iteration eigensolver for symmetric tridiagonal matrices.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("zero pivot at row {0}")]
    ZeroPivot(usize),
    #[error("eigen-iteration did not converge for index {index} (residual {residual:.3e})")]
    ConvergenceFailure { index: usize, residual: f64 },
}

/// Pre-factorised tridiagonal matrix for repeated solves without pivoting.
///
/// Only valid for matrices whose Gaussian elimination needs no pivoting
/// (diagonally dominant rows, as produced by implicit diffusion steps).
#[derive(Debug, Clone)]
pub struct ThomasFactor {
    sub: Vec<f64>,
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl ThomasFactor {
    /// `sub[i]` multiplies `x[i]` in row `i + 1`; `sup[i]` multiplies `x[i + 1]` in row `i`.
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self, LinalgError> {
        let n = diag.len();
        if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(LinalgError::Dimension(format!(
                "diag {n}, sub {}, sup {}",
                sub.len(),
                sup.len()
            )));
        }
        let mut inv_pivot = vec![0.0; n];
        let mut upper = vec![0.0; n - 1];
        let mut pivot = diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = diag[i] - sub[i - 1] * upper[i - 1];
            }
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(LinalgError::ZeroPivot(i));
            }
            inv_pivot[i] = 1.0 / pivot;
            if i + 1 < n {
                upper[i] = sup[i] * inv_pivot[i];
            }
        }
        Ok(Self { sub: sub.to_vec(), upper, inv_pivot })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Solves in place: `rhs` is overwritten by the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.sub[i - 1] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}

/// Tridiagonal LU with partial (row) pivoting, as in LAPACK `gttrf`.
#[derive(Debug, Clone)]
pub struct PivotedTridiagLu {
    diag: Vec<f64>,
    up1: Vec<f64>,
    up2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl PivotedTridiagLu {
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self, LinalgError> {
        let n = diag.len();
        if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(LinalgError::Dimension(format!("diag {n}")));
        }
        let scale = diag.iter().chain(sub).chain(sup).fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        let mut d = diag.to_vec();
        let mut u1 = sup.to_vec();
        let mut u2 = vec![0.0; n.saturating_sub(2)];
        let mut mult = vec![0.0; n - 1];
        let mut swapped = vec![false; n - 1];
        for i in 0..n - 1 {
            let below = sub[i];
            if d[i].abs() >= below.abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = below / d[i];
                mult[i] = f;
                d[i + 1] -= f * u1[i];
            } else {
                // rows i and i+1 exchange places
                let f = d[i] / below;
                mult[i] = f;
                swapped[i] = true;
                let old_diag_next = d[i + 1];
                let old_u1 = u1[i];
                d[i] = below;
                u1[i] = old_diag_next;
                d[i + 1] = old_u1 - f * old_diag_next;
                if i + 2 < n {
                    u2[i] = u1[i + 1];
                    u1[i + 1] *= -f;
                }
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Ok(Self { diag: d, up1: u1, up2: u2, mult, swapped })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.mult[i] * b[i];
        }
        b[n - 1] /= self.diag[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.up1[n - 2] * b[n - 1]) / self.diag[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.up1[i] * b[i + 1] - self.up2[i] * b[i + 2]) / self.diag[i];
        }
    }
}

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self, LinalgError> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(LinalgError::Dimension(format!("diag {}, off {}", diag.len(), off.len())));
        }
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n - 1 {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        // a vanishing pivot is replaced by -floor and counted as negative
        let floor = f64::MIN_POSITIVE.sqrt();
        let pivot = |q: f64| if q.abs() < floor { -floor } else { q };
        let mut q = pivot(self.diag[0] - x);
        let mut count = usize::from(q < 0.0);
        for i in 1..self.len() {
            q = pivot(self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q);
            count += usize::from(q < 0.0);
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection, bracketed below by `lower`.
    pub fn eigenvalue(&self, k: usize, lower: Option<f64>) -> f64 {
        assert!(k < self.len());
        let (glo, ghi) = self.gershgorin();
        let mut lo = lower.map_or(glo, |l| l.max(glo));
        let mut hi = ghi;
        if self.count_below(lo) > k {
            lo = glo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Lowest `count` eigenpairs, eigenvectors normalised to unit Euclidean norm.
    pub fn lowest_eigenpairs(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), LinalgError> {
        let n = self.len();
        if count > n {
            return Err(LinalgError::Dimension(format!("{count} eigenpairs of a {n}x{n} matrix")));
        }
        let mut values = Vec::with_capacity(count);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
        let mut lower = None;
        for k in 0..count {
            let lam = self.eigenvalue(k, lower);
            lower = Some(lam);
            let v = self.inverse_iteration(lam, k, &vectors)?;
            values.push(lam);
            vectors.push(v);
        }
        Ok((values, vectors))
    }

    fn inverse_iteration(&self, lam: f64, index: usize, previous: &[Vec<f64>]) -> Result<Vec<f64>, LinalgError> {
        let n = self.len();
        let scale = self.diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let shift = lam + 64.0 * f64::EPSILON * scale.max(1.0);
        let shifted: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let lu = PivotedTridiagLu::new(&self.off, &shifted, &self.off)?;
        // deterministic start vector with components along every mode
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract())
            .collect();
        normalize(&mut v);
        for _ in 0..4 {
            lu.solve_in_place(&mut v);
            for p in previous {
                let c = dot(&v, p);
                v.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
            }
            normalize(&mut v);
        }
        let av = self.mul_vec(&v);
        let residual = av.iter().zip(&v).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
        let tol = 1e-8 * scale.max(1.0);
        if !residual.is_finite() || residual > tol {
            return Err(LinalgError::ConvergenceFailure { index, residual });
        }
        Ok(v)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(sub: &[f64], diag: &[f64], sup: &[f64], x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn thomas_solves_dominant_system() {
        let n = 50;
        let sub: Vec<f64> = (0..n - 1).map(|i| -0.3 - 0.01 * i as f64).collect();
        let sup: Vec<f64> = (0..n - 1).map(|i| -0.4 + 0.005 * i as f64).collect();
        let diag = vec![2.0; n];
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = dense_mul(&sub, &diag, &sup, &x);
        ThomasFactor::new(&sub, &diag, &sup).unwrap().solve_in_place(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn pivoted_lu_handles_zero_diagonal() {
        let sub = vec![1.0, 2.0, -1.0, 0.5];
        let diag = vec![0.0, 0.0, 3.0, 0.0, 1.0];
        let sup = vec![2.0, 1.0, 1.0, 4.0];
        let x = vec![1.0, -2.0, 0.5, 3.0, -1.0];
        let mut b = dense_mul(&sub, &diag, &sup, &x);
        PivotedTridiagLu::new(&sub, &diag, &sup).unwrap().solve_in_place(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        // tridiag(-1, 2, -1) has eigenvalues 2 - 2cos(k pi/(n+1))
        let n = 200;
        let m = SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap();
        let (vals, vecs) = m.lowest_eigenpairs(6).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13, "k={k}");
        }
        for i in 0..6 {
            for j in 0..6 {
                let d = dot(&vecs[i], &vecs[j]);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-10);
            }
        }
    }
}
