//! Extreme eigenpairs of a real symmetric tridiagonal matrix: Sturm-sequence
//! bisection for eigenvalues, inverse iteration for eigenvectors.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, sin, sqrt};

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count(diag: &[f64], off_sq: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if abs(q) < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        q = diag[i] - x - off_sq[i - 1] / q;
        if abs(q) < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing all eigenvalues.
pub fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { abs(off[i - 1]) } else { 0.0 } + if i + 1 < n { abs(off[i]) } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// Largest `n` eigenvalues (descending) with unit Euclidean-norm eigenvectors.
pub fn largest_eigenpairs(diag: &[f64], off: &[f64], n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let size = diag.len();
    if size == 0 || off.len() + 1 != size {
        return Err(Error::InvalidParameter { name: "tridiagonal", reason: "off-diagonal must have length n - 1" });
    }
    if n == 0 || n > size {
        return Err(Error::InvalidParameter { name: "n_modes", reason: "must be in 1..=matrix size" });
    }
    let off_sq: Vec<f64> = off.iter().map(|e| e * e).collect();
    let (g_lo, g_hi) = gershgorin(diag, off);
    let norm = abs(g_lo).max(abs(g_hi)).max(f64::MIN_POSITIVE);
    let pivmin = f64::MIN_POSITIVE * off_sq.iter().fold(1.0f64, |a, &b| a.max(b));
    let tol = 4.0 * f64::EPSILON * norm;

    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        // Target: smallest x with count(< x) >= size - k.
        let target = size - k;
        let mut lo = g_lo - tol;
        let mut hi = g_hi + tol;
        if let Some(&prev) = values.last() {
            hi = prev + tol;
        }
        for _ in 0..200 {
            if hi - lo <= tol.max(2.0 * f64::EPSILON * abs(lo).max(abs(hi))) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if sturm_count(diag, &off_sq, mid, pivmin) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        values.push(0.5 * (lo + hi));
    }

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut work = LuWork::new(size);
    for &lambda in &values {
        let mut v: Vec<f64> = (0..size).map(|i| 1.0 + 0.25 * sin(1.0 + i as f64 * 0.7)).collect();
        work.factor(diag, off, lambda, norm)?;
        for _ in 0..3 {
            work.solve(&mut v);
            orthogonalize(&mut v, &vectors);
            normalize(&mut v)?;
        }
        vectors.push(v);
    }
    Ok((values, vectors))
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        for (x, y) in v.iter_mut().zip(b) {
            *x -= d * y;
        }
    }
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let m = v.iter().fold(0.0f64, |a, x| a.max(abs(*x)));
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::NoConvergence { what: "inverse iteration", iterations: 3 });
    }
    for x in v.iter_mut() {
        *x /= m;
    }
    let s = sqrt(v.iter().map(|x| x * x).sum::<f64>());
    for x in v.iter_mut() {
        *x /= s;
    }
    Ok(())
}

/// LU factorisation with partial pivoting of `T − σI`.
struct LuWork {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swap: Vec<bool>,
}

impl LuWork {
    fn new(n: usize) -> Self {
        Self {
            dl: vec![0.0; n.saturating_sub(1)],
            d: vec![0.0; n],
            du: vec![0.0; n.saturating_sub(1)],
            du2: vec![0.0; n.saturating_sub(2)],
            swap: vec![false; n.saturating_sub(1)],
        }
    }

    fn factor(&mut self, diag: &[f64], off: &[f64], shift: f64, norm: f64) -> Result<()> {
        let n = diag.len();
        for (d, x) in self.d.iter_mut().zip(diag) {
            *d = x - shift;
        }
        self.dl.copy_from_slice(off);
        self.du.copy_from_slice(off);
        for x in self.du2.iter_mut() {
            *x = 0.0;
        }
        for i in 0..n.saturating_sub(1) {
            if abs(self.d[i]) >= abs(self.dl[i]) {
                self.swap[i] = false;
                if self.d[i] != 0.0 {
                    let fact = self.dl[i] / self.d[i];
                    self.dl[i] = fact;
                    self.d[i + 1] -= fact * self.du[i];
                }
            } else {
                self.swap[i] = true;
                let fact = self.d[i] / self.dl[i];
                self.d[i] = self.dl[i];
                self.dl[i] = fact;
                let temp = self.du[i];
                self.du[i] = self.d[i + 1];
                self.d[i + 1] = temp - fact * self.d[i + 1];
                if i + 2 < n {
                    self.du2[i] = self.du[i + 1];
                    self.du[i + 1] *= -fact;
                }
            }
        }
        let tiny = f64::EPSILON * norm;
        for x in self.d.iter_mut() {
            if abs(*x) < tiny {
                *x = if *x < 0.0 { -tiny } else { tiny };
            }
        }
        if self.d.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow("tridiagonal factorisation"));
        }
        Ok(())
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swap[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}
