//! Sparse symmetric operators, banded LU/Cholesky, and a shift-invert
//! eigensolver for definite pencils.
//!
//! Every mesh in this crate is a lexicographically ordered tensor-product
//! grid, so assembled operators are banded; a band factorization covers all
//! linear solves, including the bordered systems of the arclength corrector.

use crate::error::{Error, Result};

/// Sparse matrix in row-major adjacency form with sorted column indices.
#[derive(Debug, Clone)]
pub struct SpMat {
    pub n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SpMat {
    pub fn zeros(n: usize) -> Self {
        SpMat {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    /// Adds `v` to entry `(i, j)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => row[k].1 += v,
            Err(k) => row.insert(k, (j, v)),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => self.rows[i][k].1,
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, row) in self.rows.iter().enumerate() {
            let mut s = 0.0;
            for &(j, v) in row {
                s += v * x[j];
            }
            y[i] = s;
        }
        y
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, other: &SpMat, alpha: f64) -> SpMat {
        let mut out = self.clone();
        for (i, row) in other.rows.iter().enumerate() {
            for &(j, v) in row {
                out.add(i, j, alpha * v);
            }
        }
        out
    }

    pub fn scale(&self, alpha: f64) -> SpMat {
        let mut out = self.clone();
        for row in &mut out.rows {
            for e in row.iter_mut() {
                e.1 *= alpha;
            }
        }
        out
    }

    /// Restriction to the index set `keep` (both rows and columns).
    pub fn restrict(&self, keep: &[usize]) -> SpMat {
        let mut map = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let mut out = SpMat::zeros(keep.len());
        for (k, &i) in keep.iter().enumerate() {
            for &(j, v) in &self.rows[i] {
                if map[j] != usize::MAX {
                    out.add(k, map[j], v);
                }
            }
        }
        out
    }

    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                bw = bw.max(i.abs_diff(j));
            }
        }
        bw
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                s += x[i] * v * x[j];
            }
        }
        s
    }

    /// Coordinate-format triplets (debug export).
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out.push((i, j, v));
            }
        }
        out
    }
}

/// LU factorization of a banded matrix with partial pivoting
/// (LAPACK-style band storage with `kl` fill superdiagonals).
pub struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    /// Column-major: ab[j * ldab + s] holds A(r, j) with s = kv + r - j.
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &SpMat) -> Result<Self> {
        let n = a.n;
        let bw = a.bandwidth();
        let (kl, ku) = (bw, bw);
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; n * ldab];
        for (i, row) in a.rows.iter().enumerate() {
            for &(j, v) in row {
                let s = kv as isize + i as isize - j as isize;
                debug_assert!(s >= 0 && (s as usize) < ldab);
                ab[j * ldab + s as usize] = v;
            }
        }
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot among rows j..=j+km
            let mut jp = 0;
            let mut pmax = ab[j * ldab + kv].abs();
            for i in 1..=km {
                let v = ab[j * ldab + kv + i].abs();
                if v > pmax {
                    pmax = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if pmax == 0.0 {
                return Err(Error::SingularJacobian);
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                // swap rows j and j+jp over columns j..=ju
                for c in j..=ju {
                    let s1 = kv as isize + j as isize - c as isize;
                    let s2 = s1 + jp as isize;
                    if s1 >= 0 && (s2 as usize) < ldab {
                        ab.swap(c * ldab + s1 as usize, c * ldab + s2 as usize);
                    }
                }
            }
            if km > 0 {
                let piv = ab[j * ldab + kv];
                for i in 1..=km {
                    ab[j * ldab + kv + i] /= piv;
                }
                for c in (j + 1)..=ju {
                    let s = kv as isize + j as isize - c as isize;
                    if s < 0 {
                        continue;
                    }
                    let t = ab[c * ldab + s as usize];
                    if t != 0.0 {
                        for i in 1..=km {
                            ab[c * ldab + s as usize + i] -= ab[j * ldab + kv + i] * t;
                        }
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            kv,
            ab,
            ipiv,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let ldab = self.kl + self.kv + 1;
        let mut x = b.to_vec();
        // forward
        for j in 0..self.n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
            let km = self.kl.min(self.n - 1 - j);
            let xj = x[j];
            if xj != 0.0 {
                for i in 1..=km {
                    x[j + i] -= self.ab[j * ldab + self.kv + i] * xj;
                }
            }
        }
        // back substitution, column-oriented
        for j in (0..self.n).rev() {
            x[j] /= self.ab[j * ldab + self.kv];
            let xj = x[j];
            if xj != 0.0 {
                let rmin = j.saturating_sub(self.kv);
                for r in rmin..j {
                    x[r] -= self.ab[j * ldab + self.kv + r - j] * xj;
                }
            }
        }
        x
    }
}

/// Tests positive definiteness of a banded symmetric matrix via Cholesky.
pub fn is_positive_definite(a: &SpMat) -> bool {
    let n = a.n;
    let bw = a.bandwidth();
    // band lower storage: l[i][k] = L(i, i - bw + k), k in 0..=bw
    let mut l = vec![vec![0.0; bw + 1]; n];
    for i in 0..n {
        let jmin = i.saturating_sub(bw);
        for j in jmin..=i {
            let mut s = a.get(i, j);
            let kmin = jmin.max(j.saturating_sub(bw));
            for k in kmin..j {
                s -= l[i][k + bw - i] * l[j][k + bw - j];
            }
            if j < i {
                if l[j][bw] == 0.0 {
                    return false;
                }
                l[i][j + bw - i] = s / l[j][bw];
            } else {
                if s <= 0.0 || !s.is_finite() {
                    return false;
                }
                l[i][bw] = s.sqrt();
            }
        }
    }
    true
}

// ---- vector helpers ----

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, &v| m.max(v.abs()))
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale_in_place(x: &mut [f64], alpha: f64) {
    for v in x.iter_mut() {
        *v *= alpha;
    }
}

/// Outcome of a pencil eigensolve.
#[derive(Debug, Clone)]
pub struct PencilEigen {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Distance to the next eigenvalue (deflated second solve), if computed.
    pub gap: Option<f64>,
}

/// Smallest eigenvalue of the definite pencil `A x = lambda B x` (B SPD)
/// by shift-invert inverse iteration.
///
/// The shift is kept strictly below the smallest eigenvalue, certified by a
/// banded Cholesky test on `A - s B`, so iteration from a positive start
/// converges to the principal pair.
pub fn smallest_pencil_eig(a: &SpMat, b: &SpMat, tol: f64, compute_gap: bool) -> Result<PencilEigen> {
    let (value, vector, residual_norm, iterations) = smallest_eig_deflated(a, b, tol, None)?;
    let gap = if compute_gap {
        let (v2, _, _, _) = smallest_eig_deflated(a, b, tol.max(1e-8), Some(&vector))?;
        Some(v2 - value)
    } else {
        None
    };
    Ok(PencilEigen {
        value,
        vector,
        residual_norm,
        iterations,
        gap,
    })
}

fn b_normalize(b: &SpMat, x: &mut [f64]) {
    let nb = b.quadratic_form(x).sqrt();
    if nb > 0.0 {
        scale_in_place(x, 1.0 / nb);
    }
}

fn smallest_eig_deflated(
    a: &SpMat,
    b: &SpMat,
    tol: f64,
    deflate: Option<&[f64]>,
) -> Result<(f64, Vec<f64>, f64, usize)> {
    let n = a.n;
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.01 * ((i as f64 * 0.7).sin()))
        .collect();
    let project = |x: &mut Vec<f64>| {
        if let Some(d) = deflate {
            let bd = b.matvec(d);
            let c = dot(x, &bd) / dot(d, &bd);
            axpy(x, -c, d);
        }
    };
    project(&mut x);
    b_normalize(b, &mut x);
    let mut rho = a.quadratic_form(&x);

    // certified shift below the target eigenvalue
    let mut step = 0.5 * rho.abs().max(1.0);
    let mut shift = rho - step;
    let mut tries = 0;
    while !is_positive_definite(&a.add_scaled(b, -shift)) {
        shift -= step;
        step *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::EigenFailed("no definite shift found".into()));
        }
    }
    // when deflating, the pencil restricted to the complement still has all
    // eigenvalues above `shift`, so the same certificate applies

    let mut lu = BandLu::factor(&a.add_scaled(b, -shift))?;
    let mut resid = f64::INFINITY;
    let mut iters = 0;
    for k in 0..500 {
        iters = k + 1;
        let rhs = b.matvec(&x);
        let mut y = lu.solve(&rhs);
        project(&mut y);
        b_normalize(b, &mut y);
        let ay = a.matvec(&y);
        let by = b.matvec(&y);
        rho = dot(&y, &ay);
        let mut r = ay.clone();
        axpy(&mut r, -rho, &by);
        resid = norm2(&r);
        let scale = norm2(&ay).max(rho.abs()).max(1.0);
        x = y;
        if resid < tol * scale {
            break;
        }
        // refresh the shift once the estimate has settled
        if k % 8 == 7 {
            let cand = rho - resid.max(1e-12) * 10.0;
            if cand > shift && is_positive_definite(&a.add_scaled(b, -cand)) {
                shift = cand;
                lu = BandLu::factor(&a.add_scaled(b, -shift))?;
            }
        }
    }
    let scale = rho.abs().max(1.0);
    if resid > tol * scale * 100.0 {
        return Err(Error::EigenFailed(format!(
            "inverse iteration stalled, residual {resid:.3e}"
        )));
    }
    Ok((rho, x, resid, iters))
}

/// Solves the bordered system `[A c; r^T d] [x; y] = [f; g]` using two
/// banded solves with `A`.
pub fn solve_bordered(
    lu: &BandLu,
    c: &[f64],
    r: &[f64],
    d: f64,
    f: &[f64],
    g: f64,
) -> Result<(Vec<f64>, f64)> {
    let w = lu.solve(c);
    let z = lu.solve(f);
    let denom = d - dot(r, &w);
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::SingularJacobian);
    }
    let y = (g - dot(r, &z)) / denom;
    let mut x = z;
    axpy(&mut x, -y, &w);
    Ok((x, y))
}
