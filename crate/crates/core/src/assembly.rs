//! Finite element assembly for the harvested logistic problem.
//!
//! P1 elements on intervals, Q1 on rectangles. Interior nonlinear terms are
//! integrated with 3-point Gauss rules on the nodal interpolant; boundary
//! integrals use exact endpoint evaluation in 1D (counting measure) and
//! 2-point Gauss per edge in 2D.

use crate::domain::Mesh;
use crate::error::{Error, Result};
use crate::linalg::SpMat;

/// Floor below which the boundary nonlinearity `t^q` is never differentiated
/// at `eps = 0`.
pub const DELTA_J: f64 = 1e-8;

/// 3-point Gauss nodes/weights on [-1, 1].
const GAUSS3: [(f64, f64); 3] = [
    (-0.774596669241483, 0.555555555555556),
    (0.0, 0.888888888888889),
    (0.774596669241483, 0.555555555555556),
];
/// 2-point Gauss nodes/weights on [-1, 1].
const GAUSS2: [(f64, f64); 2] = [
    (-0.5773502691896258, 1.0),
    (0.5773502691896258, 1.0),
];

/// Problem parameters: exponents, harvesting effort, rescaled chart weight,
/// and boundary regularization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    pub mu: f64,
    pub eps: f64,
}

impl ProblemParams {
    pub fn new(p: f64, q: f64, lambda: f64) -> Result<Self> {
        let params = ProblemParams {
            p,
            q,
            lambda,
            mu: 0.0,
            eps: 0.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        self.eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        self.mu = mu;
        self.validate()?;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0 && self.p > 1.0) {
            return Err(Error::InvalidParams(format!(
                "need 0 < q < 1 < p, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        if self.lambda < 0.0 || self.mu < 0.0 || self.eps < 0.0 || self.eps >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "need lambda, mu >= 0 and eps in [0, 1), got lambda = {}, mu = {}, eps = {}",
                self.lambda, self.mu, self.eps
            )));
        }
        Ok(())
    }

    /// Chart exponent `1/(1-q)` relating u and v scales.
    pub fn chart_exponent(&self) -> f64 {
        1.0 / (1.0 - self.q)
    }

    /// `mu = lambda^{(p-1)/(1-q)}` for the current lambda.
    pub fn mu_of_lambda(&self) -> f64 {
        self.lambda.powf((self.p - 1.0) / (1.0 - self.q))
    }
}

/// Nodal coefficient vector tied to a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    mesh_id: u64,
    pub coeffs: Vec<f64>,
}

impl Field {
    pub fn new(mesh: &Mesh, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != mesh.num_nodes() || coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(
                "field length/finiteness mismatch with mesh".into(),
            ));
        }
        Ok(Field {
            mesh_id: mesh.id(),
            coeffs,
        })
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Field {
            mesh_id: mesh.id(),
            coeffs: vec![c; mesh.num_nodes()],
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        Field {
            mesh_id: mesh.id(),
            coeffs: mesh.nodes.iter().map(|&(x, y)| f(x, y)).collect(),
        }
    }

    pub(crate) fn from_raw(mesh_id: u64, coeffs: Vec<f64>) -> Self {
        Field { mesh_id, coeffs }
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.coeffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.coeffs.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            mesh_id: self.mesh_id,
            coeffs: self.coeffs.iter().map(|v| v * s).collect(),
        }
    }
}

/// Assembled bilinear forms: stiffness `K`, interior mass `M`, boundary mass
/// `M_bd`, plus mesh metadata needed for nonlinear quadrature.
#[derive(Debug, Clone)]
pub struct AssembledForms {
    pub k: SpMat,
    pub m: SpMat,
    pub m_bd: SpMat,
    pub mesh: Mesh,
}

impl AssembledForms {
    pub fn n(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn check_field(&self, u: &Field) -> Result<()> {
        if u.mesh_id() != self.mesh.id() {
            return Err(Error::MeshMismatch {
                expected: self.mesh.id(),
                found: u.mesh_id(),
            });
        }
        Ok(())
    }

    /// Discrete L2 norm `sqrt(u^T M u)`.
    pub fn l2_norm(&self, u: &Field) -> f64 {
        self.m.quadratic_form(&u.coeffs).max(0.0).sqrt()
    }

    /// Discrete H1 norm `sqrt(int |grad u|^2 + u^T M u)`.
    pub fn h1_norm(&self, u: &Field) -> f64 {
        (self.dirichlet_form(u) + self.m.quadratic_form(&u.coeffs))
            .max(0.0)
            .sqrt()
    }

    /// Gradient energy `int |grad u|^2`, accumulated element by element as a
    /// sum of nonnegative terms. Equals `u^T K u` up to rounding, but avoids
    /// the cancellation among the O(1/h) stiffness entries that makes the
    /// quadratic form lose accuracy for smooth fields on fine meshes.
    pub fn dirichlet_form(&self, u: &Field) -> f64 {
        let mesh = &self.mesh;
        let x = &u.coeffs;
        let mut total = 0.0;
        match mesh.dim() {
            1 => {
                for e in &mesh.elements {
                    let (i, j) = (e[0], e[1]);
                    let h = mesh.nodes[j].0 - mesh.nodes[i].0;
                    let d = x[j] - x[i];
                    total += d * d / h;
                }
            }
            _ => {
                let sgn = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
                for e in &mesh.elements {
                    let hx = mesh.nodes[e[1]].0 - mesh.nodes[e[0]].0;
                    let hy = mesh.nodes[e[3]].1 - mesh.nodes[e[0]].1;
                    for &(gx, wx) in GAUSS2.iter() {
                        for &(gy, wy) in GAUSS2.iter() {
                            let w = wx * wy * hx * hy / 4.0;
                            let mut ux = 0.0;
                            let mut uy = 0.0;
                            for a in 0..4 {
                                let (sa, ta) = sgn[a];
                                ux += x[e[a]] * 0.25 * sa * (1.0 + ta * gy) * 2.0 / hx;
                                uy += x[e[a]] * 0.25 * ta * (1.0 + sa * gx) * 2.0 / hy;
                            }
                            total += w * (ux * ux + uy * uy);
                        }
                    }
                }
            }
        }
        total
    }

    pub fn min_boundary(&self, u: &Field) -> f64 {
        self.mesh
            .boundary_nodes
            .iter()
            .map(|&i| u.coeffs[i])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_boundary(&self, u: &Field) -> f64 {
        self.mesh
            .boundary_nodes
            .iter()
            .map(|&i| u.coeffs[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Assembles K, M, M_bd on the mesh.
pub fn assemble(mesh: &Mesh) -> AssembledForms {
    let n = mesh.num_nodes();
    let mut k = SpMat::zeros(n);
    let mut m = SpMat::zeros(n);
    let mut m_bd = SpMat::zeros(n);

    match mesh.dim() {
        1 => {
            for e in &mesh.elements {
                let (i, j) = (e[0], e[1]);
                let h = mesh.nodes[j].0 - mesh.nodes[i].0;
                k.add(i, i, 1.0 / h);
                k.add(j, j, 1.0 / h);
                k.add(i, j, -1.0 / h);
                k.add(j, i, -1.0 / h);
                m.add(i, i, h / 3.0);
                m.add(j, j, h / 3.0);
                m.add(i, j, h / 6.0);
                m.add(j, i, h / 6.0);
            }
            // counting measure on the two endpoints
            for &b in &mesh.boundary_nodes {
                m_bd.add(b, b, 1.0);
            }
        }
        _ => {
            for e in &mesh.elements {
                let nodes: Vec<(f64, f64)> = e.iter().map(|&i| mesh.nodes[i]).collect();
                let hx = nodes[1].0 - nodes[0].0;
                let hy = nodes[3].1 - nodes[0].1;
                let (ke, me) = q1_element_matrices(hx, hy);
                for a in 0..4 {
                    for b in 0..4 {
                        k.add(e[a], e[b], ke[a][b]);
                        m.add(e[a], e[b], me[a][b]);
                    }
                }
            }
            for &(i, j) in &mesh.boundary_edges {
                let (xi, yi) = mesh.nodes[i];
                let (xj, yj) = mesh.nodes[j];
                let len = ((xj - xi).powi(2) + (yj - yi).powi(2)).sqrt();
                m_bd.add(i, i, len / 3.0);
                m_bd.add(j, j, len / 3.0);
                m_bd.add(i, j, len / 6.0);
                m_bd.add(j, i, len / 6.0);
            }
        }
    }
    AssembledForms {
        k,
        m,
        m_bd,
        mesh: mesh.clone(),
    }
}

/// Q1 stiffness and mass matrices on an hx-by-hy rectangle,
/// node order (0,0), (1,0), (1,1), (0,1) in reference coordinates.
fn q1_element_matrices(hx: f64, hy: f64) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let mut ke = [[0.0; 4]; 4];
    let mut me = [[0.0; 4]; 4];
    // shape functions on [-1,1]^2
    let sgn = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    for &(gx, wx) in GAUSS2.iter() {
        for &(gy, wy) in GAUSS2.iter() {
            let w = wx * wy * hx * hy / 4.0;
            for a in 0..4 {
                let (sa, ta) = sgn[a];
                let na = 0.25 * (1.0 + sa * gx) * (1.0 + ta * gy);
                let dna_dx = 0.25 * sa * (1.0 + ta * gy) * 2.0 / hx;
                let dna_dy = 0.25 * ta * (1.0 + sa * gx) * 2.0 / hy;
                for b in 0..4 {
                    let (sb, tb) = sgn[b];
                    let nb = 0.25 * (1.0 + sb * gx) * (1.0 + tb * gy);
                    let dnb_dx = 0.25 * sb * (1.0 + tb * gy) * 2.0 / hx;
                    let dnb_dy = 0.25 * tb * (1.0 + sb * gx) * 2.0 / hy;
                    ke[a][b] += w * (dna_dx * dnb_dx + dna_dy * dnb_dy);
                    me[a][b] += w * na * nb;
                }
            }
        }
    }
    (ke, me)
}

/// Interior reaction `f(t) = t - |t|^{p-1} t` (odd extension off the cone).
pub fn reaction(t: f64, p: f64) -> f64 {
    t - t.abs().powf(p - 1.0) * t
}

/// `f'(t) = 1 - p |t|^{p-1}`.
pub fn reaction_deriv(t: f64, p: f64) -> f64 {
    1.0 - p * t.abs().powf(p - 1.0)
}

/// Boundary harvest density `g_eps(t)`: `(t+eps)^{q-1} t` for `eps > 0`,
/// `max(t,0)^q` at `eps = 0`.
pub fn boundary_g(t: f64, q: f64, eps: f64) -> f64 {
    if eps > 0.0 {
        let base = (t + eps).max(eps * 1e-6);
        base.powf(q - 1.0) * t
    } else if t > 0.0 {
        t.powf(q)
    } else {
        0.0
    }
}

/// `g_eps'(t)`; for `eps = 0` callers must keep `t >= DELTA_J`.
pub fn boundary_g_deriv(t: f64, q: f64, eps: f64) -> f64 {
    if eps > 0.0 {
        let base = (t + eps).max(eps * 1e-6);
        (q - 1.0) * base.powf(q - 2.0) * t + base.powf(q - 1.0)
    } else {
        q * t.powf(q - 1.0)
    }
}

/// Load vector of a pointwise interior density: `out_i = int w(u_h) phi_i`
/// with 3-point Gauss per element (tensorized in 2D).
pub fn interior_load(forms: &AssembledForms, u: &[f64], w: impl Fn(f64) -> f64) -> Vec<f64> {
    let mesh = &forms.mesh;
    let mut out = vec![0.0; mesh.num_nodes()];
    match mesh.dim() {
        1 => {
            for e in &mesh.elements {
                let (i, j) = (e[0], e[1]);
                let h = mesh.nodes[j].0 - mesh.nodes[i].0;
                for &(g, wq) in GAUSS3.iter() {
                    let phi_i = 0.5 * (1.0 - g);
                    let phi_j = 0.5 * (1.0 + g);
                    let uh = u[i] * phi_i + u[j] * phi_j;
                    let val = w(uh) * wq * h / 2.0;
                    out[i] += val * phi_i;
                    out[j] += val * phi_j;
                }
            }
        }
        _ => {
            let sgn = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
            for e in &mesh.elements {
                let hx = mesh.nodes[e[1]].0 - mesh.nodes[e[0]].0;
                let hy = mesh.nodes[e[3]].1 - mesh.nodes[e[0]].1;
                for &(gx, wx) in GAUSS3.iter() {
                    for &(gy, wy) in GAUSS3.iter() {
                        let wq = wx * wy * hx * hy / 4.0;
                        let mut shp = [0.0; 4];
                        let mut uh = 0.0;
                        for a in 0..4 {
                            let (sa, ta) = sgn[a];
                            shp[a] = 0.25 * (1.0 + sa * gx) * (1.0 + ta * gy);
                            uh += u[e[a]] * shp[a];
                        }
                        let val = w(uh) * wq;
                        for a in 0..4 {
                            out[e[a]] += val * shp[a];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Weighted interior mass matrix `int w(u_h) phi_i phi_j`.
pub fn weighted_mass(forms: &AssembledForms, u: &[f64], w: impl Fn(f64) -> f64) -> SpMat {
    let mesh = &forms.mesh;
    let mut out = SpMat::zeros(mesh.num_nodes());
    match mesh.dim() {
        1 => {
            for e in &mesh.elements {
                let (i, j) = (e[0], e[1]);
                let h = mesh.nodes[j].0 - mesh.nodes[i].0;
                for &(g, wq) in GAUSS3.iter() {
                    let phi = [0.5 * (1.0 - g), 0.5 * (1.0 + g)];
                    let uh = u[i] * phi[0] + u[j] * phi[1];
                    let val = w(uh) * wq * h / 2.0;
                    let nodes = [i, j];
                    for a in 0..2 {
                        for b in 0..2 {
                            out.add(nodes[a], nodes[b], val * phi[a] * phi[b]);
                        }
                    }
                }
            }
        }
        _ => {
            let sgn = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
            for e in &mesh.elements {
                let hx = mesh.nodes[e[1]].0 - mesh.nodes[e[0]].0;
                let hy = mesh.nodes[e[3]].1 - mesh.nodes[e[0]].1;
                for &(gx, wx) in GAUSS3.iter() {
                    for &(gy, wy) in GAUSS3.iter() {
                        let wq = wx * wy * hx * hy / 4.0;
                        let mut shp = [0.0; 4];
                        let mut uh = 0.0;
                        for a in 0..4 {
                            let (sa, ta) = sgn[a];
                            shp[a] = 0.25 * (1.0 + sa * gx) * (1.0 + ta * gy);
                            uh += u[e[a]] * shp[a];
                        }
                        let val = w(uh) * wq;
                        for a in 0..4 {
                            for b in 0..4 {
                                out.add(e[a], e[b], val * shp[a] * shp[b]);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Boundary load of a pointwise density: `out_i = int_bd w(u_h) phi_i`.
/// 1D: exact endpoint evaluation under the counting measure.
pub fn boundary_load(forms: &AssembledForms, u: &[f64], w: impl Fn(f64) -> f64) -> Vec<f64> {
    let mesh = &forms.mesh;
    let mut out = vec![0.0; mesh.num_nodes()];
    if mesh.dim() == 1 {
        for &b in &mesh.boundary_nodes {
            out[b] = w(u[b]);
        }
    } else {
        for &(i, j) in &mesh.boundary_edges {
            let (xi, yi) = mesh.nodes[i];
            let (xj, yj) = mesh.nodes[j];
            let len = ((xj - xi).powi(2) + (yj - yi).powi(2)).sqrt();
            for &(g, wq) in GAUSS2.iter() {
                let phi = [0.5 * (1.0 - g), 0.5 * (1.0 + g)];
                let uh = u[i] * phi[0] + u[j] * phi[1];
                let val = w(uh) * wq * len / 2.0;
                out[i] += val * phi[0];
                out[j] += val * phi[1];
            }
        }
    }
    out
}

/// Weighted boundary mass matrix `int_bd w(u_h) phi_i phi_j`.
pub fn weighted_boundary_mass(forms: &AssembledForms, u: &[f64], w: impl Fn(f64) -> f64) -> SpMat {
    let mesh = &forms.mesh;
    let mut out = SpMat::zeros(mesh.num_nodes());
    if mesh.dim() == 1 {
        for &b in &mesh.boundary_nodes {
            out.add(b, b, w(u[b]));
        }
    } else {
        for &(i, j) in &mesh.boundary_edges {
            let (xi, yi) = mesh.nodes[i];
            let (xj, yj) = mesh.nodes[j];
            let len = ((xj - xi).powi(2) + (yj - yi).powi(2)).sqrt();
            let nodes = [i, j];
            for &(g, wq) in GAUSS2.iter() {
                let phi = [0.5 * (1.0 - g), 0.5 * (1.0 + g)];
                let uh = u[i] * phi[0] + u[j] * phi[1];
                let val = w(uh) * wq * len / 2.0;
                for a in 0..2 {
                    for b2 in 0..2 {
                        out.add(nodes[a], nodes[b2], val * phi[a] * phi[b2]);
                    }
                }
            }
        }
    }
    out
}

/// Residual of the original chart:
/// `R_i = (K u)_i - int f(u_h) phi_i + lambda int_bd g_eps(u_h) phi_i`.
pub fn residual(forms: &AssembledForms, u: &Field, params: &ProblemParams) -> Result<Vec<f64>> {
    forms.check_field(u)?;
    let (p, q, eps, lambda) = (params.p, params.q, params.eps, params.lambda);
    let mut r = forms.k.matvec(&u.coeffs);
    let f_load = interior_load(forms, &u.coeffs, |t| reaction(t, p));
    let g_load = boundary_load(forms, &u.coeffs, |t| boundary_g(t, q, eps));
    for i in 0..r.len() {
        r[i] += -f_load[i] + lambda * g_load[i];
    }
    Ok(r)
}

/// Jacobian `J = K - M_{f'(u)} + lambda M_{bd, g_eps'(u)}`.
pub fn jacobian(forms: &AssembledForms, u: &Field, params: &ProblemParams) -> Result<SpMat> {
    forms.check_field(u)?;
    let (p, q, eps, lambda) = (params.p, params.q, params.eps, params.lambda);
    if eps == 0.0 {
        let min_bd = forms.min_boundary(u);
        if min_bd < DELTA_J {
            return Err(Error::NonDifferentiableBoundary {
                value: min_bd,
                floor: DELTA_J,
            });
        }
    }
    let mf = weighted_mass(forms, &u.coeffs, |t| reaction_deriv(t, p));
    let mg = weighted_boundary_mass(forms, &u.coeffs, |t| boundary_g_deriv(t, q, eps));
    Ok(forms.k.add_scaled(&mf, -1.0).add_scaled(&mg, lambda))
}

/// Residual of the rescaled chart (reaction `v - mu v^p`, unit boundary
/// coefficient): `R_i = (K v)_i - int (v_h - mu |v_h|^{p-1} v_h) phi_i
/// + int_bd g_eps(v_h) phi_i`.
pub fn residual_rescaled(
    forms: &AssembledForms,
    v: &Field,
    params: &ProblemParams,
) -> Result<Vec<f64>> {
    forms.check_field(v)?;
    let (p, q, eps, mu) = (params.p, params.q, params.eps, params.mu);
    let mut r = forms.k.matvec(&v.coeffs);
    let f_load = interior_load(forms, &v.coeffs, |t| t - mu * t.abs().powf(p - 1.0) * t);
    let g_load = boundary_load(forms, &v.coeffs, |t| boundary_g(t, q, eps));
    for i in 0..r.len() {
        r[i] += -f_load[i] + g_load[i];
    }
    Ok(r)
}

/// Jacobian of the rescaled residual.
pub fn jacobian_rescaled(
    forms: &AssembledForms,
    v: &Field,
    params: &ProblemParams,
) -> Result<SpMat> {
    forms.check_field(v)?;
    let (p, q, eps, mu) = (params.p, params.q, params.eps, params.mu);
    if eps == 0.0 {
        let min_bd = forms.min_boundary(v);
        if min_bd < DELTA_J {
            return Err(Error::NonDifferentiableBoundary {
                value: min_bd,
                floor: DELTA_J,
            });
        }
    }
    let mf = weighted_mass(forms, &v.coeffs, |t| 1.0 - mu * p * t.abs().powf(p - 1.0));
    let mg = weighted_boundary_mass(forms, &v.coeffs, |t| boundary_g_deriv(t, q, eps));
    Ok(forms.k.add_scaled(&mf, -1.0).add_scaled(&mg, 1.0))
}

/// Chart change `(u, lambda) -> (v, mu)`: `v = lambda^{-1/(1-q)} u`,
/// `mu = lambda^{(p-1)/(1-q)}`.
pub fn rescale_chart(u: &Field, lambda: f64, params: &ProblemParams) -> Result<(Field, f64)> {
    if lambda <= 0.0 {
        return Err(Error::InvalidParams(
            "chart change requires lambda > 0".into(),
        ));
    }
    let s = lambda.powf(-1.0 / (1.0 - params.q));
    let mu = lambda.powf((params.p - 1.0) / (1.0 - params.q));
    Ok((u.scaled(s), mu))
}

/// Inverse chart change `(v, mu) -> (u, lambda)`.
pub fn rescale_chart_inverse(v: &Field, mu: f64, params: &ProblemParams) -> Result<(Field, f64)> {
    if mu <= 0.0 {
        return Err(Error::InvalidParams(
            "inverse chart change requires mu > 0".into(),
        ));
    }
    let lambda = mu.powf((1.0 - params.q) / (params.p - 1.0));
    Ok((v.scaled(lambda.powf(1.0 / (1.0 - params.q))), lambda))
}
