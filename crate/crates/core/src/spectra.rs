//! Principal eigenvalues: the Dirichlet value `lambda_Omega`, the boundary
//! eigenvalue `sigma_1`, the auxiliary family `gamma_1(sigma)`, the linearized
//! stability eigenvalue, and the regularized bifurcation value `lambda_eps`.
//!
//! The boundary pencil `(K - M) psi = sigma M_bd psi` is singular (`M_bd` has
//! rank equal to the number of boundary nodes), so `sigma_1` is obtained as
//! the root of the strictly decreasing map `sigma -> gamma_1(sigma)`, where
//! `gamma_1(sigma)` is the smallest eigenvalue of the definite pencil
//! `(K - M - sigma M_bd) psi = gamma (M + M_bd) psi`.

use crate::assembly::{boundary_g_deriv, reaction_deriv, weighted_boundary_mass, weighted_mass,
    AssembledForms, Field, ProblemParams, DELTA_J};
use crate::error::{Error, Result};
use crate::linalg::{norm_inf, scale_in_place, smallest_pencil_eig};

/// Pencil eigensolve tolerance used throughout.
const EIG_TOL: f64 = 1e-10;

/// Principal eigenpair with the vector stored as a nodal field.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub value: f64,
    pub vector: Field,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Gap to the next eigenvalue, when the solve computed it.
    pub gap: Option<f64>,
}

/// Stability classification by the sign of the linearized `gamma_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

/// Sign tolerance for the stability label.
pub const STABILITY_TOL: f64 = 1e-8;

pub fn classify_stability(gamma1: f64) -> Stability {
    if gamma1 > STABILITY_TOL {
        Stability::Stable
    } else if gamma1 < -STABILITY_TOL {
        Stability::Unstable
    } else {
        Stability::Marginal
    }
}

/// Flips sign so the dominant part is positive, then scales to sup-norm 1.
fn normalize_positive(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    if sum < 0.0 {
        scale_in_place(v, -1.0);
    }
    let m = norm_inf(v);
    if m > 0.0 {
        scale_in_place(v, 1.0 / m);
    }
}

/// Smallest Dirichlet eigenvalue of `K0 x = lambda M0 x` on the interior
/// nodes; the eigenvector is extended by zero to the boundary and normalized
/// to sup-norm 1 (positive).
pub fn lambda_omega(forms: &AssembledForms) -> Result<EigenResult> {
    let interior = forms.mesh.interior_nodes();
    if interior.is_empty() {
        return Err(Error::InvalidParams("mesh has no interior node".into()));
    }
    let k0 = forms.k.restrict(&interior);
    let m0 = forms.m.restrict(&interior);
    let e = smallest_pencil_eig(&k0, &m0, EIG_TOL, true)?;
    let mut full = vec![0.0; forms.n()];
    for (k, &i) in interior.iter().enumerate() {
        full[i] = e.vector[k];
    }
    normalize_positive(&mut full);
    Ok(EigenResult {
        value: e.value,
        vector: Field::from_raw(forms.mesh.id(), full),
        residual_norm: e.residual_norm,
        iterations: e.iterations,
        gap: e.gap,
    })
}

/// Smallest eigenvalue `gamma_1(sigma)` of
/// `(K - M - sigma M_bd) psi = gamma (M + M_bd) psi`.
pub fn gamma1_of_sigma(forms: &AssembledForms, sigma: f64) -> Result<EigenResult> {
    let a = forms
        .k
        .add_scaled(&forms.m, -1.0)
        .add_scaled(&forms.m_bd, -sigma);
    let b = forms.m.add_scaled(&forms.m_bd, 1.0);
    let e = smallest_pencil_eig(&a, &b, EIG_TOL, false)?;
    let mut v = e.vector;
    normalize_positive(&mut v);
    Ok(EigenResult {
        value: e.value,
        vector: Field::from_raw(forms.mesh.id(), v),
        residual_norm: e.residual_norm,
        iterations: e.iterations,
        gap: e.gap,
    })
}

/// Principal boundary eigenvalue `sigma_1 < 0`, defined when
/// `lambda_Omega > 1`, as the root of `gamma_1(sigma) = 0`.
pub fn sigma1(forms: &AssembledForms) -> Result<EigenResult> {
    let lam_om = lambda_omega(forms)?.value;
    if lam_om <= 1.0 {
        return Err(Error::LambdaOmegaNotGreaterThanOne {
            lambda_omega: lam_om,
        });
    }
    // gamma_1 is strictly decreasing in sigma; gamma_1(0) < 0 (constants give
    // a negative Rayleigh quotient) and gamma_1 -> positive values as
    // sigma -> -infinity because lambda_Omega > 1.
    let mut hi = 0.0;
    let mut g_hi = gamma1_of_sigma(forms, hi)?.value;
    if g_hi > 0.0 {
        // sigma_1 would be positive, contradicting the theory; treat as failure
        return Err(Error::EigenFailed(format!(
            "gamma_1(0) = {g_hi} > 0, no negative principal value"
        )));
    }
    let mut lo = -1.0;
    let mut g_lo = gamma1_of_sigma(forms, lo)?.value;
    let mut tries = 0;
    while g_lo < 0.0 {
        hi = lo;
        g_hi = g_lo;
        lo *= 2.0;
        g_lo = gamma1_of_sigma(forms, lo)?.value;
        tries += 1;
        if tries > 60 {
            return Err(Error::EigenFailed(
                "failed to bracket the root of gamma_1(sigma)".into(),
            ));
        }
    }
    // bracketed: g_lo >= 0 >= g_hi; secant with bisection safeguard
    let mut best = gamma1_of_sigma(forms, 0.5 * (lo + hi))?;
    let mut sigma = 0.5 * (lo + hi);
    for _ in 0..80 {
        let g = best.value;
        if g.abs() < 1e-12 || hi - lo < 1e-13 * (1.0 + sigma.abs()) {
            break;
        }
        if g < 0.0 {
            hi = sigma;
            g_hi = g;
        } else {
            lo = sigma;
            g_lo = g;
        }
        // secant proposal inside the bracket, bisection fallback
        let denom = g_hi - g_lo;
        let mut next = if denom.abs() > 0.0 {
            lo - g_lo * (hi - lo) / denom
        } else {
            0.5 * (lo + hi)
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        sigma = next;
        best = gamma1_of_sigma(forms, sigma)?;
    }
    let mut v = best.vector.coeffs;
    normalize_positive(&mut v);
    Ok(EigenResult {
        value: sigma,
        vector: Field::from_raw(forms.mesh.id(), v),
        residual_norm: best.residual_norm,
        iterations: best.iterations,
        gap: best.gap,
    })
}

/// Smallest eigenvalue of the linearized pencil
/// `(K - M_{f'(u)} + lambda M_{bd, g'(u)}) phi = gamma (M + M_bd) phi`.
pub fn gamma1_linearized(
    forms: &AssembledForms,
    u: &Field,
    params: &ProblemParams,
) -> Result<EigenResult> {
    forms.check_field(u)?;
    let (p, q, eps, lambda) = (params.p, params.q, params.eps, params.lambda);
    if eps == 0.0 && lambda != 0.0 {
        let min_bd = forms.min_boundary(u);
        if min_bd < DELTA_J {
            return Err(Error::NonDifferentiableBoundary {
                value: min_bd,
                floor: DELTA_J,
            });
        }
    }
    let mf = weighted_mass(forms, &u.coeffs, |t| reaction_deriv(t, p));
    let a = if lambda == 0.0 {
        forms.k.add_scaled(&mf, -1.0)
    } else {
        let mg = weighted_boundary_mass(forms, &u.coeffs, |t| boundary_g_deriv(t, q, eps));
        forms.k.add_scaled(&mf, -1.0).add_scaled(&mg, lambda)
    };
    let b = forms.m.add_scaled(&forms.m_bd, 1.0);
    let e = smallest_pencil_eig(&a, &b, EIG_TOL, false)?;
    let mut v = e.vector;
    normalize_positive(&mut v);
    Ok(EigenResult {
        value: e.value,
        vector: Field::from_raw(forms.mesh.id(), v),
        residual_norm: e.residual_norm,
        iterations: e.iterations,
        gap: e.gap,
    })
}

/// Regularized bifurcation value `lambda_eps = (-sigma_1) eps^{1-q}`.
pub fn lambda_eps(forms: &AssembledForms, eps: f64, q: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParams(format!(
            "eps must lie in (0,1), got {eps}"
        )));
    }
    let s1 = sigma1(forms)?.value;
    Ok(-s1 * eps.powf(1.0 - q))
}
