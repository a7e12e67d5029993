//! Energy functionals and the fibering-map machinery: the triple (E, A, B),
//! the functionals J_lambda and I_mu, fibering roots and the two-root
//! threshold, Nehari classification, the explicit constants c_plus(lambda)
//! and c_minus(mu), and sampled estimates of the thresholds lambda_star and
//! mu_star.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assembly::{boundary_load, interior_load, AssembledForms, Field, ProblemParams};
use crate::error::{Error, Result};
use crate::spectra::lambda_omega;

/// The three energies: `E = int |grad u|^2 - u^2`, `A = int |u|^{p+1}`,
/// `B = int_bd |u|^{q+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTriple {
    pub e: f64,
    pub a: f64,
    pub b: f64,
}

/// Nehari classification of a field by the fibering second derivative at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NehariClass {
    /// Local minimum along the ray: `j''(1) > 0`.
    Plus,
    /// Local maximum along the ray: `j''(1) < 0`.
    Minus,
    NotOnNehari,
    /// Tangency: on the manifold with `j''(1)` at numerical zero.
    Degenerate,
}

/// Output of the fibering analysis of one field.
#[derive(Debug, Clone)]
pub struct FiberingReport {
    pub triple: EnergyTriple,
    /// Minimizer of the reduced map `t -> t^{1-q}E + t^{p-q}A`.
    pub t0: f64,
    /// Positive roots of `j'_u(t) = 0`, ascending; zero, one, or two entries.
    pub roots: Vec<f64>,
    /// Largest lambda admitting two roots along this ray.
    pub threshold: f64,
    pub classification: NehariClass,
}

/// Relative tolerance deciding membership of the discrete Nehari set.
const NEHARI_TOL: f64 = 1e-8;

/// Computes (E, A, B) for a field.
pub fn energies(forms: &AssembledForms, u: &Field, params: &ProblemParams) -> Result<EnergyTriple> {
    forms.check_field(u)?;
    let e = forms.dirichlet_form(u) - forms.m.quadratic_form(&u.coeffs);
    let a = interior_load(forms, &u.coeffs, |t| t.abs().powf(params.p + 1.0))
        .iter()
        .sum();
    let b = boundary_load(forms, &u.coeffs, |t| t.abs().powf(params.q + 1.0))
        .iter()
        .sum();
    Ok(EnergyTriple { e, a, b })
}

/// `J_lambda(u) = E/2 + A/(p+1) + lambda B/(q+1)`.
pub fn j_lambda(forms: &AssembledForms, u: &Field, params: &ProblemParams) -> Result<f64> {
    let t = energies(forms, u, params)?;
    Ok(j_lambda_of(&t, params))
}

pub fn j_lambda_of(t: &EnergyTriple, params: &ProblemParams) -> f64 {
    t.e / 2.0 + t.a / (params.p + 1.0) + params.lambda * t.b / (params.q + 1.0)
}

/// `I_mu(v) = E/2 + mu A/(p+1) + B/(q+1)` (rescaled chart).
pub fn i_mu(forms: &AssembledForms, v: &Field, params: &ProblemParams) -> Result<f64> {
    let t = energies(forms, v, params)?;
    Ok(i_mu_of(&t, params))
}

pub fn i_mu_of(t: &EnergyTriple, params: &ProblemParams) -> f64 {
    t.e / 2.0 + params.mu * t.a / (params.p + 1.0) + t.b / (params.q + 1.0)
}

/// Right side of the two-root criterion: the largest coefficient of the
/// constant term `cB` admitting two roots of
/// `t^{1-q}E + t^{p-q}A + cB = 0`. Scale-invariant of degree 0 in the field.
fn two_root_threshold(e: f64, a: f64, b: f64, p: f64, q: f64) -> f64 {
    let k = (p - 1.0) / (p - q) * ((1.0 - q) / (p - q)).powf((1.0 - q) / (p - 1.0));
    k * (-e / (a.powf((1.0 - q) / (p - q)) * b.powf((p - 1.0) / (p - q))))
        .powf((p - q) / (p - 1.0))
}

/// Reduced fibering map `jt(t) = t^{1-q}E + t^{p-q}A + cB` and its positive
/// roots; `c` is `lambda` in the original chart. `jt` is decreasing on
/// `(0, t0]` and increasing on `[t0, inf)`, so each side holds at most one
/// root, found by bracketed bisection/Newton.
fn reduced_roots(e: f64, a: f64, cb: f64, p: f64, q: f64) -> (f64, Vec<f64>) {
    let t0 = ((1.0 - q) / (p - q) * (-e) / a).powf(1.0 / (p - 1.0));
    let jt = |t: f64| t.powf(1.0 - q) * e + t.powf(p - q) * a + cb;
    if cb == 0.0 {
        // boundary term absent: single root of E + t^{p-1} A
        return (t0, vec![(-e / a).powf(1.0 / (p - 1.0))]);
    }
    let jt0 = jt(t0);
    let scale = (-e) * t0.powf(1.0 - q) + cb;
    if jt0 > 1e-12 * scale.abs().max(1.0) {
        return (t0, Vec::new());
    }
    if jt0 > -1e-12 * scale.abs().max(1.0) {
        // tangency
        return (t0, vec![t0]);
    }
    let tmax = ((-e + cb) / a).powf(1.0 / (p - 1.0)) + 1.0;
    let left = bisect_root(&jt, 1e-300, t0);
    let right = bisect_root(&jt, t0, tmax);
    (t0, vec![left, right])
}

/// Bisection for a sign change known to exist on `[lo, hi]`, refined to
/// machine accuracy (the map is monotone on the bracket).
fn bisect_root(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn classify(triple: &EnergyTriple, lambda_b_coeff: f64, p: f64, q: f64) -> NehariClass {
    let (e, a) = (triple.e, triple.a);
    let scale = e.abs() + a + lambda_b_coeff.abs();
    if (e + a + lambda_b_coeff).abs() >= NEHARI_TOL * scale.max(1e-300) {
        return NehariClass::NotOnNehari;
    }
    // on the manifold: j''(1) reduces to (1-q)E + (p-q)A
    let second = (1.0 - q) * e + (p - q) * a;
    if second > NEHARI_TOL * scale {
        NehariClass::Plus
    } else if second < -NEHARI_TOL * scale {
        NehariClass::Minus
    } else {
        NehariClass::Degenerate
    }
}

fn fibering_from_triple(triple: EnergyTriple, cb: f64, p: f64, q: f64) -> Result<FiberingReport> {
    if triple.a <= 0.0 {
        return Err(Error::NotInCone(format!("A = {} must be positive", triple.a)));
    }
    if triple.e >= 0.0 {
        return Err(Error::NotInCone(format!(
            "E = {} must be negative for the root analysis",
            triple.e
        )));
    }
    let threshold = if triple.b > 0.0 {
        two_root_threshold(triple.e, triple.a, triple.b, p, q)
    } else {
        f64::INFINITY
    };
    let (t0, roots) = reduced_roots(triple.e, triple.a, cb * triple.b, p, q);
    let classification = classify(&triple, cb * triple.b, p, q);
    Ok(FiberingReport {
        triple,
        t0,
        roots,
        threshold,
        classification,
    })
}

/// Fibering analysis of the ray through `u` in the original chart
/// (constant-term coefficient `lambda`).
pub fn fibering(forms: &AssembledForms, u: &Field, params: &ProblemParams) -> Result<FiberingReport> {
    let triple = energies(forms, u, params)?;
    fibering_from_triple(triple, params.lambda, params.p, params.q)
}

/// Fibering analysis in the rescaled chart: roots of
/// `t^{1-q}E + mu t^{p-q}A + B = 0`. Two roots iff `mu` is below the
/// chart's own threshold.
pub fn fibering_mu(forms: &AssembledForms, v: &Field, params: &ProblemParams) -> Result<FiberingReport> {
    let triple = energies(forms, v, params)?;
    if triple.a <= 0.0 {
        return Err(Error::NotInCone(format!("A = {} must be positive", triple.a)));
    }
    if triple.e >= 0.0 {
        return Err(Error::NotInCone(format!(
            "E = {} must be negative for the root analysis",
            triple.e
        )));
    }
    let (p, q, mu) = (params.p, params.q, params.mu);
    // mu-threshold along this ray: largest mu admitting two roots
    let threshold = if mu >= 0.0 && triple.b > 0.0 {
        let k = (p - 1.0) / (p - q) * ((1.0 - q) / (p - q)).powf((1.0 - q) / (p - 1.0));
        (k * (-triple.e).powf((p - q) / (p - 1.0))
            / (triple.a.powf((1.0 - q) / (p - 1.0)) * triple.b))
            .powf((p - 1.0) / (1.0 - q))
    } else {
        f64::INFINITY
    };
    let (t0, roots) = if mu > 0.0 {
        reduced_roots(triple.e, mu * triple.a, triple.b, p, q)
    } else {
        // mu = 0: jt(t) = t^{1-q}E + B, single root
        (f64::INFINITY, vec![(triple.b / -triple.e).powf(1.0 / (1.0 - q))])
    };
    let classification = {
        // j''(1) on the manifold E + mu A + B = 0 reduces the same way with
        // the roles of A-term coefficient mu A
        let t = EnergyTriple {
            e: triple.e,
            a: mu * triple.a,
            b: triple.b,
        };
        classify(&t, triple.b, p, q)
    };
    Ok(FiberingReport {
        triple,
        t0,
        roots,
        threshold,
        classification,
    })
}

/// Unique constant on the `N_lambda^+` side: root of
/// `c^{1-q} - c^{p-q} = lambda |bd| / |dom|` with `c` on the decreasing side
/// of the scalar map, i.e. `c in (((1-q)/(p-q))^{1/(p-1)}, 1]`.
pub fn c_plus(params: &ProblemParams, volume: f64, surface: f64) -> Result<f64> {
    let (p, q, lambda) = (params.p, params.q, params.lambda);
    let rhs = lambda * surface / volume;
    let g = |c: f64| c.powf(1.0 - q) - c.powf(p - q);
    if lambda == 0.0 {
        return Ok(1.0);
    }
    let c_top = ((1.0 - q) / (p - q)).powf(1.0 / (p - 1.0));
    if rhs > g(c_top) {
        return Err(Error::NoConstantSolution(format!(
            "lambda |bd|/|dom| = {rhs} exceeds the maximum {} of c^(1-q) - c^(p-q)",
            g(c_top)
        )));
    }
    Ok(bisect_root(&|c| g(c) - rhs, c_top, 1.0))
}

/// Unique constant on the `M_mu^-` side: root of
/// `mu = c^{-(p-1)} - c^{-(p-q)} |bd|/|dom|` on the increasing side,
/// `c in (r^{1/(1-q)}, ((p-q)/(p-1))^{1/(1-q)} r^{1/(1-q)})` with
/// `r = |bd|/|dom|`; `c -> r^{1/(1-q)}` as `mu -> 0`.
pub fn c_minus(params: &ProblemParams, volume: f64, surface: f64) -> Result<f64> {
    let (p, q, mu) = (params.p, params.q, params.mu);
    let r = surface / volume;
    let h = |c: f64| c.powf(-(p - 1.0)) - r * c.powf(-(p - q));
    let c_lo = r.powf(1.0 / (1.0 - q));
    let c_top = ((p - q) / (p - 1.0)).powf(1.0 / (1.0 - q)) * c_lo;
    if mu <= 0.0 || mu >= h(c_top) {
        return Err(Error::NoConstantSolution(format!(
            "mu = {mu} outside (0, {})",
            h(c_top)
        )));
    }
    Ok(bisect_root(&|c| h(c) - mu, c_lo, c_top))
}

/// Boundary-energy lower-bound coefficient: on the lower-branch side of the
/// rescaled Nehari set, `I_mu(v) >= coef * B(v)`.
pub fn boundary_bound_coefficient(p: f64, q: f64) -> f64 {
    (p - q) * (1.0 - q) / (2.0 * (p + 1.0) * (q + 1.0))
}

/// Deterministic sample fields used by the infimum estimators: constants,
/// perturbed constants, and bump-modulated fields, all positive on the
/// closed domain.
pub fn sample_fields(forms: &AssembledForms, samples: usize, seed: u64) -> Vec<Field> {
    let mesh = &forms.mesh;
    let (x_lo, x_hi) = mesh
        .nodes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
            (lo.min(x), hi.max(x))
        });
    let lx = x_hi - x_lo;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    for k in 0..samples {
        let field = match k % 3 {
            0 => {
                let c: f64 = rng.gen_range(0.05..1.0);
                Field::constant(mesh, c)
            }
            1 => {
                let c: f64 = rng.gen_range(0.1..0.9);
                let amp: f64 = rng.gen_range(0.0..0.8) * c;
                let freq: f64 = rng.gen_range(0.5..4.0);
                let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                Field::from_fn(mesh, |x, y| {
                    c + amp
                        * ((freq * std::f64::consts::PI * (x - x_lo) / lx + phase).cos())
                        * (1.0 + 0.3 * (2.0 * y).sin())
                        / 1.3
                })
            }
            _ => {
                let base: f64 = rng.gen_range(0.05..0.4);
                let height: f64 = rng.gen_range(0.1..0.6);
                let x0: f64 = rng.gen_range(x_lo..x_hi);
                let w: f64 = rng.gen_range(0.1..0.6) * lx;
                Field::from_fn(mesh, |x, _| {
                    base + height * (-((x - x0) / w).powi(2)).exp()
                })
            }
        };
        out.push(field);
    }
    out
}

/// Sampled upper bound on `lambda_star(delta) = inf` of the two-root
/// threshold over `F_delta = {E + A <= 0, ||u||_{L2} >= delta, A > 0, B > 0}`.
/// Each candidate is projected into the set by scaling to `||u|| = delta`
/// (the most favorable admissible scale for the sign constraint); the
/// threshold itself is scale-invariant. Always includes `u = 1/2`.
pub fn lambda_star_estimate(
    forms: &AssembledForms,
    delta: f64,
    params: &ProblemParams,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let vol = forms.mesh.volume();
    if !(delta > 0.0 && delta <= vol.sqrt() / 2.0) {
        return Err(Error::InvalidParams(format!(
            "delta must lie in (0, |dom|^(1/2)/2], got {delta}"
        )));
    }
    let mut candidates = vec![Field::constant(&forms.mesh, 0.5)];
    candidates.extend(sample_fields(forms, samples, seed));
    let mut best = f64::INFINITY;
    for u in &candidates {
        let t = energies(forms, u, params)?;
        if t.a <= 0.0 || t.b <= 0.0 || t.e >= 0.0 {
            continue;
        }
        let norm = forms.l2_norm(u);
        if norm == 0.0 {
            continue;
        }
        // scale to the smallest admissible norm
        let s = delta / norm;
        // E + A <= 0 after scaling: s^2 E + s^{p+1} A <= 0
        if s * s * t.e + s.powf(params.p + 1.0) * t.a > 0.0 {
            continue;
        }
        let thr = two_root_threshold(t.e, t.a, t.b, params.p, params.q);
        best = best.min(thr);
    }
    if !best.is_finite() {
        return Err(Error::NoSolution(
            "no admissible sample found for lambda_star".into(),
        ));
    }
    Ok(best)
}

/// Sampled upper bound on `mu_star(delta) = inf` of the rescaled-chart
/// two-root threshold over `G_delta = {E + B <= 0, ||v||_{L2} <= delta}`.
/// Includes the constant `(|bd|/|dom|)^{1/(1-q)}`. Requires
/// `lambda_Omega > 1`.
pub fn mu_star_estimate(
    forms: &AssembledForms,
    delta: f64,
    params: &ProblemParams,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let lam_om = lambda_omega(forms)?.value;
    if lam_om <= 1.0 {
        return Err(Error::PreconditionLambdaOmega(format!(
            "mu_star needs lambda_Omega > 1, got {lam_om}"
        )));
    }
    let vol = forms.mesh.volume();
    let sur = forms.mesh.surface();
    let q = params.q;
    let c0 = (sur / vol).powf(1.0 / (1.0 - q));
    let delta_min = c0 * vol.sqrt();
    if delta < delta_min * (1.0 - 1e-12) {
        return Err(Error::InvalidParams(format!(
            "delta must be at least {delta_min} so the reference constant is admissible"
        )));
    }
    let mut candidates = vec![Field::constant(&forms.mesh, c0)];
    candidates.extend(
        sample_fields(forms, samples, seed)
            .into_iter()
            .map(|f| f.scaled(2.0 * c0)),
    );
    let p = params.p;
    let k = (p - 1.0) / (p - q) * ((1.0 - q) / (p - q)).powf((1.0 - q) / (p - 1.0));
    let mut best = f64::INFINITY;
    for v in &candidates {
        let t = energies(forms, v, params)?;
        if t.a <= 0.0 || t.b <= 0.0 || t.e >= 0.0 {
            continue;
        }
        let norm = forms.l2_norm(v);
        if norm == 0.0 {
            continue;
        }
        // scale to the largest admissible norm
        let s = delta / norm;
        if s * s * t.e + s.powf(q + 1.0) * t.b > 1e-14 * t.b {
            continue;
        }
        let thr = (k * (-t.e).powf((p - q) / (p - 1.0))
            / (t.a.powf((1.0 - q) / (p - 1.0)) * t.b))
            .powf((p - 1.0) / (1.0 - q));
        best = best.min(thr);
    }
    if !best.is_finite() {
        return Err(Error::NoSolution(
            "no admissible sample found for mu_star".into(),
        ));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::domain::{build_mesh, DomainSpec};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn forms_on(a: f64, b: f64, n: usize) -> AssembledForms {
        assemble(&build_mesh(DomainSpec::interval(a, b).unwrap(), n).unwrap())
    }

    #[test]
    fn energies_of_constants() {
        let forms = forms_on(0.0, 1.0, 64);
        let params = ProblemParams::new(2.0, 0.5, 0.0).unwrap();
        let t = energies(&forms, &Field::constant(&forms.mesh, 1.0), &params).unwrap();
        assert!((t.e + 1.0).abs() < 1e-12);
        assert!((t.a - 1.0).abs() < 1e-12);
        assert!((t.b - 2.0).abs() < 1e-13);
        let c = 0.7;
        let t = energies(&forms, &Field::constant(&forms.mesh, c), &params).unwrap();
        assert!((t.e + c * c).abs() < 1e-12);
        assert!((t.a - c.powf(3.0)).abs() < 1e-12);
        assert!((t.b - 2.0 * c.powf(1.5)).abs() < 1e-13);
    }

    #[test]
    fn dirichlet_eigenfunction_energy_identity() {
        let forms = forms_on(0.0, PI / 2.0, 256);
        let params = ProblemParams::new(2.0, 0.5, 0.0).unwrap();
        let e = lambda_omega(&forms).unwrap();
        let t = energies(&forms, &e.vector, &params).unwrap();
        assert!(t.b.abs() < 1e-12);
        let l2sq = forms.m.quadratic_form(&e.vector.coeffs);
        assert!((t.e - (e.value - 1.0) * l2sq).abs() < 1e-8 * l2sq.max(1.0));
    }

    #[test]
    fn j_value_hand_example() {
        let forms = forms_on(0.0, 1.0, 64);
        let params = ProblemParams::new(2.0, 0.5, 0.1).unwrap();
        let j = j_lambda(&forms, &Field::constant(&forms.mesh, 1.0), &params).unwrap();
        let expect = -0.5 + 1.0 / 3.0 + 0.1 * 2.0 / 1.5;
        assert!((j - expect).abs() < 1e-12, "{j} vs {expect}");
        let j0 = j_lambda(&forms, &Field::constant(&forms.mesh, 0.0), &params).unwrap();
        assert!(j0.abs() < 1e-14);
    }

    #[test]
    fn j_coercivity_sampled() {
        // J(u) >= ||u||^2/2 - C with a lambda-independent C on a sample
        let forms = forms_on(0.0, 1.0, 48);
        let fields = sample_fields(&forms, 60, 11);
        // calibrate C at lambda = 0 (smaller lambda only raises J)
        let params0 = ProblemParams::new(2.0, 0.5, 0.0).unwrap();
        let mut c_cal: f64 = 0.0;
        for f in &fields {
            let h1 = forms.h1_norm(f);
            let j = j_lambda(&forms, f, &params0).unwrap();
            c_cal = c_cal.max(h1 * h1 / 2.0 - j);
        }
        for lambda in [0.0, 0.1, 1.0, 10.0] {
            let params = ProblemParams::new(2.0, 0.5, lambda).unwrap();
            for f in &fields {
                let scaled = f.scaled(3.0);
                let h1 = forms.h1_norm(&scaled);
                let j = j_lambda(&forms, &scaled, &params).unwrap();
                assert!(j >= h1 * h1 / 2.0 - (c_cal + 1e-9) * 27.0);
            }
        }
    }

    #[test]
    fn threshold_frozen_value() {
        // (E, A, B) = (-1, 1, 2), p = 2, q = 1/2
        let thr = two_root_threshold(-1.0, 1.0, 2.0, 2.0, 0.5);
        assert!((thr - 0.192450089729875).abs() < 1e-12, "{thr}");
    }

    #[test]
    fn fibering_single_root_when_lambda_zero() {
        let forms = forms_on(0.0, 1.0, 32);
        let params = ProblemParams::new(2.0, 0.5, 0.0).unwrap();
        let u = Field::constant(&forms.mesh, 1.0);
        let rep = fibering(&forms, &u, &params).unwrap();
        assert_eq!(rep.roots.len(), 1);
        assert!((rep.roots[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fibering_two_roots_below_threshold() {
        let forms = forms_on(0.0, 1.0, 64);
        let u = Field::constant(&forms.mesh, 1.0);
        for frac in [0.25, 0.5, 0.9] {
            let thr = 0.192450089729875;
            let params = ProblemParams::new(2.0, 0.5, frac * thr).unwrap();
            let rep = fibering(&forms, &u, &params).unwrap();
            assert_eq!(rep.roots.len(), 2, "frac {frac}");
            let (t1, t2) = (rep.roots[0], rep.roots[1]);
            assert!(0.0 < t1 && t1 < rep.t0 && rep.t0 < t2);
            // root residuals on the reduced map
            let jt = |t: f64| {
                t.powf(0.5) * rep.triple.e + t.powf(1.5) * rep.triple.a
                    + params.lambda * rep.triple.b
            };
            assert!(jt(t1).abs() < 1e-10 && jt(t2).abs() < 1e-10);
            // between the roots jt < 0, outside > 0
            assert!(jt(0.5 * (t1 + t2)) < 0.0);
            assert!(jt(0.5 * t1) > 0.0 && jt(2.0 * t2) > 0.0);
            // second-derivative signs at the scaled fields
            let u1 = u.scaled(t1);
            let u2 = u.scaled(t2);
            let r1 = fibering(&forms, &u1, &params).unwrap();
            let r2 = fibering(&forms, &u2, &params).unwrap();
            assert_eq!(r1.classification, NehariClass::Minus);
            assert_eq!(r2.classification, NehariClass::Plus);
        }
        let params = ProblemParams::new(2.0, 0.5, 0.25).unwrap();
        let rep = fibering(&forms, &u, &params).unwrap();
        assert!(rep.roots.is_empty(), "above threshold");
    }

    #[test]
    fn fibering_rejects_out_of_cone() {
        let forms = forms_on(0.0, 1.0, 32);
        let params = ProblemParams::new(2.0, 0.5, 0.1).unwrap();
        let zero = Field::constant(&forms.mesh, 0.0);
        assert!(matches!(
            fibering(&forms, &zero, &params),
            Err(Error::NotInCone(_))
        ));
        // E >= 0: highly oscillatory field
        let osc = Field::from_fn(&forms.mesh, |x, _| (40.0 * x).sin() + 1.5);
        let t = energies(&forms, &osc, &params).unwrap();
        assert!(t.e > 0.0);
        assert!(matches!(
            fibering(&forms, &osc, &params),
            Err(Error::NotInCone(_))
        ));
    }

    #[test]
    fn nehari_classification_matches_sign_rule() {
        let forms = forms_on(0.0, 1.0, 64);
        let params = ProblemParams::new(2.0, 0.5, 0.05).unwrap();
        let u = Field::from_fn(&forms.mesh, |x, _| 0.5 + 0.2 * (2.0 * x).cos());
        let rep = fibering(&forms, &u, &params).unwrap();
        for (k, &root) in rep.roots.iter().enumerate() {
            let scaled = u.scaled(root);
            let r = fibering(&forms, &scaled, &params).unwrap();
            let second = (1.0 - 0.5) * r.triple.e + (2.0 - 0.5) * r.triple.a;
            match r.classification {
                NehariClass::Minus => assert!(second < 0.0 && k == 0),
                NehariClass::Plus => assert!(second > 0.0 && k == 1),
                other => panic!("unexpected class {other:?}"),
            }
        }
    }

    #[test]
    fn nehari_chart_correspondence() {
        // u in N^+- iff the rescaled v in M^+- with mu = lambda^{(p-1)/(1-q)}
        let forms = forms_on(0.0, 1.0, 64);
        let lambda = 0.05;
        let params = ProblemParams::new(2.0, 0.5, lambda).unwrap();
        let base = Field::constant(&forms.mesh, 1.0);
        let rep = fibering(&forms, &base, &params).unwrap();
        for &root in &rep.roots {
            let u = base.scaled(root);
            let class_u = fibering(&forms, &u, &params).unwrap().classification;
            let (v, mu) = crate::assembly::rescale_chart(&u, lambda, &params).unwrap();
            let params_v = params.with_mu(mu).unwrap();
            let class_v = fibering_mu(&forms, &v, &params_v).unwrap().classification;
            assert_eq!(class_u, class_v);
        }
    }

    #[test]
    fn c_plus_examples() {
        let params = ProblemParams::new(2.0, 0.5, 0.0).unwrap();
        assert!((c_plus(&params, 1.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        let params = ProblemParams::new(2.0, 0.5, 0.05).unwrap();
        let c = c_plus(&params, 1.0, 2.0).unwrap();
        assert!(c > 1.0 / 3.0 && c < 1.0);
        assert!((c.powf(0.5) - c.powf(1.5) - 0.1).abs() < 1e-12);
        // beyond the max 0.3849.. of c^{1/2} - c^{3/2}
        let params = ProblemParams::new(2.0, 0.5, 0.2).unwrap();
        assert!(matches!(
            c_plus(&params, 1.0, 2.0),
            Err(Error::NoConstantSolution(_))
        ));
    }

    #[test]
    fn c_minus_examples() {
        let params = ProblemParams::new(2.0, 0.5, 0.0)
            .unwrap()
            .with_mu(0.001)
            .unwrap();
        let c = c_minus(&params, 1.0, 2.0).unwrap();
        assert!(c > 4.0 && c < 9.0, "{c}");
        assert!((c.powf(-1.0) - 2.0 * c.powf(-1.5) - 0.001).abs() < 1e-12);
        // mu -> 0 limit approaches (|bd|/|dom|)^{1/(1-q)} = 4
        let params = params.with_mu(1e-9).unwrap();
        let c = c_minus(&params, 1.0, 2.0).unwrap();
        assert!((c - 4.0).abs() < 1e-4, "{c}");
        assert!(c_minus(&params.with_mu(10.0).unwrap(), 1.0, 2.0).is_err());
    }

    #[test]
    fn boundary_bound_at_c_minus() {
        let forms = forms_on(0.0, 1.0, 64);
        let params = ProblemParams::new(2.0, 0.5, 0.0)
            .unwrap()
            .with_mu(0.001)
            .unwrap();
        let c = c_minus(&params, 1.0, 2.0).unwrap();
        let v = Field::constant(&forms.mesh, c);
        let t = energies(&forms, &v, &params).unwrap();
        let i = i_mu_of(&t, &params);
        assert!(i >= boundary_bound_coefficient(2.0, 0.5) * t.b - 1e-10);
        // and c is on the M^- side
        let class = fibering_mu(&forms, &v, &params).unwrap().classification;
        assert_eq!(class, NehariClass::Minus);
    }

    #[test]
    fn lambda_star_positive_and_monotone() {
        let forms = forms_on(0.0, PI / 2.0, 64);
        let params = ProblemParams::new(2.0, 0.5, 0.0).unwrap();
        let delta = forms.mesh.volume().sqrt() / 2.0;
        let few = lambda_star_estimate(&forms, delta, &params, 20, 7).unwrap();
        let many = lambda_star_estimate(&forms, delta, &params, 120, 7).unwrap();
        assert!(few > 0.0 && many > 0.0);
        assert!(many <= few + 1e-15);
        assert!(lambda_star_estimate(&forms, 10.0, &params, 5, 7).is_err());
    }

    #[test]
    fn mu_star_positive_with_precondition() {
        let forms = forms_on(0.0, PI / 2.0, 64);
        let params = ProblemParams::new(2.0, 0.5, 0.0).unwrap();
        let vol = forms.mesh.volume();
        let delta_min = (2.0 / vol).powf(2.0) * vol.sqrt();
        let est = mu_star_estimate(&forms, delta_min * 1.5, &params, 40, 3).unwrap();
        assert!(est > 0.0);
        // fails when lambda_Omega <= 1
        let wide = forms_on(0.0, 2.0 * PI, 64);
        assert!(matches!(
            mu_star_estimate(&wide, 100.0, &params, 5, 3),
            Err(Error::PreconditionLambdaOmega(_))
        ));
    }

    proptest! {
        #[test]
        fn threshold_scale_invariant(c in 0.2f64..0.9, s in prop::sample::select(vec![0.1f64, 3.0, 10.0])) {
            // degree-0 homogeneity of the two-root threshold
            let forms = forms_on(0.0, 1.0, 16);
            let params = ProblemParams::new(2.0, 0.5, 0.05).unwrap();
            let u = Field::constant(&forms.mesh, c);
            let r1 = fibering(&forms, &u, &params).unwrap();
            let r2 = fibering(&forms, &u.scaled(s), &params).unwrap();
            prop_assert!((r1.threshold - r2.threshold).abs() < 1e-10 * r1.threshold);
        }

        #[test]
        fn roots_satisfy_first_order_condition(c in 0.3f64..0.9, frac in 0.1f64..0.9) {
            let forms = forms_on(0.0, 1.0, 16);
            let probe = ProblemParams::new(2.0, 0.5, 0.0).unwrap();
            let u = Field::constant(&forms.mesh, c);
            let thr = fibering(&forms, &u, &probe).unwrap().threshold;
            let params = probe.with_lambda(frac * thr).unwrap();
            let rep = fibering(&forms, &u, &params).unwrap();
            prop_assert_eq!(rep.roots.len(), 2);
            let t = rep.triple;
            for &root in &rep.roots {
                // j'(t) = tE + t^p A + lambda t^q B, scaled by t^q
                let jt = root.powf(0.5) * t.e + root.powf(1.5) * t.a + params.lambda * t.b;
                prop_assert!(jt.abs() < 1e-10 * (t.e.abs() + t.a + t.b));
            }
        }
    }
}
