//! Nonlinear solvers: damped Newton on the (possibly regularized) residual,
//! the sub/supersolution monotone iteration, Nehari-manifold minimization for
//! the two branches, and the Dirichlet logistic limit problem.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assembly::{
    interior_load, jacobian, jacobian_rescaled, reaction, rescale_chart_inverse, residual,
    residual_rescaled, weighted_mass, AssembledForms, Field, ProblemParams, DELTA_J,
};
use crate::error::{Error, Result};
use crate::linalg::{axpy, norm2, norm_inf, BandLu};
use crate::spectra::{gamma1_linearized, lambda_omega};
use crate::variational::{
    c_minus, c_plus, energies, fibering, fibering_mu, j_lambda_of, EnergyTriple,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveRoute {
    Newton,
    MonotoneIteration,
    NehariPlus,
    NehariMinus,
}

/// Positivity/bound bookkeeping of an accepted field.
#[derive(Debug, Clone, Copy)]
pub struct SolveFlags {
    pub positive_interior: bool,
    /// Some boundary node exceeds 1e-8.
    pub positive_boundary: bool,
    /// Max nodal value < 1.
    pub below_one: bool,
    /// Positive inside but boundary values at or below 1e-8: a candidate for
    /// the degenerate (boundary-vanishing) case, reported rather than
    /// rejected.
    pub degenerate_candidate: bool,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field: Field,
    pub residual_norm: f64,
    pub iterations: usize,
    pub route: SolveRoute,
    pub energies: EnergyTriple,
    pub j_value: f64,
    pub gamma1: Option<f64>,
    pub flags: SolveFlags,
}

/// Assembles the diagnostic report for a converged field.
fn make_report(
    forms: &AssembledForms,
    field: Field,
    params: &ProblemParams,
    residual_norm: f64,
    iterations: usize,
    route: SolveRoute,
) -> Result<SolveReport> {
    let triple = energies(forms, &field, params)?;
    let j_value = j_lambda_of(&triple, params);
    let gamma1 = gamma1_linearized(forms, &field, params)
        .ok()
        .map(|e| e.value);
    let interior = forms.mesh.interior_nodes();
    let positive_interior = interior.iter().all(|&i| field.coeffs[i] > 0.0);
    let max_bd = forms.max_boundary(&field);
    let min_bd = forms.min_boundary(&field);
    let flags = SolveFlags {
        positive_interior,
        positive_boundary: max_bd > 1e-8,
        below_one: field.max() < 1.0,
        degenerate_candidate: positive_interior && min_bd <= 1e-8,
    };
    Ok(SolveReport {
        field,
        residual_norm,
        iterations,
        route,
        energies: triple,
        j_value,
        gamma1,
        flags,
    })
}

/// Damped Newton (Armijo on the residual norm) in either chart.
fn newton_damped(
    forms: &AssembledForms,
    start: &Field,
    params: &ProblemParams,
    tol: f64,
    max_iter: usize,
    rescaled: bool,
) -> Result<(Field, f64, usize)> {
    let res = |u: &Field| -> Result<Vec<f64>> {
        if rescaled {
            residual_rescaled(forms, u, params)
        } else {
            residual(forms, u, params)
        }
    };
    let jac = |u: &Field| -> Result<crate::linalg::SpMat> {
        if rescaled {
            jacobian_rescaled(forms, u, params)
        } else {
            jacobian(forms, u, params)
        }
    };
    let mut u = start.clone();
    let mut r = res(&u)?;
    let mut rn = norm2(&r);
    for it in 0..max_iter {
        if rn < tol {
            return Ok((u, rn, it));
        }
        let j = jac(&u)?;
        // plain Newton first; on breakdown (singular or non-descent
        // direction) retry with a growing mass shift, Levenberg style
        let mut accepted = false;
        for shift in [0.0, 1e-6, 1e-3, 1e-1, 1.0, 10.0, 100.0] {
            let js = if shift == 0.0 {
                j.clone()
            } else {
                j.add_scaled(&forms.m, shift).add_scaled(&forms.m_bd, shift)
            };
            let Ok(lu) = BandLu::factor(&js) else {
                continue;
            };
            let mut d = lu.solve(&r);
            if d.iter().any(|v| !v.is_finite()) {
                continue;
            }
            for v in d.iter_mut() {
                *v = -*v;
            }
            // Armijo backtracking on ||R||
            let mut t = 1.0;
            for _ in 0..40 {
                let mut trial = u.coeffs.clone();
                axpy(&mut trial, t, &d);
                let uf = Field::from_raw(u.mesh_id(), trial);
                // keep the iterate differentiable when eps = 0
                if params.eps == 0.0 && forms.min_boundary(&uf) < DELTA_J {
                    t *= 0.5;
                    continue;
                }
                if let Ok(rt) = res(&uf) {
                    let rtn = norm2(&rt);
                    if rtn <= (1.0 - 1e-4 * t) * rn {
                        u = uf;
                        r = rt;
                        rn = rtn;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Err(Error::MaxIterExceeded {
                max_iter: it + 1,
                residual: rn,
            });
        }
    }
    if rn < tol {
        Ok((u, rn, max_iter))
    } else {
        Err(Error::MaxIterExceeded {
            max_iter,
            residual: rn,
        })
    }
}

/// Newton on the original-chart residual from a user guess.
pub fn newton_solve(
    forms: &AssembledForms,
    guess: &Field,
    params: &ProblemParams,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    forms.check_field(guess)?;
    if params.eps == 0.0 && params.lambda != 0.0 && forms.min_boundary(guess) < DELTA_J {
        return Err(Error::NonDifferentiableBoundary {
            value: forms.min_boundary(guess),
            floor: DELTA_J,
        });
    }
    let (u, rn, it) = newton_damped(forms, guess, params, tol, max_iter, false)?;
    make_report(forms, u, params, rn, it, SolveRoute::Newton)
}

/// Newton on the rescaled-chart residual (used near the small-solution
/// endpoint where the original chart degenerates).
pub fn newton_solve_rescaled(
    forms: &AssembledForms,
    guess: &Field,
    params: &ProblemParams,
    tol: f64,
    max_iter: usize,
) -> Result<(Field, f64, usize)> {
    forms.check_field(guess)?;
    newton_damped(forms, guess, params, tol, max_iter, true)
}

/// Subsolution `w = e (phi_Omega + e^tau)` with `tau = 2(1-q)/q`,
/// halving `e` until the weak subsolution test (residual componentwise
/// nonpositive) passes. Requires `lambda_Omega < 1`.
pub fn build_subsolution(
    forms: &AssembledForms,
    params: &ProblemParams,
    epsilon_sub: f64,
) -> Result<Field> {
    let lam = lambda_omega(forms)?;
    if lam.value >= 1.0 {
        return Err(Error::PreconditionLambdaOmega(format!(
            "subsolution construction needs lambda_Omega < 1, got {}",
            lam.value
        )));
    }
    let tau = 2.0 * (1.0 - params.q) / params.q;
    let mut e = epsilon_sub;
    for _ in 0..200 {
        let mut coeffs = lam.vector.coeffs.clone();
        let shift = e.powf(tau);
        for c in coeffs.iter_mut() {
            *c = e * (*c + shift);
        }
        let w = Field::from_raw(forms.mesh.id(), coeffs);
        let r = residual(forms, &w, params)?;
        if r.iter().all(|&v| v <= 1e-12) {
            return Ok(w);
        }
        e *= 0.5;
    }
    Err(Error::NoSolution(
        "subsolution test never passed while shrinking the amplitude".into(),
    ))
}

/// Monotone iteration between a subsolution and a supersolution. The interior
/// reaction is shifted by `sigma` and the boundary term by `sigma_b` so both
/// update maps are nondecreasing on the bracket; the boundary nonlinearity is
/// lagged, never differentiated.
pub fn monotone_iterate(
    forms: &AssembledForms,
    lower: &Field,
    upper: &Field,
    params: &ProblemParams,
    tol: f64,
) -> Result<SolveReport> {
    forms.check_field(lower)?;
    forms.check_field(upper)?;
    if lower
        .coeffs
        .iter()
        .zip(&upper.coeffs)
        .any(|(l, u)| l > u)
    {
        return Err(Error::InvalidParams(
            "bracket violated: lower exceeds upper at some node".into(),
        ));
    }
    let (p, q, lambda) = (params.p, params.q, params.lambda);
    let upmax = upper.max().max(1.0);
    let min_bd_lower = forms.min_boundary(lower).max(1e-12);
    let mut sigma = (p * upmax.powf(p - 1.0) - 1.0).max(1.0);
    let mut sigma_b = q * min_bd_lower.powf(q - 1.0);

    'restart: for _attempt in 0..8 {
        let op = forms
            .k
            .add_scaled(&forms.m, sigma)
            .add_scaled(&forms.m_bd, lambda * sigma_b);
        let lu = BandLu::factor(&op)?;
        let mut u = lower.coeffs.clone();
        let mut total_steps = 0usize;
        for step in 0..200_000 {
            total_steps = step + 1;
            // rhs = sigma M u + N_f(u) + lambda (sigma_b M_bd u - N_g(u))
            let mut rhs = forms.m.matvec(&u);
            for v in rhs.iter_mut() {
                *v *= sigma;
            }
            let nf = interior_load(forms, &u, |t| reaction(t, p));
            for (a, b) in rhs.iter_mut().zip(&nf) {
                *a += b;
            }
            if lambda != 0.0 {
                let mbd_u = forms.m_bd.matvec(&u);
                let ng = crate::assembly::boundary_load(forms, &u, |t| {
                    crate::assembly::boundary_g(t, q, params.eps)
                });
                for i in 0..rhs.len() {
                    rhs[i] += lambda * (sigma_b * mbd_u[i] - ng[i]);
                }
            }
            let unew = lu.solve(&rhs);
            // the sequence must rise and stay under the supersolution
            let ordered = unew
                .iter()
                .zip(&u)
                .all(|(n, o)| *n >= *o - 1e-11 * (1.0 + o.abs()));
            let bounded = unew
                .iter()
                .zip(&upper.coeffs)
                .all(|(n, s)| *n <= *s + 1e-9 * (1.0 + s.abs()));
            if !ordered || !bounded {
                sigma *= 2.0;
                sigma_b *= 2.0;
                continue 'restart;
            }
            let delta: f64 = unew
                .iter()
                .zip(&u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            u = unew;
            if delta < tol * 0.01 || step % 25 == 24 {
                let uf = Field::from_raw(forms.mesh.id(), u.clone());
                let rn = norm2(&residual(forms, &uf, params)?);
                if rn < tol {
                    return make_report(
                        forms,
                        uf,
                        params,
                        rn,
                        total_steps,
                        SolveRoute::MonotoneIteration,
                    );
                }
                if delta < tol * 1e-6 {
                    // stalled below the shrinking increment but residual high
                    return Err(Error::MaxIterExceeded {
                        max_iter: total_steps,
                        residual: rn,
                    });
                }
            }
        }
        let uf = Field::from_raw(forms.mesh.id(), u);
        let rn = norm2(&residual(forms, &uf, params)?);
        return Err(Error::MaxIterExceeded {
            max_iter: total_steps,
            residual: rn,
        });
    }
    Err(Error::OrderingViolation { step: 0 })
}

/// Scales a field to the requested fibering root. `Plus` takes the larger
/// root (local minimum of the fibering map), `Minus` the smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchSign {
    Plus,
    Minus,
}

/// Nehari-manifold minimization of `J_lambda` on the requested branch by
/// multi-start fibering projection, projected descent, and Newton polish.
/// The Minus branch is computed in the rescaled chart, which stays regular
/// as `lambda -> 0`, and mapped back.
pub fn nehari_minimize(
    forms: &AssembledForms,
    params: &ProblemParams,
    sign: BranchSign,
    restarts: usize,
) -> Result<SolveReport> {
    let lam_om = lambda_omega(forms)?.value;
    if lam_om <= 1.0 {
        return Err(Error::PreconditionLambdaOmega(format!(
            "Nehari machinery needs lambda_Omega > 1, got {lam_om}"
        )));
    }
    if params.lambda <= 0.0 {
        return Err(Error::InvalidParams(
            "nehari_minimize requires lambda > 0".into(),
        ));
    }
    match sign {
        BranchSign::Plus => nehari_plus(forms, params, restarts),
        BranchSign::Minus => nehari_minus(forms, params, restarts),
    }
}

fn nehari_plus(
    forms: &AssembledForms,
    params: &ProblemParams,
    restarts: usize,
) -> Result<SolveReport> {
    let vol = forms.mesh.volume();
    let sur = forms.mesh.surface();
    let cp = c_plus(params, vol, sur)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x4e65_6861);
    let mut seeds = vec![Field::constant(&forms.mesh, cp)];
    let (x_lo, x_hi) = forms
        .mesh
        .nodes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
            (lo.min(x), hi.max(x))
        });
    let lx = x_hi - x_lo;
    for _ in 1..restarts.max(1) {
        let amp: f64 = rng.gen_range(0.0..0.3);
        let freq: f64 = rng.gen_range(0.5..3.0);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        seeds.push(Field::from_fn(&forms.mesh, |x, _| {
            cp * (1.0 + amp * (freq * std::f64::consts::PI * (x - x_lo) / lx + phase).cos())
        }));
    }
    let mut best: Option<SolveReport> = None;
    let mut any_roots = false;
    for seed in &seeds {
        let Ok(rep) = fibering(forms, seed, params) else {
            continue;
        };
        if rep.roots.len() < 2 {
            continue;
        }
        any_roots = true;
        let mut u = seed.scaled(rep.roots[1]);
        // projected descent: step along the negative residual, re-project
        let mut alpha = 0.1;
        let mut jval = {
            let t = energies(forms, &u, params)?;
            j_lambda_of(&t, params)
        };
        for _ in 0..60 {
            let Ok(r) = residual(forms, &u, params) else {
                break;
            };
            let mut trial = u.coeffs.clone();
            axpy(&mut trial, -alpha, &r);
            if trial.iter().any(|&v| v <= 0.0) {
                alpha *= 0.5;
                continue;
            }
            let tf = Field::from_raw(u.mesh_id(), trial);
            let Ok(rep_t) = fibering(forms, &tf, params) else {
                alpha *= 0.5;
                continue;
            };
            if rep_t.roots.len() < 2 {
                alpha *= 0.5;
                continue;
            }
            let proj = tf.scaled(rep_t.roots[1]);
            let t = energies(forms, &proj, params)?;
            let jt = j_lambda_of(&t, params);
            if jt < jval - 1e-15 {
                u = proj;
                jval = jt;
                alpha *= 1.3;
            } else {
                alpha *= 0.5;
                if alpha < 1e-10 {
                    break;
                }
            }
        }
        let Ok((pol, rn, it)) = newton_damped(forms, &u, params, 1e-11, 60, false) else {
            continue;
        };
        let rep = make_report(forms, pol, params, rn, it, SolveRoute::NehariPlus)?;
        if best.as_ref().map_or(true, |b| rep.j_value < b.j_value) {
            best = Some(rep);
        }
    }
    match best {
        Some(rep) => Ok(rep),
        None if !any_roots => Err(Error::NoTwoRoots),
        None => Err(Error::NoSolution(
            "Plus-branch polish failed from every seed".into(),
        )),
    }
}

fn nehari_minus(
    forms: &AssembledForms,
    params: &ProblemParams,
    restarts: usize,
) -> Result<SolveReport> {
    let vol = forms.mesh.volume();
    let sur = forms.mesh.surface();
    let mu = params.mu_of_lambda();
    let params_v = params.with_mu(mu)?;
    let cm = c_minus(&params_v, vol, sur).unwrap_or_else(|_| (sur / vol).powf(1.0 / (1.0 - params.q)) * 1.05);
    let mut rng = ChaCha8Rng::seed_from_u64(0x4d69_6e75);
    let mut seeds = vec![Field::constant(&forms.mesh, cm)];
    let (x_lo, x_hi) = forms
        .mesh
        .nodes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
            (lo.min(x), hi.max(x))
        });
    let lx = x_hi - x_lo;
    for _ in 1..restarts.max(1) {
        let amp: f64 = rng.gen_range(0.0..0.3);
        let freq: f64 = rng.gen_range(0.5..3.0);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        seeds.push(Field::from_fn(&forms.mesh, |x, _| {
            cm * (1.0 + amp * (freq * std::f64::consts::PI * (x - x_lo) / lx + phase).sin())
        }));
    }
    let mut best: Option<(Field, f64, usize)> = None;
    let mut any_roots = false;
    for seed in &seeds {
        let Ok(rep) = fibering_mu(forms, seed, &params_v) else {
            continue;
        };
        if rep.roots.is_empty() {
            continue;
        }
        any_roots = true;
        let v0 = seed.scaled(rep.roots[0]);
        let Ok((pol, rn, it)) = newton_damped(forms, &v0, &params_v, 1e-11, 60, true) else {
            continue;
        };
        // discard the trivial/upper collapse: the Minus member is the small
        // root; accept only fields staying below the Plus scale
        if pol.coeffs.iter().any(|&c| !(c > 0.0)) {
            continue;
        }
        let class = fibering_mu(forms, &pol, &params_v)
            .map(|r| r.classification)
            .unwrap_or(crate::variational::NehariClass::NotOnNehari);
        if class != crate::variational::NehariClass::Minus {
            continue;
        }
        let score = crate::variational::i_mu(forms, &pol, &params_v)?;
        if best.as_ref().map_or(true, |(_, s, _)| score < *s) {
            best = Some((pol, score, it));
        }
        let _ = rn;
    }
    let Some((v, _, it)) = best else {
        return if any_roots {
            Err(Error::NoSolution(
                "Minus-branch polish failed from every seed".into(),
            ))
        } else {
            Err(Error::NoTwoRoots)
        };
    };
    let (u, _lambda) = rescale_chart_inverse(&v, mu, params)?;
    let rn = norm2(&residual(forms, &u, params)?);
    make_report(forms, u, params, rn, it, SolveRoute::NehariMinus)
}

/// Positive solution of the Dirichlet logistic limit problem
/// (zero boundary data); defined when `lambda_Omega < 1`.
pub fn dirichlet_logistic(forms: &AssembledForms, tol: f64) -> Result<SolveReport> {
    let lam = lambda_omega(forms)?;
    if lam.value >= 1.0 {
        return Err(Error::PreconditionLambdaOmega(format!(
            "Dirichlet logistic problem needs lambda_Omega < 1, got {}",
            lam.value
        )));
    }
    let p = 2.0; // exponent comes from params elsewhere; here the caller's
    dirichlet_logistic_p(forms, p, tol)
}

/// Same with an explicit interior exponent.
pub fn dirichlet_logistic_p(forms: &AssembledForms, p: f64, tol: f64) -> Result<SolveReport> {
    let lam = lambda_omega(forms)?;
    if lam.value >= 1.0 {
        return Err(Error::PreconditionLambdaOmega(format!(
            "Dirichlet logistic problem needs lambda_Omega < 1, got {}",
            lam.value
        )));
    }
    let interior = forms.mesh.interior_nodes();
    let n = forms.n();
    // start from a positive bump
    let mut u = lam.vector.coeffs.clone();
    for v in u.iter_mut() {
        *v *= 1.0 - lam.value.min(0.9);
    }
    let mut iters = 0usize;
    for it in 0..100 {
        iters = it;
        let r_full = {
            let mut r = forms.k.matvec(&u);
            let nf = interior_load(forms, &u, |t| reaction(t, p));
            for (a, b) in r.iter_mut().zip(&nf) {
                *a -= b;
            }
            r
        };
        let r_int: Vec<f64> = interior.iter().map(|&i| r_full[i]).collect();
        let rn = norm2(&r_int);
        if rn < tol {
            break;
        }
        let mf = weighted_mass(forms, &u, |t| crate::assembly::reaction_deriv(t, p));
        let j = forms.k.add_scaled(&mf, -1.0).restrict(&interior);
        let lu = BandLu::factor(&j)?;
        let d = lu.solve(&r_int);
        // damped update
        let mut t = 1.0;
        let mut ok = false;
        for _ in 0..30 {
            let mut trial = u.clone();
            for (k, &i) in interior.iter().enumerate() {
                trial[i] -= t * d[k];
            }
            let mut rt = forms.k.matvec(&trial);
            let nf = interior_load(forms, &trial, |t2| reaction(t2, p));
            for (a, b) in rt.iter_mut().zip(&nf) {
                *a -= b;
            }
            let rtn = norm2(
                &interior
                    .iter()
                    .map(|&i| rt[i])
                    .collect::<Vec<f64>>(),
            );
            if rtn < (1.0 - 1e-4 * t) * rn {
                u = trial;
                ok = true;
                break;
            }
            t *= 0.5;
        }
        if !ok {
            return Err(Error::MaxIterExceeded {
                max_iter: it,
                residual: rn,
            });
        }
    }
    let uf = Field::from_raw(forms.mesh.id(), u);
    let r_full = {
        let mut r = forms.k.matvec(&uf.coeffs);
        let nf = interior_load(forms, &uf.coeffs, |t| reaction(t, p));
        for (a, b) in r.iter_mut().zip(&nf) {
            *a -= b;
        }
        r
    };
    let rn = norm2(
        &interior
            .iter()
            .map(|&i| r_full[i])
            .collect::<Vec<f64>>(),
    );
    if rn >= tol {
        return Err(Error::MaxIterExceeded {
            max_iter: iters,
            residual: rn,
        });
    }
    debug_assert_eq!(uf.coeffs.len(), n);
    let params0 = ProblemParams::new(p, 0.5, 0.0)?;
    let mut rep = make_report(forms, uf, &params0, rn, iters, SolveRoute::Newton)?;
    rep.gamma1 = None;
    Ok(rep)
}

/// Convenience: sup-norm distance between two fields on the same mesh.
pub fn sup_distance(a: &Field, b: &Field) -> f64 {
    let d: Vec<f64> = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| x - y)
        .collect();
    norm_inf(&d)
}
