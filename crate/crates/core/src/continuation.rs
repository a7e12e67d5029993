//! Branch tracing in (lambda, u): pseudo-arclength predictor-corrector with
//! fold detection, chart switching to the rescaled (mu, v) variables near the
//! small-solution endpoint, regularized components bifurcating from the
//! trivial line, and the eps -> 0 continuum skeleton.

use crate::assembly::{
    boundary_g, boundary_load, interior_load, jacobian, jacobian_rescaled, rescale_chart,
    rescale_chart_inverse, residual, residual_rescaled, AssembledForms, Field, ProblemParams,
    DELTA_J,
};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, solve_bordered, BandLu};
use crate::solvers::newton_solve_rescaled;
use crate::spectra::{classify_stability, gamma1_linearized, Stability};
use crate::variational::{energies, j_lambda_of, EnergyTriple};

/// Boundary floor (relative to the max) that triggers the U -> V chart
/// switch; the original chart's Jacobian degenerates below it.
pub const CHART_SWITCH_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    U,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityLabel {
    Stable,
    Unstable,
    Marginal,
    NotComputed,
}

impl From<Stability> for StabilityLabel {
    fn from(s: Stability) -> Self {
        match s {
            Stability::Stable => StabilityLabel::Stable,
            Stability::Unstable => StabilityLabel::Unstable,
            Stability::Marginal => StabilityLabel::Marginal,
        }
    }
}

/// Norms of the original-chart solution (even for V-chart points, so that
/// the bifurcation diagram lives in one set of axes).
#[derive(Debug, Clone, Copy)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
    pub min_boundary: f64,
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub lambda: f64,
    pub mu: f64,
    pub chart: Chart,
    /// Solution in the active chart.
    pub field: Field,
    pub norms: Norms,
    pub energies: EnergyTriple,
    pub j_value: f64,
    pub gamma1: Option<f64>,
    pub stability: StabilityLabel,
    pub fold_flag: bool,
    /// Accumulated arclength along the trace.
    pub arclength: f64,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub eps: f64,
    /// Human-readable endpoint descriptors.
    pub endpoints: Vec<String>,
    /// Refined fold location, when one was detected.
    pub lambda_star: Option<f64>,
}

impl Branch {
    pub fn max_lambda(&self) -> f64 {
        self.points.iter().map(|p| p.lambda).fold(0.0, f64::max)
    }
}

/// Corrector tolerance on branch-point residuals.
const CORR_TOL: f64 = 1e-10;
const MAX_CORR: usize = 8;

struct ArcState {
    field: Vec<f64>,
    par: f64,
    tangent_u: Vec<f64>,
    tangent_p: f64,
    arclength: f64,
}

/// Driver shared by both charts: the nonlinear system is
/// `R(x, par) = 0` with derivative callbacks provided by the caller.
#[allow(clippy::too_many_arguments)]
fn arclength_run(
    forms: &AssembledForms,
    chart: Chart,
    params: &ProblemParams,
    start_field: Vec<f64>,
    start_par: f64,
    step0: f64,
    max_steps: usize,
    compute_stability: bool,
    mut stop: impl FnMut(&ArcState, &AssembledForms) -> bool,
    reject: impl Fn(&[f64], f64) -> bool,
) -> Result<(Vec<BranchPoint>, Vec<(f64, f64)>)> {
    let res = |x: &[f64], par: f64| -> Result<Vec<f64>> {
        let f = Field::from_raw(forms.mesh.id(), x.to_vec());
        match chart {
            Chart::U => residual(forms, &f, &params.with_lambda(par)?),
            Chart::V => residual_rescaled(forms, &f, &params.with_mu(par)?),
        }
    };
    let jac = |x: &[f64], par: f64| -> Result<crate::linalg::SpMat> {
        let f = Field::from_raw(forms.mesh.id(), x.to_vec());
        match chart {
            Chart::U => jacobian(forms, &f, &params.with_lambda(par)?),
            Chart::V => jacobian_rescaled(forms, &f, &params.with_mu(par)?),
        }
    };
    let dres_dpar = |x: &[f64], _par: f64| -> Vec<f64> {
        match chart {
            Chart::U => boundary_load(forms, x, |t| boundary_g(t, params.q, params.eps)),
            Chart::V => interior_load(forms, x, |t| t.abs().powf(params.p - 1.0) * t),
        }
    };

    // initial tangent: solve J du = -R_par, direction of increasing par
    let j0 = jac(&start_field, start_par)?;
    let lu0 = BandLu::factor(&j0)?;
    let rp0 = dres_dpar(&start_field, start_par);
    let mut du = lu0.solve(&rp0);
    for v in du.iter_mut() {
        *v = -*v;
    }
    let nrm = (dot(&du, &du) + 1.0).sqrt();
    let mut state = ArcState {
        field: start_field,
        par: start_par,
        tangent_u: du.iter().map(|v| v / nrm).collect(),
        tangent_p: 1.0 / nrm,
        arclength: 0.0,
    };

    let mut points = Vec::new();
    let mut samples = Vec::new();
    let push_point = |state: &ArcState,
                      points: &mut Vec<BranchPoint>,
                      samples: &mut Vec<(f64, f64)>|
     -> Result<()> {
        let (lambda, mu, ufield) = match chart {
            Chart::U => {
                let lam = state.par;
                let f = Field::from_raw(forms.mesh.id(), state.field.clone());
                (lam, if lam > 0.0 { params.with_lambda(lam)?.mu_of_lambda() } else { 0.0 }, f)
            }
            Chart::V => {
                let mu = state.par.max(0.0);
                let v = Field::from_raw(forms.mesh.id(), state.field.clone());
                if mu > 0.0 {
                    let (u, lam) = rescale_chart_inverse(&v, mu, params)?;
                    (lam, mu, u)
                } else {
                    (0.0, 0.0, Field::constant(&forms.mesh, 0.0))
                }
            }
        };
        let pl = params.with_lambda(lambda.max(0.0))?;
        let triple = energies(forms, &ufield, &pl)?;
        let j_value = j_lambda_of(&triple, &pl);
        let gamma1 = if compute_stability && forms.min_boundary(&ufield) >= DELTA_J {
            gamma1_linearized(forms, &ufield, &pl).ok().map(|e| e.value)
        } else {
            None
        };
        let stability = match gamma1 {
            Some(g) => classify_stability(g).into(),
            None => StabilityLabel::NotComputed,
        };
        let norms = Norms {
            l2: forms.l2_norm(&ufield),
            h1: forms.h1_norm(&ufield),
            linf: ufield.coeffs.iter().fold(0.0f64, |m, &v| m.max(v.abs())),
            min_boundary: forms.min_boundary(&ufield),
        };
        samples.push((state.arclength, lambda));
        points.push(BranchPoint {
            lambda,
            mu,
            chart,
            field: match chart {
                Chart::U => ufield,
                Chart::V => Field::from_raw(forms.mesh.id(), state.field.clone()),
            },
            norms,
            energies: triple,
            j_value,
            gamma1,
            stability,
            fold_flag: false,
            arclength: state.arclength,
        });
        Ok(())
    };

    push_point(&state, &mut points, &mut samples)?;

    let mut ds = step0;
    let ds_min = step0 * 1e-6;
    let mut prev_tp = state.tangent_p;
    for step in 0..max_steps {
        if stop(&state, forms) {
            break;
        }
        // predictor
        let mut accepted = false;
        while ds >= ds_min {
            let mut xp = state.field.clone();
            axpy(&mut xp, ds, &state.tangent_u);
            let pp = state.par + ds * state.tangent_p;
            // corrector on [R; tangent constraint]
            let mut x = xp.clone();
            let mut par = pp;
            let mut converged = false;
            for _ in 0..MAX_CORR {
                let r = match res(&x, par.max(match chart {
                    Chart::U => f64::NEG_INFINITY,
                    Chart::V => 0.0,
                })) {
                    Ok(r) => r,
                    Err(_) => break,
                };
                let mut cvec: Vec<f64> = x.clone();
                axpy(&mut cvec, -1.0, &xp);
                let c = dot(&state.tangent_u, &cvec) + state.tangent_p * (par - pp);
                let rn = norm2(&r);
                if rn < CORR_TOL && c.abs() < 1e-12 {
                    converged = true;
                    break;
                }
                let j = match jac(&x, par) {
                    Ok(j) => j,
                    Err(_) => break,
                };
                let lu = match BandLu::factor(&j) {
                    Ok(l) => l,
                    Err(_) => break,
                };
                let rp = dres_dpar(&x, par);
                let Ok((dx, dp)) = solve_bordered(
                    &lu,
                    &rp,
                    &state.tangent_u,
                    state.tangent_p,
                    &r,
                    c,
                ) else {
                    break;
                };
                axpy(&mut x, -1.0, &dx);
                par -= dp;
                if !par.is_finite() || x.iter().any(|v| !v.is_finite()) {
                    break;
                }
            }
            if converged && reject(&x, par) {
                // converged onto an inadmissible solution: retry with a
                // shorter step instead of leaving the tracked branch
                converged = false;
            }
            if converged {
                // new tangent from the bordered system with rhs (0, 1)
                if let (Ok(j), rp) = (jac(&x, par), dres_dpar(&x, par)) {
                    if let Ok(lu) = BandLu::factor(&j) {
                        if let Ok((tu, tp)) = solve_bordered(
                            &lu,
                            &rp,
                            &state.tangent_u,
                            state.tangent_p,
                            &vec![0.0; x.len()],
                            1.0,
                        ) {
                            let nrm = (dot(&tu, &tu) + tp * tp).sqrt();
                            state.tangent_u = tu.iter().map(|v| v / nrm).collect();
                            state.tangent_p = tp / nrm;
                        }
                    }
                }
                state.arclength += ds;
                state.field = x;
                state.par = par;
                accepted = true;
                break;
            }
            ds *= 0.5;
        }
        if !accepted {
            // leave the partial branch to the caller
            break;
        }
        push_point(&state, &mut points, &mut samples)?;
        // fold flag on tangent sign change of d(par)/ds
        if prev_tp.signum() != state.tangent_p.signum() && state.tangent_p != 0.0 {
            if let Some(last) = points.last_mut() {
                last.fold_flag = true;
            }
        }
        prev_tp = state.tangent_p;
        // gentle step growth
        ds = (ds * 1.3).min(step0);
        let _ = step;
    }
    Ok((points, samples))
}

/// Traces the branch leaving the exact solution (lambda, u) = (0, 1).
/// Stops at `max_lambda`, at the small-solution end (sup norm below 1e-4 or,
/// at eps = 0, boundary below the chart-switch floor), or when the step
/// control gives up; the partial branch is returned in every case.
pub fn continue_from_trivial_one(
    forms: &AssembledForms,
    params: &ProblemParams,
    step: f64,
    max_lambda: f64,
) -> Result<Branch> {
    // absolute floor only: stop just above the nondifferentiable set
    continue_from_one_impl(forms, params, step, max_lambda, 0.0)
}

fn continue_from_one_impl(
    forms: &AssembledForms,
    params: &ProblemParams,
    step: f64,
    max_lambda: f64,
    boundary_floor_frac: f64,
) -> Result<Branch> {
    let n = forms.n();
    let start = vec![1.0; n];
    let eps = params.eps;
    let (mut points, samples) = arclength_run(
        forms,
        Chart::U,
        params,
        start,
        0.0,
        step,
        20_000,
        true,
        move |s, forms2| {
            let linf = s.field.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            let min_bd = forms2
                .mesh
                .boundary_nodes
                .iter()
                .map(|&i| s.field[i])
                .fold(f64::INFINITY, f64::min);
            let floor = (boundary_floor_frac * linf).max(100.0 * DELTA_J);
            s.par > max_lambda
                || (s.par < -1e-12 && s.arclength > 0.0)
                || linf < 1e-4
                || (eps == 0.0 && s.arclength > 0.0 && min_bd < floor)
        },
        |_, _| false,
    )?;
    let fold = detect_fold(&samples);
    if let Some((s_star, _)) = fold {
        if let Some(p) = points
            .iter_mut()
            .min_by(|a, b| {
                (a.arclength - s_star)
                    .abs()
                    .total_cmp(&(b.arclength - s_star).abs())
            })
        {
            p.fold_flag = true;
        }
    }
    let endpoints = branch_endpoints(&points);
    Ok(Branch {
        points,
        eps: params.eps,
        endpoints,
        lambda_star: fold.map(|(_, l)| l),
    })
}

fn branch_endpoints(points: &[BranchPoint]) -> Vec<String> {
    let mut out = Vec::new();
    for p in [points.first(), points.last()].into_iter().flatten() {
        out.push(format!(
            "(lambda = {:.6e}, |u|_inf = {:.6e})",
            p.lambda, p.norms.linf
        ));
    }
    out
}

/// Locates a fold from arclength samples `(s, lambda)`: a sign change of the
/// discrete d(lambda)/ds refined by the vertex of the local quadratic.
/// Returns `(s_fold, lambda_fold)`.
pub fn detect_fold(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    if samples.len() < 3 {
        return None;
    }
    for i in 1..samples.len() - 1 {
        let d0 = samples[i].1 - samples[i - 1].1;
        let d1 = samples[i + 1].1 - samples[i].1;
        if d0 > 0.0 && d1 <= 0.0 {
            // quadratic through the three samples around the turn
            let (s0, l0) = samples[i - 1];
            let (s1, l1) = samples[i];
            let (s2, l2) = samples[i + 1];
            // Newton divided differences
            let f01 = (l1 - l0) / (s1 - s0);
            let f12 = (l2 - l1) / (s2 - s1);
            let f012 = (f12 - f01) / (s2 - s0);
            if f012 == 0.0 {
                return Some((s1, l1));
            }
            let s_star = 0.5 * (s0 + s1) - f01 / (2.0 * f012);
            let l_star = l0 + f01 * (s_star - s0) + f012 * (s_star - s0) * (s_star - s1);
            return Some((s_star, l_star));
        }
    }
    None
}

/// Re-expresses a branch point in the other chart, re-verifying the residual.
pub fn chart_switch(
    forms: &AssembledForms,
    point: &BranchPoint,
    params: &ProblemParams,
) -> Result<BranchPoint> {
    let mut out = point.clone();
    match point.chart {
        Chart::U => {
            if point.lambda <= 0.0 {
                return Err(Error::InvalidParams(
                    "chart switch U -> V needs lambda > 0".into(),
                ));
            }
            let (mut v, mu) = rescale_chart(&point.field, point.lambda, params)?;
            let pm = params.with_mu(mu)?;
            let mut rn = norm2(&residual_rescaled(forms, &v, &pm)?);
            if rn > 1e-7 {
                // the rescaling amplifies the corrector residual; polish in
                // the target chart before accepting the switch
                if let Ok((pv, prn, _)) = newton_solve_rescaled(forms, &v, &pm, 1e-10, 30) {
                    v = pv;
                    rn = prn;
                }
            }
            if rn > 1e-7 {
                return Err(Error::NoSolution(format!(
                    "rescaled residual {rn:.3e} too large after chart switch"
                )));
            }
            out.chart = Chart::V;
            out.mu = mu;
            out.field = v;
        }
        Chart::V => {
            if point.mu <= 0.0 {
                out.chart = Chart::U;
                out.field = Field::constant(&forms.mesh, 0.0);
                out.lambda = 0.0;
                return Ok(out);
            }
            let (mut u, lambda) = rescale_chart_inverse(&point.field, point.mu, params)?;
            let pl = params.with_lambda(lambda)?;
            let mut rn = norm2(&residual(forms, &u, &pl)?);
            if rn > 1e-7 {
                if let Ok(rep) = crate::solvers::newton_solve(forms, &u, &pl, 1e-10, 30) {
                    rn = rep.residual_norm;
                    u = rep.field;
                }
            }
            if rn > 1e-7 {
                return Err(Error::NoSolution(format!(
                    "original-chart residual {rn:.3e} too large after chart switch"
                )));
            }
            out.chart = Chart::U;
            out.lambda = lambda;
            out.field = u;
        }
    }
    Ok(out)
}

/// Traces the regularized component C_eps (eps > 0) from (0, 1) until it
/// reconnects with the trivial line near (lambda_eps, 0); the last recorded
/// lambda is the detected bifurcation value.
pub fn continue_regularized(
    forms: &AssembledForms,
    params: &ProblemParams,
    step: f64,
) -> Result<Branch> {
    if !(params.eps > 0.0) {
        return Err(Error::InvalidParams(
            "continue_regularized needs eps > 0".into(),
        ));
    }
    let lam_om = crate::spectra::lambda_omega(forms)?.value;
    if lam_om <= 1.0 {
        return Err(Error::PreconditionLambdaOmega(format!(
            "regularized bifurcation needs lambda_Omega > 1, got {lam_om}"
        )));
    }
    let n = forms.n();
    let (mut points, samples) = arclength_run(
        forms,
        Chart::U,
        params,
        vec![1.0; n],
        0.0,
        step,
        40_000,
        false,
        move |s, _| {
            let linf = s.field.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            (s.par < -1e-12 && s.arclength > 0.0) || linf < 2e-4 || s.par > 1e3
        },
        // past the reconnection point the regularized system also has sign-
        // changing solutions; refuse them so the trace stays on the positive
        // branch and lands on the small-solution end
        |x, _| x.iter().any(|&v| v < -1e-10),
    )?;
    let fold = detect_fold(&samples);
    if let Some((s_star, _)) = fold {
        if let Some(p) = points.iter_mut().min_by(|a, b| {
            (a.arclength - s_star)
                .abs()
                .total_cmp(&(b.arclength - s_star).abs())
        }) {
            p.fold_flag = true;
        }
    }
    let endpoints = branch_endpoints(&points);
    Ok(Branch {
        points,
        eps: params.eps,
        endpoints,
        lambda_star: fold.map(|(_, l)| l),
    })
}

/// The detected bifurcation-from-zero lambda of a regularized branch: the
/// lambda at its small-solution end.
pub fn detected_bifurcation_lambda(branch: &Branch) -> Option<f64> {
    let pts = &branch.points;
    let last = pts.last()?;
    if pts.len() < 2 {
        return Some(last.lambda);
    }
    // extrapolate lambda to |u| = 0 from the final two points
    let prev = &pts[pts.len() - 2];
    let dn = last.norms.linf - prev.norms.linf;
    if dn.abs() > 1e-300 && last.norms.linf < 0.05 {
        let extrap = last.lambda - (last.lambda - prev.lambda) / dn * last.norms.linf;
        // only trust a mild correction; otherwise report the endpoint as is
        if (extrap - last.lambda).abs() < 0.5 * last.lambda.abs().max(1e-6) {
            return Some(extrap);
        }
    }
    Some(last.lambda)
}

/// Approximates the continuum C0 for `lambda_Omega > 1`: the eps = 0 branch
/// from (0, 1) to the chart-switch point, then the rescaled-chart arc down to
/// mu = 0 (the exact (0, 0) endpoint). The eps schedule is traced first and
/// its bifurcation values are recorded as a convergence diagnostic.
pub fn trace_continuum_c0(
    forms: &AssembledForms,
    params: &ProblemParams,
    eps_schedule: &[f64],
    step: f64,
) -> Result<Branch> {
    let lam_om = crate::spectra::lambda_omega(forms)?.value;
    if lam_om <= 1.0 {
        return Err(Error::PreconditionLambdaOmega(format!(
            "the bounded continuum needs lambda_Omega > 1, got {lam_om}"
        )));
    }
    // regularized sweeps (diagnostic: detected bifurcation values fall with eps)
    let mut eps_marks = Vec::new();
    for &eps in eps_schedule {
        let pe = params.with_eps(eps)?;
        if let Ok(b) = continue_regularized(forms, &pe, step) {
            if let Some(l) = detected_bifurcation_lambda(&b) {
                eps_marks.push((eps, l));
            }
        }
    }

    // eps = 0 arc from (0, 1) down to the chart-switch floor
    let mut main = continue_from_one_impl(forms, params, step, 1e3, CHART_SWITCH_FLOOR)?;
    let Some(last) = main.points.last().cloned() else {
        return Err(Error::NoSolution("empty primary arc".into()));
    };

    // switch to the rescaled chart and continue mu down to zero
    let switched = chart_switch(forms, &last, params)?;
    let (tail_points, _) = arclength_run(
        forms,
        Chart::V,
        params,
        switched.field.coeffs.clone(),
        switched.mu,
        step.max(1e-3),
        20_000,
        false,
        move |s, _| s.par <= 1e-9,
        |_, _| false,
    )?;
    // land exactly on mu = 0: plain Newton on the limit system
    let tail_last = tail_points
        .last()
        .map(|p| p.field.clone())
        .unwrap_or(switched.field.clone());
    let p0 = params.with_mu(0.0)?;
    let (v0, rn0, _) = newton_solve_rescaled(forms, &tail_last, &p0, 1e-10, 60)?;
    if rn0 > 1e-9 {
        return Err(Error::NoSolution(format!(
            "limit-problem polish stalled at residual {rn0:.3e}"
        )));
    }

    for p in tail_points {
        main.points.push(p);
    }
    // exact (0, 0) endpoint carrying the limit profile in the V chart
    let triple = energies(forms, &v0, &p0)?;
    main.points.push(BranchPoint {
        lambda: 0.0,
        mu: 0.0,
        chart: Chart::V,
        field: v0,
        norms: Norms {
            l2: 0.0,
            h1: 0.0,
            linf: 0.0,
            min_boundary: 0.0,
        },
        energies: triple,
        j_value: 0.0,
        gamma1: None,
        stability: StabilityLabel::NotComputed,
        fold_flag: false,
        arclength: main.points.last().map(|p| p.arclength).unwrap_or(0.0),
    });
    main.endpoints = branch_endpoints(&main.points);
    main.endpoints
        .extend(eps_marks.iter().map(|(e, l)| {
            format!("eps = {e:.1e}: bifurcation lambda detected at {l:.6e}")
        }));
    Ok(main)
}
