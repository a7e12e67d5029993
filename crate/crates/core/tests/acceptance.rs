//! End-to-end acceptance gate: fifteen numbered checks covering eigenvalues,
//! bifurcation detection, a priori bounds, multiplicity, nonexistence, global
//! existence, asymptotics, stability, fibering, Nehari minimization, monotone
//! iteration, chart consistency, and the traced solution continuum. Each test
//! prints a single `acceptance NN <name>: PASS|FAIL` line; run with
//! `cargo test --release --test acceptance -- --nocapture` to see them all.

use std::f64::consts::PI;
use std::sync::OnceLock;

use logibranch_core::assembly::{
    jacobian, rescale_chart, rescale_chart_inverse, residual, assemble, AssembledForms, Field,
    ProblemParams,
};
use logibranch_core::continuation::{
    continue_from_trivial_one, continue_regularized, detected_bifurcation_lambda,
    trace_continuum_c0, Branch, Chart,
};
use logibranch_core::domain::{build_mesh, DomainSpec};
use logibranch_core::error::Error;
use logibranch_core::oracle1d;
use logibranch_core::solvers::{
    build_subsolution, dirichlet_logistic, monotone_iterate, nehari_minimize, newton_solve,
    sup_distance, BranchSign, SolveReport,
};
use logibranch_core::spectra::{gamma1_linearized, lambda_eps, lambda_omega, sigma1};
use logibranch_core::variational::{
    c_plus, energies, fibering, i_mu_of, j_lambda, boundary_bound_coefficient, sample_fields,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const P: f64 = 2.0;
const Q: f64 = 0.5;
const N_1D: usize = 1024;
const N_2D: usize = 128;

fn params(lambda: f64) -> ProblemParams {
    ProblemParams::new(P, Q, lambda).unwrap()
}

fn interval(a: f64, b: f64) -> DomainSpec {
    DomainSpec::interval(a, b).unwrap()
}

fn forms_for(spec: DomainSpec, n: usize) -> AssembledForms {
    assemble(&build_mesh(spec, n).unwrap())
}

fn forms_half_pi() -> &'static AssembledForms {
    static CELL: OnceLock<AssembledForms> = OnceLock::new();
    CELL.get_or_init(|| forms_for(interval(0.0, PI / 2.0), N_1D))
}

fn forms_two_pi() -> &'static AssembledForms {
    static CELL: OnceLock<AssembledForms> = OnceLock::new();
    CELL.get_or_init(|| forms_for(interval(0.0, 2.0 * PI), N_1D))
}

/// The fold-bearing branch traced from (0, u = 1) on (0, pi/2).
fn branch_half_pi() -> &'static Branch {
    static CELL: OnceLock<Branch> = OnceLock::new();
    CELL.get_or_init(|| {
        continue_from_trivial_one(forms_half_pi(), &params(0.0), 0.05, 10.0).unwrap()
    })
}

/// Upper/lower solution pairs on (0, pi/2) at the two multiplicity lambdas.
fn nehari_pairs() -> &'static Vec<(f64, SolveReport, SolveReport)> {
    static CELL: OnceLock<Vec<(f64, SolveReport, SolveReport)>> = OnceLock::new();
    CELL.get_or_init(|| {
        [0.02, 0.05]
            .iter()
            .map(|&lam| {
                let pl = params(lam);
                let plus = nehari_minimize(forms_half_pi(), &pl, BranchSign::Plus, 6).unwrap();
                let minus = nehari_minimize(forms_half_pi(), &pl, BranchSign::Minus, 6).unwrap();
                (lam, plus, minus)
            })
            .collect()
    })
}

/// Lower-branch solutions on (0, pi/2) for the small-lambda asymptotics.
fn lower_branch_small_lambda() -> &'static Vec<(f64, SolveReport)> {
    static CELL: OnceLock<Vec<(f64, SolveReport)>> = OnceLock::new();
    CELL.get_or_init(|| {
        [1e-4, 1e-3, 1e-2]
            .iter()
            .map(|&lam| {
                let r =
                    nehari_minimize(forms_half_pi(), &params(lam), BranchSign::Minus, 6).unwrap();
                (lam, r)
            })
            .collect()
    })
}

/// Solutions on (0, 2 pi) over the global-existence lambda grid, warm-started
/// from a monotone-iteration solve at the smallest lambda.
fn global_chain() -> &'static Vec<(f64, SolveReport)> {
    static CELL: OnceLock<Vec<(f64, SolveReport)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let forms = forms_two_pi();
        let p0 = params(0.1);
        let w = build_subsolution(forms, &p0, 0.5).unwrap();
        let one = Field::constant(&forms.mesh, 1.0);
        let first = monotone_iterate(forms, &w, &one, &p0, 1e-10).unwrap();
        let mut out = vec![(0.1, first)];
        // ramp with intermediate steps so Newton stays in its basin
        let ramp = [0.3, 1.0, 3.0, 10.0, 30.0, 100.0];
        let keep = [1.0, 10.0, 100.0];
        let mut guess = out[0].1.field.clone();
        for &lam in &ramp {
            let r = newton_solve(forms, &guess, &params(lam), 1e-11, 80).unwrap();
            guess = r.field.clone();
            if keep.contains(&lam) {
                out.push((lam, r));
            }
        }
        out
    })
}

/// The monotone-iteration solve used by the sub/supersolution check.
fn monotone_report() -> &'static (Field, SolveReport) {
    static CELL: OnceLock<(Field, SolveReport)> = OnceLock::new();
    CELL.get_or_init(|| {
        let forms = forms_two_pi();
        let pl = params(1.0);
        let w = build_subsolution(forms, &pl, 0.5).unwrap();
        let one = Field::constant(&forms.mesh, 1.0);
        let r = monotone_iterate(forms, &w, &one, &pl, 1e-10).unwrap();
        (w, r)
    })
}

/// Every positive solution accepted anywhere in this suite, with its lambda.
fn accepted_solutions() -> Vec<(f64, SolveReport)> {
    let mut out = Vec::new();
    for (lam, plus, minus) in nehari_pairs() {
        out.push((*lam, plus.clone()));
        out.push((*lam, minus.clone()));
    }
    for (lam, r) in lower_branch_small_lambda() {
        out.push((*lam, r.clone()));
    }
    for (lam, r) in global_chain() {
        out.push((*lam, r.clone()));
    }
    out.push((1.0, monotone_report().1.clone()));
    out
}

fn check(name: &str, ok: bool, detail: String) {
    println!(
        "acceptance {name}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "acceptance {name} failed: {detail}");
}

#[test]
fn criterion_01_dirichlet_eigenvalues() {
    let cases = [
        (interval(0.0, PI), N_1D, 1.0, 1e-4),
        (interval(0.0, PI / 2.0), N_1D, 4.0, 4e-4),
        (
            DomainSpec::rectangle(0.0, PI, 0.0, PI).unwrap(),
            N_2D,
            2.0,
            1e-3,
        ),
    ];
    let mut detail = String::new();
    let mut ok = true;
    for (spec, n, exact, tol) in cases {
        let forms = forms_for(spec, n);
        let got = lambda_omega(&forms).unwrap().value;
        let err = (got - exact).abs();
        ok &= err < tol;
        detail.push_str(&format!("|{got:.8} - {exact}| = {err:.2e} (tol {tol:.0e}); "));
    }
    // quadratic convergence under mesh doubling
    let e_coarse = (lambda_omega(&forms_for(interval(0.0, PI / 2.0), 128))
        .unwrap()
        .value
        - 4.0)
        .abs();
    let e_fine = (lambda_omega(&forms_for(interval(0.0, PI / 2.0), 256))
        .unwrap()
        .value
        - 4.0)
        .abs();
    let ratio = e_coarse / e_fine;
    ok &= (3.5..=4.5).contains(&ratio);
    detail.push_str(&format!("h^2 ratio {ratio:.3} in [3.5, 4.5]"));
    check("01 dirichlet-eigenvalues", ok, detail);
}

#[test]
fn criterion_02_boundary_eigenvalue() {
    // analytic value -tan(L/2) = -1 on (0, pi/2)
    let got = sigma1(forms_half_pi()).unwrap().value;
    let err = (got - (-1.0)).abs();
    let mut ok = err < 1e-3;
    let mut detail = format!("sigma1 = {got:.8}, err {err:.2e} (tol 1e-3); ");
    // on (0, 2 pi) the principal Dirichlet eigenvalue is 1/4 < 1: no sigma1
    let refused = matches!(
        sigma1(forms_two_pi()),
        Err(Error::LambdaOmegaNotGreaterThanOne { .. })
    );
    ok &= refused;
    detail.push_str(&format!("precondition error on long interval: {refused}"));
    check("02 boundary-eigenvalue", ok, detail);
}

#[test]
fn criterion_03_regularized_bifurcation() {
    let forms = forms_half_pi();
    let mut ok = true;
    let mut detail = String::new();
    for eps in [1e-2, 1e-3] {
        let pe = params(0.0).with_eps(eps).unwrap();
        let b = continue_regularized(forms, &pe, 0.05).unwrap();
        let got = detected_bifurcation_lambda(&b).unwrap();
        let expect = lambda_eps(forms, eps, Q).unwrap();
        let rel = (got - expect).abs() / expect;
        ok &= rel < 0.02;
        detail.push_str(&format!(
            "eps {eps:.0e}: detected {got:.6} vs {expect:.6} (rel {rel:.2e}); "
        ));
    }
    check("03 regularized-bifurcation", ok, detail);
}

#[test]
fn criterion_04_a_priori_bounds() {
    let mut ok = true;
    let mut worst_max: f64 = 0.0;
    let mut worst_bd = f64::INFINITY;
    let mut n = 0usize;
    for (_, r) in accepted_solutions() {
        n += 1;
        ok &= r.flags.below_one && r.flags.positive_interior && r.flags.positive_boundary;
        worst_max = worst_max.max(r.field.max());
        let forms = if r.field.len() == forms_half_pi().n()
            && r.field.mesh_id() == forms_half_pi().mesh.id()
        {
            forms_half_pi()
        } else {
            forms_two_pi()
        };
        worst_bd = worst_bd.min(forms.max_boundary(&r.field));
    }
    ok &= worst_max < 1.0 && worst_bd > 1e-8;
    check(
        "04 a-priori-bounds",
        ok,
        format!("{n} solutions: max u <= {worst_max:.6} < 1, max boundary value >= {worst_bd:.3e} > 1e-8"),
    );
}

#[test]
fn criterion_05_multiplicity_and_fold() {
    let domain = interval(0.0, PI / 2.0);
    let mut ok = true;
    let mut detail = String::new();
    for (lam, plus, minus) in nehari_pairs() {
        let dist = sup_distance(&plus.field, &minus.field);
        let distinct = dist > 1e-3;
        let count = if distinct { 2 } else { 1 };
        let oracle = oracle1d::shoot_count(&domain, &params(*lam), 2000).unwrap();
        ok &= distinct && count == oracle.count;
        detail.push_str(&format!(
            "lambda {lam}: {count} distinct (sep {dist:.3e}) vs oracle {}; ",
            oracle.count
        ));
    }
    let fold = branch_half_pi().lambda_star.unwrap();
    let oracle_fold = oracle1d::fold_lambda(&domain, &params(0.0), 200, 1e-4).unwrap();
    let rel = (fold - oracle_fold).abs() / oracle_fold;
    ok &= rel < 0.02;
    detail.push_str(&format!(
        "fold {fold:.6} vs oracle {oracle_fold:.6} (rel {rel:.2e})"
    ));
    check("05 multiplicity-and-fold", ok, detail);
}

#[test]
fn criterion_06_nonexistence_past_fold() {
    let forms = forms_half_pi();
    let lam = 2.0 * branch_half_pi().lambda_star.unwrap();
    let pl = params(lam);
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e6f_6e65);
    let mut found = 0usize;
    for k in 0..20 {
        let guess = if k == 0 {
            Field::constant(&forms.mesh, 0.5)
        } else {
            let c: f64 = rng.gen_range(0.05..0.95);
            let amp: f64 = rng.gen_range(0.0..0.4);
            let freq: f64 = rng.gen_range(0.5..4.0);
            Field::from_fn(&forms.mesh, |x, _| {
                (c * (1.0 + amp * (freq * x).cos())).clamp(0.01, 0.99)
            })
        };
        if let Ok(r) = newton_solve(forms, &guess, &pl, 1e-10, 60) {
            if r.residual_norm < 1e-8
                && r.flags.positive_interior
                && r.flags.positive_boundary
                && r.field.max() > 1e-6
            {
                found += 1;
            }
        }
    }
    let oracle = oracle1d::shoot_count(&interval(0.0, PI / 2.0), &pl, 2000).unwrap();
    let ok = found == 0 && oracle.count == 0;
    check(
        "06 nonexistence-past-fold",
        ok,
        format!("lambda {lam:.4}: {found}/20 multistarts accepted, oracle count {}", oracle.count),
    );
}

#[test]
fn criterion_07_global_existence() {
    let forms = forms_two_pi();
    let ud = dirichlet_logistic(forms, 1e-12).unwrap().field;
    let chain = global_chain();
    let mut dists = Vec::new();
    let mut ends: Vec<(f64, f64)> = Vec::new();
    for (_, r) in chain {
        let diff = Field::new(
            &forms.mesh,
            r.field
                .coeffs
                .iter()
                .zip(&ud.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        )
        .unwrap();
        dists.push(forms.l2_norm(&diff));
        let bn = &forms.mesh.boundary_nodes;
        ends.push((r.field.coeffs[bn[0]], r.field.coeffs[bn[1]]));
    }
    let mut ok = chain.len() == 4;
    for w in dists.windows(2) {
        ok &= w[1] < w[0];
    }
    ok &= *dists.last().unwrap() < 0.05;
    for w in ends.windows(2) {
        ok &= w[1].0 < w[0].0 && w[1].1 < w[0].1;
    }
    ok &= ends.last().unwrap().0 > 0.0 && ends.last().unwrap().1 > 0.0;
    check(
        "07 global-existence",
        ok,
        format!(
            "distances to the interior-limit solution {:?}, boundary values {:?}",
            dists
                .iter()
                .map(|d| format!("{d:.4}"))
                .collect::<Vec<_>>(),
            ends.iter()
                .map(|(a, b)| format!("({a:.3e},{b:.3e})"))
                .collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_08_lower_branch_scaling() {
    let forms = forms_half_pi();
    let pts: Vec<(f64, f64)> = lower_branch_small_lambda()
        .iter()
        .map(|(lam, r)| (lam.ln(), forms.h1_norm(&r.field).ln()))
        .collect();
    // least-squares slope of log-norm against log-lambda
    let n = pts.len() as f64;
    let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (sxx, sxy): (f64, f64) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.0 * p.0, b + p.0 * p.1));
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let expect = 1.0 / (1.0 - Q);
    let rel = (slope - expect).abs() / expect;
    check(
        "08 lower-branch-scaling",
        rel < 0.05,
        format!("log-log slope {slope:.4} vs {expect} (rel {rel:.2e})"),
    );
}

#[test]
fn criterion_09_limit_profile() {
    let forms = forms_half_pi();
    let v0 = oracle1d::shoot_limit_problem(&interval(0.0, PI / 2.0), Q).unwrap();
    let mut errs = Vec::new();
    for (lam, r) in lower_branch_small_lambda() {
        let (v, _) = rescale_chart(&r.field, *lam, &params(*lam)).unwrap();
        let diff = Field::new(
            &forms.mesh,
            forms
                .mesh
                .nodes
                .iter()
                .zip(&v.coeffs)
                .map(|(&(x, _), &c)| c - v0.eval(x))
                .collect(),
        )
        .unwrap();
        errs.push(forms.h1_norm(&diff));
    }
    // grid is ascending in lambda, so the error must increase along it
    let ok = errs[0] < errs[1] && errs[1] < errs[2] && errs[0] < 1e-2;
    check(
        "09 limit-profile",
        ok,
        format!(
            "H1 errors {:?} decreasing toward small lambda, smallest < 1e-2",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_10_stability_signs() {
    let forms = forms_half_pi();
    let (lam, plus, minus) = &nehari_pairs()[0];
    let g_plus = gamma1_linearized(forms, &plus.field, &params(*lam))
        .unwrap()
        .value;
    let mut ok = g_plus > 0.0;
    let mut detail = format!("gamma1(upper) = {g_plus:.4e} > 0; ");
    let min_minus = minus.field.min();
    if min_minus > 0.0 {
        let g_minus = gamma1_linearized(forms, &minus.field, &params(*lam))
            .unwrap()
            .value;
        ok &= g_minus < 0.0;
        detail.push_str(&format!("gamma1(lower) = {g_minus:.4e} < 0; "));
    } else {
        detail.push_str("lower solution touches zero, instability check skipped; ");
    }
    // every accepted solution bounded below by 1/3 must be linearly stable
    let mut checked = 0usize;
    for (l, r) in accepted_solutions() {
        if r.field.min() >= 1.0 / 3.0 {
            let f = if r.field.mesh_id() == forms.mesh.id() {
                forms
            } else {
                forms_two_pi()
            };
            let g = gamma1_linearized(f, &r.field, &params(l)).unwrap().value;
            ok &= g > 0.0;
            checked += 1;
        }
    }
    detail.push_str(&format!("{checked} solutions with min >= 1/3 all stable"));
    check("10 stability-signs", ok, detail);
}

#[test]
fn criterion_11_fibering_properties() {
    let forms = forms_half_pi();
    let fields: Vec<Field> = sample_fields(forms, 600, 0xf1be_0001)
        .into_iter()
        .filter(|u| {
            let t = energies(forms, u, &params(0.0)).unwrap();
            // E is a difference of two quadratic forms; keep fields where it
            // is resolved well above rounding so the 1e-10 checks are
            // meaningful rather than dominated by cancellation noise
            let gross = forms.dirichlet_form(u) + forms.m.quadratic_form(&u.coeffs);
            t.e < -1e-3 * gross && t.a > 0.0 && t.b > 0.0
        })
        .take(200)
        .collect();
    let mut ok = fields.len() == 200;
    let mut worst_res: f64 = 0.0;
    let mut worst_inv: f64 = 0.0;
    for u in &fields {
        let probe = fibering(forms, u, &params(1.0)).unwrap();
        let lam = 0.5 * probe.threshold;
        let pl = params(lam);
        let rep = fibering(forms, u, &pl).unwrap();
        ok &= rep.roots.len() == 2;
        if rep.roots.len() != 2 {
            continue;
        }
        let (t1, t2) = (rep.roots[0], rep.roots[1]);
        ok &= t1 < rep.t0 && rep.t0 < t2;
        let tr = &rep.triple;
        for &t in &[t1, t2] {
            // first derivative of t -> J(tu), relative to its term sizes
            let d1 = t * tr.e + t.powf(P) * tr.a + lam * t.powf(Q) * tr.b;
            let scale = (t * tr.e).abs() + t.powf(P) * tr.a + lam * t.powf(Q) * tr.b;
            let rel = d1.abs() / scale;
            ok &= rel < 1e-10;
            worst_res = worst_res.max(rel);
        }
        let d2 = |t: f64| tr.e + P * t.powf(P - 1.0) * tr.a + lam * Q * t.powf(Q - 1.0) * tr.b;
        ok &= d2(t1) < 0.0 && d2(t2) > 0.0;
        // threshold is invariant under scaling the field
        for s in [0.1, 3.0, 10.0] {
            let rs = fibering(forms, &u.scaled(s), &pl).unwrap();
            let inv = (rs.threshold - rep.threshold).abs() / rep.threshold;
            ok &= inv < 1e-10;
            worst_inv = worst_inv.max(inv);
        }
    }
    check(
        "11 fibering-properties",
        ok,
        format!(
            "{} fields: worst root residual {worst_res:.2e}, worst scale-invariance error {worst_inv:.2e}",
            fields.len()
        ),
    );
}

#[test]
fn criterion_12_nehari_minimizers() {
    let forms = forms_half_pi();
    let (lam, plus, minus) = &nehari_pairs()[0];
    let pl = params(*lam);
    let mut ok = plus.j_value < 0.0 && minus.j_value > 0.0;
    let mut detail = format!(
        "J(upper) = {:.4e} < 0 < J(lower) = {:.4e}; ",
        plus.j_value, minus.j_value
    );
    let cp = c_plus(&pl, forms.mesh.volume(), forms.mesh.surface()).unwrap();
    let j_const = j_lambda(forms, &Field::constant(&forms.mesh, cp), &pl).unwrap();
    ok &= plus.j_value <= j_const + 1e-12;
    detail.push_str(&format!("J(upper) <= J(best constant) = {j_const:.4e}; "));
    // the rescaled lower solution obeys the boundary-energy lower bound
    let (v, mu) = rescale_chart(&minus.field, *lam, &pl).unwrap();
    let pm = pl.with_mu(mu).unwrap();
    let tv = energies(forms, &v, &pm).unwrap();
    let lhs = i_mu_of(&tv, &pm);
    let rhs = boundary_bound_coefficient(P, Q) * tv.b;
    ok &= lhs >= rhs - 1e-10;
    detail.push_str(&format!("rescaled energy {lhs:.4e} >= {rhs:.4e}"));
    check("12 nehari-minimizers", ok, detail);
}

#[test]
fn criterion_13_monotone_iteration() {
    let (w, r) = monotone_report();
    let mut ok = r.residual_norm < 1e-9;
    let mut bracket = true;
    for (lo, u) in w.coeffs.iter().zip(&r.field.coeffs) {
        bracket &= *lo - 1e-12 <= *u && *u <= 1.0 + 1e-12;
    }
    ok &= bracket;
    check(
        "13 monotone-iteration",
        ok,
        format!(
            "limit residual {:.2e} < 1e-9, nondecreasing iterates stayed in [w, 1]: {bracket}",
            r.residual_norm
        ),
    );
}

#[test]
fn criterion_14_chart_and_jacobian_consistency() {
    let forms = forms_half_pi();
    let mut ok = true;
    let mut worst_round: f64 = 0.0;
    let mut worst_jac: f64 = 0.0;
    let fields = sample_fields(forms, 50, 0xc4a7_0001);
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1f0_0001);
    for u in &fields {
        // round trip between the original and rescaled charts
        let lam = 0.37;
        let pl = params(lam);
        let (v, mu) = rescale_chart(u, lam, &pl).unwrap();
        let (u2, lam2) = rescale_chart_inverse(&v, mu, &pl).unwrap();
        let e = sup_distance(u, &u2).max((lam - lam2).abs());
        worst_round = worst_round.max(e);
        ok &= e < 1e-12;
        // derivative against a central difference along a random direction
        let pe = params(0.4).with_eps(0.1).unwrap();
        let j = jacobian(forms, u, &pe).unwrap();
        let d: Vec<f64> = (0..u.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = 1e-6;
        let shift = |s: f64| {
            Field::new(
                &forms.mesh,
                u.coeffs.iter().zip(&d).map(|(a, b)| a + s * b).collect(),
            )
            .unwrap()
        };
        let rp = residual(forms, &shift(h), &pe).unwrap();
        let rm = residual(forms, &shift(-h), &pe).unwrap();
        let jd = j.matvec(&d);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..d.len() {
            let fd = (rp[i] - rm[i]) / (2.0 * h);
            num += (fd - jd[i]).powi(2);
            den += jd[i].powi(2);
        }
        let rel = (num / den.max(1e-300)).sqrt();
        worst_jac = worst_jac.max(rel);
        ok &= rel < 1e-5;
    }
    check(
        "14 chart-and-jacobian",
        ok,
        format!(
            "50 fields: worst round-trip error {worst_round:.2e}, worst derivative mismatch {worst_jac:.2e}"
        ),
    );
}

#[test]
fn criterion_15_continuum_skeleton() {
    let forms = forms_half_pi();
    let pl = params(0.0);
    let c0 = trace_continuum_c0(forms, &pl, &[1e-1, 1e-2, 1e-3], 0.05).unwrap();
    let first = c0.points.first().unwrap();
    let start_err = first
        .lambda
        .abs()
        .max((first.norms.linf - 1.0).abs());
    let mut ok = start_err < 1e-3;
    let last = c0.points.last().unwrap();
    ok &= last.chart == Chart::V && last.lambda == 0.0 && last.mu == 0.0;
    // the terminal rescaled profile matches the independent sine solution
    let v0 = oracle1d::shoot_limit_problem(&interval(0.0, PI / 2.0), Q).unwrap();
    let diff = Field::new(
        &forms.mesh,
        forms
            .mesh
            .nodes
            .iter()
            .zip(&last.field.coeffs)
            .map(|(&(x, _), &c)| c - v0.eval(x))
            .collect(),
    )
    .unwrap();
    let end_err = forms.h1_norm(&diff);
    ok &= end_err < 1e-2;
    // shares its initial arc with the plain branch trace
    let plain = branch_half_pi();
    let overlap = plain.points.len().min(
        c0.points
            .iter()
            .take_while(|p| p.chart == Chart::U && p.norms.min_boundary > 0.05 * p.norms.linf)
            .count(),
    );
    let mut arc_err: f64 = 0.0;
    for k in 0..overlap {
        let (a, b) = (&plain.points[k], &c0.points[k]);
        if (a.arclength - b.arclength).abs() > 1e-12 {
            break;
        }
        arc_err = arc_err.max(sup_distance(&a.field, &b.field));
    }
    ok &= arc_err < 1e-6;
    // confinement: lambda below the sweep bound, solutions below one
    let bound = 2.0 * plain.lambda_star.unwrap();
    let mut confined = true;
    for p in &c0.points {
        confined &= p.lambda >= -1e-12 && p.lambda < bound && p.norms.linf < 1.0 + 1e-9;
        if p.lambda > 1e-9 {
            confined &= p.norms.linf < 1.0;
        }
    }
    ok &= confined;
    check(
        "15 continuum-skeleton",
        ok,
        format!(
            "start error {start_err:.2e}, terminal profile H1 error {end_err:.2e}, shared-arc deviation {arc_err:.2e} over {overlap} points, confined: {confined}"
        ),
    );
}
