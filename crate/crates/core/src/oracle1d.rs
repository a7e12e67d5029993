//! Independent interval-domain ground truth: adaptive high-order shooting for
//! the two-point problem, the sine-ansatz limit profile, and analytic
//! eigenvalues. Nothing here touches the finite element machinery, so
//! agreement between the two paths is meaningful evidence.

use crate::assembly::ProblemParams;
use crate::domain::DomainSpec;
use crate::error::{Error, Result};

/// Integrator tolerance (embedded Runge-Kutta 5(4), adaptive).
pub const ODE_TOL: f64 = 1e-12;

/// One shooting solution: initial boundary value, profile on the output grid,
/// and the terminal boundary mismatch after refinement.
#[derive(Debug, Clone)]
pub struct ShootMatch {
    /// `u(a) = s`.
    pub s: f64,
    /// `(x, u(x))` samples.
    pub profile: Vec<(f64, f64)>,
    pub mismatch: f64,
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub matches: Vec<ShootMatch>,
    pub count: usize,
    pub scan_resolution: usize,
}

/// Dormand-Prince 5(4) step on `y' = f(t, y)`, `y = [u, u']`.
/// Returns (5th-order solution, embedded error estimate).
fn dopri_step(f: &impl Fn(f64, [f64; 2]) -> [f64; 2], t: f64, y: [f64; 2], h: f64) -> ([f64; 2], f64) {
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    // 5th order weights equal the last A row; 4th order embedded weights:
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let mut k = [[0.0f64; 2]; 7];
    k[0] = f(t, y);
    for i in 0..6 {
        let mut yi = y;
        for (j, kj) in k.iter().enumerate().take(i + 1) {
            yi[0] += h * A[i][j] * kj[0];
            yi[1] += h * A[i][j] * kj[1];
        }
        k[i + 1] = f(t + C[i] * h, yi);
    }
    let mut y5 = y;
    for (j, kj) in k.iter().enumerate().take(6) {
        y5[0] += h * A[5][j] * kj[0];
        y5[1] += h * A[5][j] * kj[1];
    }
    let mut err = [0.0f64; 2];
    for (j, kj) in k.iter().enumerate() {
        err[0] += h * E[j] * kj[0];
        err[1] += h * E[j] * kj[1];
    }
    let scale0 = 1.0 + y[0].abs().max(y5[0].abs());
    let scale1 = 1.0 + y[1].abs().max(y5[1].abs());
    let e = ((err[0] / scale0).powi(2) + (err[1] / scale1).powi(2)).sqrt();
    (y5, e)
}

/// Integrates `y' = f(t, y)` from `a` to `b`, landing exactly on every point
/// of `outputs` (ascending, within `[a, b]`). Records `y[0]` at each output.
/// Aborts (None) when `reject(y)` fires at an accepted step.
fn integrate(
    f: &impl Fn(f64, [f64; 2]) -> [f64; 2],
    a: f64,
    b: f64,
    y0: [f64; 2],
    outputs: &[f64],
    reject: &impl Fn([f64; 2]) -> bool,
) -> Option<(Vec<f64>, [f64; 2])> {
    let mut t = a;
    let mut y = y0;
    let mut h = (b - a) / 100.0;
    let mut recorded = Vec::with_capacity(outputs.len());
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] <= a + 1e-15 * (b - a) {
        recorded.push(y[0]);
        next_out += 1;
    }
    let mut steps = 0usize;
    while t < b - 1e-14 * (b - a) {
        steps += 1;
        if steps > 1_000_000 {
            return None;
        }
        let mut target = b;
        if next_out < outputs.len() {
            target = outputs[next_out].min(b);
        }
        let hh = h.min(target - t).max(1e-15);
        let (ynew, err) = dopri_step(f, t, y, hh);
        if err <= ODE_TOL || hh <= 1e-13 {
            t += hh;
            y = ynew;
            if reject(y) {
                return None;
            }
            while next_out < outputs.len() && t >= outputs[next_out] - 1e-13 * (b - a) {
                recorded.push(y[0]);
                next_out += 1;
            }
        }
        // PI-free classic step controller
        let fac = if err > 0.0 {
            (ODE_TOL / err).powf(0.2) * 0.9
        } else {
            5.0
        };
        h = (hh * fac.clamp(0.2, 5.0)).min(b - a);
    }
    while next_out < outputs.len() {
        recorded.push(y[0]);
        next_out += 1;
    }
    Some((recorded, y))
}

fn interval_bounds(domain: &DomainSpec) -> Result<(f64, f64)> {
    match *domain {
        DomainSpec::Interval { a, b } => Ok((a, b)),
        _ => Err(Error::InvalidParams(
            "the shooting oracle is 1D only".into(),
        )),
    }
}

/// Terminal mismatch `u'(b) + lambda u(b)^q` of the shot starting at
/// `u(a) = s`, `u'(a) = lambda s^q`; None when the trajectory leaves
/// the admissible strip `0 < u < 1.5`.
fn mismatch(a: f64, b: f64, s: f64, params: &ProblemParams) -> Option<f64> {
    let (p, q, lambda) = (params.p, params.q, params.lambda);
    let f = move |_t: f64, y: [f64; 2]| [y[1], -y[0] + y[0].abs().powf(p - 1.0) * y[0]];
    let reject = |y: [f64; 2]| y[0] <= 0.0 || y[0] > 1.5;
    let (_, yb) = integrate(&f, a, b, [s, lambda * s.powf(q)], &[], &reject)?;
    if yb[0] <= 0.0 {
        return None;
    }
    Some(yb[1] + lambda * yb[0].powf(q))
}

/// Scans `s in (0, 1)` for solutions of the two-point problem; sign changes
/// of the terminal mismatch are bisected to below 1e-9.
pub fn shoot_count(
    domain: &DomainSpec,
    params: &ProblemParams,
    scan_points: usize,
) -> Result<ShootingResult> {
    let (a, b) = interval_bounds(domain)?;
    let n = scan_points.max(8);
    let s_lo = 1e-6;
    let s_hi = 1.0 - 1e-6;
    let grid: Vec<f64> = (0..=n)
        .map(|i| s_lo + (s_hi - s_lo) * i as f64 / n as f64)
        .collect();
    let values: Vec<Option<f64>> = grid.iter().map(|&s| mismatch(a, b, s, params)).collect();
    let mut matches = Vec::new();
    for i in 0..n {
        let (Some(m0), Some(m1)) = (values[i], values[i + 1]) else {
            continue;
        };
        if m0 == 0.0 || m0.signum() == m1.signum() {
            continue;
        }
        // bisection on s
        let (mut lo, mut hi, mut mlo) = (grid[i], grid[i + 1], m0);
        let mut best = (lo, m0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let Some(mm) = mismatch(a, b, mid, params) else {
                break;
            };
            if mm.abs() < best.1.abs() {
                best = (mid, mm);
            }
            if mm.abs() < 1e-11 && hi - lo < 1e-12 {
                break;
            }
            if mm.signum() == mlo.signum() {
                lo = mid;
                mlo = mm;
            } else {
                hi = mid;
            }
        }
        let (s_star, m_star) = best;
        if m_star.abs() > 1e-9 {
            continue;
        }
        // record the profile on a fine uniform grid
        let xs: Vec<f64> = (0..=256).map(|k| a + (b - a) * k as f64 / 256.0).collect();
        let fode = {
            let p = params.p;
            move |_t: f64, y: [f64; 2]| [y[1], -y[0] + y[0].abs().powf(p - 1.0) * y[0]]
        };
        let reject = |y: [f64; 2]| y[0] <= 0.0 || y[0] > 1.5;
        if let Some((prof, _)) = integrate(
            &fode,
            a,
            b,
            [s_star, params.lambda * s_star.powf(params.q)],
            &xs,
            &reject,
        ) {
            matches.push(ShootMatch {
                s: s_star,
                profile: xs.iter().cloned().zip(prof).collect(),
                mismatch: m_star,
            });
        }
    }
    let count = matches.len();
    Ok(ShootingResult {
        matches,
        count,
        scan_resolution: n,
    })
}

/// Evaluates one shot's profile at the given abscissas (for injecting into
/// the FEM residual). Returns None if the trajectory leaves the strip.
pub fn shoot_profile(
    domain: &DomainSpec,
    params: &ProblemParams,
    s: f64,
    xs: &[f64],
) -> Result<Option<Vec<f64>>> {
    let (a, b) = interval_bounds(domain)?;
    let p = params.p;
    let f = move |_t: f64, y: [f64; 2]| [y[1], -y[0] + y[0].abs().powf(p - 1.0) * y[0]];
    let reject = |y: [f64; 2]| y[0] <= 0.0 || y[0] > 1.5;
    Ok(
        integrate(&f, a, b, [s, params.lambda * s.powf(params.q)], xs, &reject)
            .map(|(prof, _)| prof),
    )
}

/// Largest lambda at which the scan still finds at least two solutions,
/// located by bisection between a two-solution lambda and a zero-solution
/// lambda. The relative width of the final bracket is below `rel_tol`.
pub fn fold_lambda(
    domain: &DomainSpec,
    params: &ProblemParams,
    scan_points: usize,
    rel_tol: f64,
) -> Result<f64> {
    let count_at = |lambda: f64| -> Result<usize> {
        let p = params.with_lambda(lambda)?;
        Ok(shoot_count(domain, &p, scan_points)?.count)
    };
    let mut lo = 0.01;
    let mut tries = 0;
    while count_at(lo)? < 2 {
        lo /= 4.0;
        tries += 1;
        if tries > 20 {
            return Err(Error::NoSolution(
                "no two-solution lambda found below the fold".into(),
            ));
        }
    }
    let mut hi = lo * 2.0;
    tries = 0;
    while count_at(hi)? >= 2 {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 30 {
            return Err(Error::NoSolution("no upper nonexistence lambda".into()));
        }
    }
    while (hi - lo) > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if count_at(mid)? >= 2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Positive sine-ansatz solution `v0(x) = C1 sin(x + C2)` of the limit
/// problem on an interval of length `< pi`: slope conditions
/// `v'(a) = v(a)^q`, `v'(b) = -v(b)^q`.
#[derive(Debug, Clone)]
pub struct LimitProfile {
    pub c1: f64,
    pub c2: f64,
    pub a: f64,
    pub b: f64,
    pub q: f64,
}

impl LimitProfile {
    pub fn eval(&self, x: f64) -> f64 {
        self.c1 * (x + self.c2).sin()
    }

    pub fn eval_deriv(&self, x: f64) -> f64 {
        self.c1 * (x + self.c2).cos()
    }
}

pub fn shoot_limit_problem(domain: &DomainSpec, q: f64) -> Result<LimitProfile> {
    let (a, b) = interval_bounds(domain)?;
    let len = b - a;
    if len >= std::f64::consts::PI {
        return Err(Error::NoSolution(format!(
            "sine ansatz requires interval length < pi, got {len}"
        )));
    }
    let res = |c1: f64, c2: f64| -> [f64; 2] {
        let va = c1 * (a + c2).sin();
        let vb = c1 * (b + c2).sin();
        [
            c1 * (a + c2).cos() - va.max(0.0).powf(q),
            c1 * (b + c2).cos() + vb.max(0.0).powf(q),
        ]
    };
    // multistart grid over the box keeping sin positive on [a, b],
    // then damped Newton with a finite-difference Jacobian
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 1..40 {
        let c2 = -a + (std::f64::consts::PI - len) * i as f64 / 40.0;
        for &c1 in &[0.3, 0.7, 1.2, 2.0] {
            if let Some((r1, r2, resid)) = newton2(&res, c1, c2) {
                // positivity on the closed interval
                let pos = (0..=64).all(|k| {
                    let x = a + len * k as f64 / 64.0;
                    r1 * (x + r2).sin() > 0.0
                });
                if pos && (best.is_none() || resid < best.unwrap().2) {
                    best = Some((r1, r2, resid));
                }
            }
        }
    }
    match best {
        Some((c1, c2, resid)) if resid < 1e-12 => Ok(LimitProfile { c1, c2, a, b, q }),
        _ => Err(Error::NoSolution(
            "limit-problem root-find failed over the search box".into(),
        )),
    }
}

/// Damped 2D Newton with finite-difference Jacobian; returns the root and
/// its residual norm, or None on breakdown.
fn newton2(f: &impl Fn(f64, f64) -> [f64; 2], mut x: f64, mut y: f64) -> Option<(f64, f64, f64)> {
    let nrm = |r: [f64; 2]| (r[0] * r[0] + r[1] * r[1]).sqrt();
    let mut r = f(x, y);
    for _ in 0..80 {
        if nrm(r) < 1e-14 {
            break;
        }
        let h = 1e-7;
        let rx = f(x + h, y);
        let ry = f(x, y + h);
        let j = [
            [(rx[0] - r[0]) / h, (ry[0] - r[0]) / h],
            [(rx[1] - r[1]) / h, (ry[1] - r[1]) / h],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return None;
        }
        let dx = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
        let dy = (j[0][0] * r[1] - j[1][0] * r[0]) / det;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (xn, yn) = (x - step * dx, y - step * dy);
            let rn = f(xn, yn);
            if nrm(rn) < nrm(r) {
                x = xn;
                y = yn;
                r = rn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let resid = nrm(r);
    if resid.is_finite() {
        Some((x, y, resid))
    } else {
        None
    }
}

/// Analytic eigenvalues on product domains: `lambda_Omega` always, `sigma_1`
/// for intervals shorter than pi.
pub fn analytic_eigen(domain: &DomainSpec) -> (f64, Option<f64>) {
    use std::f64::consts::PI;
    match *domain {
        DomainSpec::Interval { a, b } => {
            let len = b - a;
            let lam = (PI / len).powi(2);
            let sig = if lam > 1.0 { Some(-(len / 2.0).tan()) } else { None };
            (lam, sig)
        }
        DomainSpec::Rectangle { ax, bx, ay, by } => {
            let lam = (PI / (bx - ax)).powi(2) + (PI / (by - ay)).powi(2);
            (lam, None)
        }
    }
}
