//! Implementations of the seven subcommands. Every writer emits a `#` header
//! with version, config hash, problem-identity hash, and mesh size, followed
//! by CSV rows (17 significant digits) or a JSON document; outputs are
//! byte-identical across repeated runs with the same configuration.

use std::io::Write;
use std::path::{Path, PathBuf};

use logibranch_core::assembly::{assemble, AssembledForms, Field};
use logibranch_core::continuation::{
    continue_from_trivial_one, continue_regularized, detected_bifurcation_lambda,
    trace_continuum_c0, Branch, Chart, StabilityLabel,
};
use logibranch_core::domain::build_mesh;
use logibranch_core::oracle1d;
use logibranch_core::solvers::{
    build_subsolution, dirichlet_logistic, monotone_iterate, nehari_minimize, newton_solve,
    BranchSign, SolveReport,
};
use logibranch_core::spectra::{gamma1_of_sigma, lambda_omega, sigma1};
use logibranch_core::variational::fibering;

use crate::config::{fmt_f64, header_line, CliError, CliResult, RunConfig};

fn write_output(path: Option<&Path>, content: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::Solver(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())
                .map_err(|e| CliError::Solver(format!("cannot write to stdout: {e}")))
        }
    }
}

fn forms_from(cfg: &RunConfig) -> CliResult<AssembledForms> {
    let mesh = build_mesh(cfg.domain()?, cfg.resolution()?)?;
    Ok(assemble(&mesh))
}

/// Principal eigenvalues plus a gamma_1(sigma) table.
pub fn run_eig(cfg: &RunConfig, out: Option<&Path>, force_sigma1: bool) -> CliResult<()> {
    let forms = forms_from(cfg)?;
    let mut body = String::new();
    body.push_str(&header_line(cfg, forms.mesh.h)?);
    body.push('\n');
    body.push_str("quantity,sigma,value\n");
    let lam = lambda_omega(&forms)?;
    body.push_str(&format!("lambda_omega,,{}\n", fmt_f64(lam.value)));
    let s1 = if lam.value > 1.0 {
        let s = sigma1(&forms)?;
        body.push_str(&format!("sigma1,,{}\n", fmt_f64(s.value)));
        Some(s.value)
    } else if force_sigma1 {
        // surface the violation instead of quietly omitting the row
        return Err(CliError::from(sigma1(&forms).unwrap_err()));
    } else {
        None
    };
    // table of the auxiliary eigencurve on a fixed grid around sigma1
    let lo = match s1 {
        Some(s) => 2.0 * s.min(-1.0),
        None => -2.0,
    };
    let steps = 10usize;
    for i in 0..=steps {
        let sigma = lo * (1.0 - i as f64 / steps as f64);
        let g = gamma1_of_sigma(&forms, sigma)?;
        body.push_str(&format!(
            "gamma1,{},{}\n",
            fmt_f64(sigma),
            fmt_f64(g.value)
        ));
    }
    write_output(out, &body)
}

fn parse_guess(forms: &AssembledForms, spec: &str) -> CliResult<Field> {
    if let Some(c) = spec.strip_prefix("const:") {
        let v: f64 = c
            .parse()
            .map_err(|_| CliError::Config(format!("guess `{spec}`: bad constant")))?;
        return Ok(Field::constant(&forms.mesh, v));
    }
    if let Some(p) = spec.strip_prefix("file:") {
        return read_field(forms, Path::new(p));
    }
    Err(CliError::Config(format!(
        "guess `{spec}`: expected const:<c> or file:<path>"
    )))
}

/// Reads a field from a solution CSV (`x[,y],u` rows; `#` and header lines
/// skipped); the node count must match the configured mesh.
fn read_field(forms: &AssembledForms, path: &Path) -> CliResult<Field> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut vals = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let last = line.rsplit(',').next().unwrap().trim();
        if last.parse::<f64>().is_err() {
            continue; // column header
        }
        vals.push(last.parse::<f64>().unwrap());
    }
    if vals.len() != forms.n() {
        return Err(CliError::Config(format!(
            "{}: {} values but the mesh has {} nodes",
            path.display(),
            vals.len(),
            forms.n()
        )));
    }
    Field::new(&forms.mesh, vals).map_err(CliError::from)
}

fn solution_csv(cfg: &RunConfig, forms: &AssembledForms, rep: &SolveReport) -> CliResult<String> {
    let mut body = String::new();
    body.push_str(&header_line(cfg, forms.mesh.h)?);
    body.push('\n');
    body.push_str(&format!(
        "# route={:?} residual={} J={} gamma1={}\n",
        rep.route,
        fmt_f64(rep.residual_norm),
        fmt_f64(rep.j_value),
        rep.gamma1.map(fmt_f64).unwrap_or_default()
    ));
    let two_d = forms.mesh.dim() == 2;
    body.push_str(if two_d { "x,y,u\n" } else { "x,u\n" });
    for (&(x, y), &u) in forms.mesh.nodes.iter().zip(&rep.field.coeffs) {
        if two_d {
            body.push_str(&format!("{},{},{}\n", fmt_f64(x), fmt_f64(y), fmt_f64(u)));
        } else {
            body.push_str(&format!("{},{}\n", fmt_f64(x), fmt_f64(u)));
        }
    }
    Ok(body)
}

/// One solve along the requested route.
pub fn run_solve(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let forms = forms_from(cfg)?;
    let params = cfg.params()?;
    let tol = cfg.f64_or("tol", 1e-10)?;
    let route = cfg.str_or("route", "newton");
    let rep = match route.as_str() {
        "newton" => {
            let guess = parse_guess(&forms, &cfg.str_or("guess", "const:0.5"))?;
            newton_solve(&forms, &guess, &params, tol, 100)?
        }
        "subsuper" => {
            let w = build_subsolution(&forms, &params, 0.5)?;
            let one = Field::constant(&forms.mesh, 1.0);
            monotone_iterate(&forms, &w, &one, &params, tol)?
        }
        "nehari+" => nehari_minimize(&forms, &params, BranchSign::Plus, 6)?,
        "nehari-" => nehari_minimize(&forms, &params, BranchSign::Minus, 6)?,
        other => {
            return Err(CliError::Config(format!(
                "route `{other}`: expected newton|subsuper|nehari+|nehari-"
            )))
        }
    };
    write_output(out, &solution_csv(cfg, &forms, &rep)?)
}

/// Fibering analysis of a stored field at the configured lambda, as JSON.
pub fn run_fibering(cfg: &RunConfig, field_path: &Path, out: Option<&Path>) -> CliResult<()> {
    let forms = forms_from(cfg)?;
    let params = cfg.params()?;
    let u = read_field(&forms, field_path)?;
    let rep = fibering(&forms, &u, &params)?;
    let doc = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": format!("{:016x}", cfg.config_hash()),
        "identity_hash": format!("{:016x}", cfg.identity_hash()?),
        "mesh_h": forms.mesh.h,
        "lambda": params.lambda,
        "energies": { "e": rep.triple.e, "a": rep.triple.a, "b": rep.triple.b },
        "t0": rep.t0,
        "roots": rep.roots,
        "threshold": rep.threshold,
        "classification": format!("{:?}", rep.classification),
    });
    let mut body = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::Solver(format!("JSON encoding failed: {e}")))?;
    body.push('\n');
    write_output(out, &body)
}

fn stability_str(s: &StabilityLabel) -> &'static str {
    match s {
        StabilityLabel::Stable => "stable",
        StabilityLabel::Unstable => "unstable",
        StabilityLabel::Marginal => "marginal",
        StabilityLabel::NotComputed => "",
    }
}

fn branch_csv(cfg: &RunConfig, forms: &AssembledForms, branch: &Branch) -> CliResult<String> {
    let mut body = String::new();
    body.push_str(&header_line(cfg, forms.mesh.h)?);
    body.push('\n');
    if let Some(ls) = branch.lambda_star {
        body.push_str(&format!("# lambda_star={}\n", fmt_f64(ls)));
    }
    if let Some(det) = detected_bifurcation_lambda(branch) {
        if branch.eps > 0.0 {
            body.push_str(&format!("# detected_bifurcation={}\n", fmt_f64(det)));
        }
    }
    for e in &branch.endpoints {
        body.push_str(&format!("# endpoint: {e}\n"));
    }
    body.push_str(
        "lambda,mu,chart,l2,h1,linf,min_bd,E,A,B,J,gamma1,stability,fold_flag\n",
    );
    for p in &branch.points {
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(p.lambda),
            fmt_f64(p.mu),
            match p.chart {
                Chart::U => "U",
                Chart::V => "V",
            },
            fmt_f64(p.norms.l2),
            fmt_f64(p.norms.h1),
            fmt_f64(p.norms.linf),
            fmt_f64(p.norms.min_boundary),
            fmt_f64(p.energies.e),
            fmt_f64(p.energies.a),
            fmt_f64(p.energies.b),
            fmt_f64(p.j_value),
            p.gamma1.map(fmt_f64).unwrap_or_default(),
            stability_str(&p.stability),
            if p.fold_flag { 1 } else { 0 },
        ));
    }
    Ok(body)
}

/// Branch tracing: the plain branch from (0, 1), a regularized component, or
/// the full two-chart continuum skeleton.
pub fn run_continue(cfg: &RunConfig, out: Option<&Path>, continuum: bool) -> CliResult<()> {
    let forms = forms_from(cfg)?;
    let params = cfg.params()?;
    let step = cfg.f64_or("step", 0.05)?;
    let branch = if continuum {
        let schedule = match cfg.get("eps_schedule") {
            Some(_) => {
                let mut s = cfg.f64_list("eps_schedule")?;
                s.reverse(); // traced from the largest eps down
                s
            }
            None => vec![1e-1, 1e-2, 1e-3],
        };
        trace_continuum_c0(&forms, &params, &schedule, step)?
    } else if params.eps > 0.0 {
        continue_regularized(&forms, &params, step)?
    } else {
        let max_lambda = cfg.f64_or("max_lambda", 10.0)?;
        continue_from_trivial_one(&forms, &params, step, max_lambda)?
    };
    write_output(out, &branch_csv(cfg, &forms, &branch)?)
}

/// Merges branch CSVs into one plot-ready file, refusing inputs whose
/// problem-identity hashes disagree.
pub fn run_diagram(inputs: &[PathBuf], out: Option<&Path>) -> CliResult<()> {
    if inputs.is_empty() {
        return Err(CliError::Config("diagram needs at least one input".into()));
    }
    let mut key: Option<String> = None;
    let mut merged = String::new();
    let mut rows = String::new();
    let mut columns: Option<String> = None;
    for (bi, path) in inputs.iter().enumerate() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let header = text
            .lines()
            .next()
            .unwrap_or("")
            .to_string();
        let this_key = header
            .split_whitespace()
            .find_map(|tok| tok.strip_prefix("key="))
            .ok_or_else(|| {
                CliError::Config(format!(
                    "{}: missing identity hash in header",
                    path.display()
                ))
            })?
            .to_string();
        match &key {
            None => {
                key = Some(this_key);
                merged.push_str(&format!(
                    "# logibranch {} diagram key={}\n",
                    env!("CARGO_PKG_VERSION"),
                    key.as_ref().unwrap()
                ));
            }
            Some(k) if *k != this_key => {
                return Err(CliError::Config(format!(
                    "{}: identity hash {} does not match {}",
                    path.display(),
                    this_key,
                    k
                )));
            }
            _ => {}
        }
        for line in text.lines().skip(1) {
            if line.starts_with('#') {
                continue;
            }
            if line.starts_with("lambda,") {
                if columns.is_none() {
                    columns = Some(format!("branch,{line}\n"));
                }
                continue;
            }
            if !line.trim().is_empty() {
                rows.push_str(&format!("{bi},{line}\n"));
            }
        }
    }
    merged.push_str(&columns.unwrap_or_else(|| "branch\n".into()));
    merged.push_str(&rows);
    write_output(out, &merged)
}

/// Lambda-sweep studies: lower-branch decay rate or the approach to the
/// interior-limit solution at large lambda.
pub fn run_asympt(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let forms = forms_from(cfg)?;
    let base = cfg.params()?;
    let lambdas = cfg.f64_list("lambdas")?;
    let mode = cfg.str_or("mode", "lower-branch");
    let mut body = String::new();
    body.push_str(&header_line(cfg, forms.mesh.h)?);
    body.push('\n');
    match mode.as_str() {
        "lower-branch" => {
            use rayon::prelude::*;
            let reports: Vec<CliResult<SolveReport>> = lambdas
                .par_iter()
                .map(|&lam| {
                    let pl = base.clone().with_lambda(lam)?;
                    Ok(nehari_minimize(&forms, &pl, BranchSign::Minus, 6)?)
                })
                .collect();
            let mut pts = Vec::new();
            body.push_str("lambda,l2,h1,linf\n");
            let mut rows = String::new();
            for (lam, rep) in lambdas.iter().zip(reports) {
                let rep = rep?;
                let h1 = forms.h1_norm(&rep.field);
                pts.push((lam.ln(), h1.ln()));
                rows.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_f64(*lam),
                    fmt_f64(forms.l2_norm(&rep.field)),
                    fmt_f64(h1),
                    fmt_f64(rep.field.max())
                ));
            }
            let n = pts.len() as f64;
            let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
            let (sxx, sxy) = pts
                .iter()
                .fold((0.0, 0.0), |(a, b), p| (a + p.0 * p.0, b + p.0 * p.1));
            let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            body.push_str(&format!("# loglog_slope={}\n", fmt_f64(slope)));
            body.push_str(&rows);
        }
        "dirichlet-limit" => {
            let ud = dirichlet_logistic(&forms, 1e-12)?.field;
            // warm-started chain: each solve seeds the next lambda
            let w = build_subsolution(&forms, &base.clone().with_lambda(lambdas[0])?, 0.5)?;
            let one = Field::constant(&forms.mesh, 1.0);
            let mut guess =
                monotone_iterate(&forms, &w, &one, &base.clone().with_lambda(lambdas[0])?, 1e-10)?
                    .field;
            body.push_str("lambda,l2_dist,min_bd,max_bd\n");
            let mut rows = String::new();
            let mut dists = Vec::new();
            for &lam in &lambdas {
                let pl = base.clone().with_lambda(lam)?;
                let rep = newton_solve(&forms, &guess, &pl, 1e-11, 100)?;
                guess = rep.field.clone();
                let diff = Field::new(
                    &forms.mesh,
                    rep.field
                        .coeffs
                        .iter()
                        .zip(&ud.coeffs)
                        .map(|(a, b)| a - b)
                        .collect(),
                )?;
                let d = forms.l2_norm(&diff);
                dists.push(d);
                rows.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_f64(lam),
                    fmt_f64(d),
                    fmt_f64(forms.min_boundary(&rep.field)),
                    fmt_f64(forms.max_boundary(&rep.field))
                ));
            }
            let monotone = dists.windows(2).all(|w| w[1] < w[0]);
            body.push_str(&format!("# monotone_decreasing={monotone}\n"));
            body.push_str(&rows);
        }
        other => {
            return Err(CliError::Config(format!(
                "mode `{other}`: expected lower-branch|dirichlet-limit"
            )))
        }
    }
    write_output(out, &body)
}

/// Shooting-based reference results mirroring `solve`/`continue` outputs.
pub fn run_oracle(cfg: &RunConfig, out: Option<&Path>, what: &str) -> CliResult<()> {
    let domain = cfg.domain()?;
    let params = cfg.params()?;
    let forms = forms_from(cfg)?;
    let mut body = String::new();
    body.push_str(&header_line(cfg, forms.mesh.h)?);
    body.push('\n');
    match what {
        "count" => {
            let scan = cfg.usize_or("scan_points", 2000)?;
            let res = oracle1d::shoot_count(&domain, &params, scan)?;
            body.push_str(&format!(
                "# count={} scan_resolution={}\n",
                res.count, res.scan_resolution
            ));
            body.push_str("match,x,u\n");
            for (mi, m) in res.matches.iter().enumerate() {
                for &(x, u) in &m.profile {
                    body.push_str(&format!("{mi},{},{}\n", fmt_f64(x), fmt_f64(u)));
                }
            }
        }
        "fold" => {
            let scan = cfg.usize_or("scan_points", 400)?;
            let lam = oracle1d::fold_lambda(&domain, &params, scan, 1e-5)?;
            body.push_str("quantity,value\n");
            body.push_str(&format!("fold_lambda,{}\n", fmt_f64(lam)));
        }
        "limit-profile" => {
            let q = cfg.f64_or("q", 0.5)?;
            let v0 = oracle1d::shoot_limit_problem(&domain, q)?;
            body.push_str(&format!(
                "# c1={} c2={}\n",
                fmt_f64(v0.c1),
                fmt_f64(v0.c2)
            ));
            body.push_str("x,u\n");
            for &(x, _) in &forms.mesh.nodes {
                body.push_str(&format!("{},{}\n", fmt_f64(x), fmt_f64(v0.eval(x))));
            }
        }
        "eigen" => {
            let (lam, s1) = oracle1d::analytic_eigen(&domain);
            body.push_str("quantity,value\n");
            body.push_str(&format!("lambda_omega,{}\n", fmt_f64(lam)));
            if let Some(s) = s1 {
                body.push_str(&format!("sigma1,{}\n", fmt_f64(s)));
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "oracle `{other}`: expected count|fold|limit-profile|eigen"
            )))
        }
    }
    write_output(out, &body)
}
