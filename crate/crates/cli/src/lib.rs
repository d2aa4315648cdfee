//! Command-line front end for `calr-core`.
//!
//! Every subcommand writes a CSV file and `manifest.txt` into the output
//! directory. Exit codes: 0 success, 1 invalid input or I/O failure, 2 a
//! numerical failure or a failed validation.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use calr_core::blocks::{exact_eigen, BlockKey, Parity};
use calr_core::engine::{
    classify_source, delta_sweep, energy_proxy, evaluate_field, solve, Problem,
};
use calr_core::material::{contrast_for_resonance, critical_radii, z_of_contrast, ResonanceSign};
use calr_core::validation::{format_f64 as f, run_validation, ValidationConfig};
use calr_core::CalrError;
use clap::{Parser, Subcommand};

use config::{ConfigError, LossSpec, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "calr",
    version,
    about = "Anomalous localized resonance of a coated elastic disk"
)]
pub struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Truncation order (solve, field) or highest order (spectrum, validate).
    #[arg(long, global = true, value_name = "N")]
    pub n_max: Option<usize>,
    /// Loss parameter.
    #[arg(long, global = true, value_name = "X", conflicts_with = "delta_grid")]
    pub delta: Option<f64>,
    /// Log-spaced loss grid.
    #[arg(long, global = true, num_args = 3, value_names = ["START", "STOP", "COUNT"])]
    pub delta_grid: Option<Vec<String>>,
    /// Accepted for reproducibility records; every computation is deterministic.
    #[arg(long, global = true, value_name = "SEED")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Material constants, resonant contrasts and critical radii.
    Params,
    /// Exact and asymptotic NP block eigenvalues.
    Spectrum,
    /// Solve the transmission problem at one loss value.
    Solve,
    /// Energy proxy over a loss grid with the fitted blow-up exponent.
    Sweep,
    /// Displacement on a square grid.
    Field,
    /// Place the source relative to the critical radii.
    Classify,
    /// Compare closed forms against the quadrature oracles.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Params => "params",
            Command::Spectrum => "spectrum",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Field => "field",
            Command::Classify => "classify",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Io(String),
    Numerical(String),
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) | CliError::Mismatch(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => f_str(fm, m),
            CliError::Io(m) => write!(fm, "i/o error: {m}"),
            CliError::Numerical(m) => write!(fm, "numerical failure: {m}"),
            CliError::Mismatch(m) => write!(fm, "validation failed: {m}"),
        }
    }
}

fn f_str(fm: &mut std::fmt::Formatter<'_>, m: &str) -> std::fmt::Result {
    if m.starts_with("invalid input") {
        fm.write_str(m)
    } else {
        write!(fm, "invalid input: {m}")
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.0)
    }
}

impl From<CalrError> for CliError {
    fn from(e: CalrError) -> Self {
        if e.is_validation() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("calr: {e}");
            e.exit_code()
        }
    }
}

/// Resolves the configuration: file values first, then flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        c.out_dir = o.clone();
    }
    if let Some(n) = cli.n_max {
        c.n_max = Some(n);
    }
    if let Some(d) = cli.delta {
        c.loss = LossSpec::Single(d);
    }
    if let Some(v) = &cli.delta_grid {
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| CliError::Input(format!("--delta-grid: bad number `{s}`")))
        };
        let count = v[2]
            .parse::<usize>()
            .map_err(|_| CliError::Input(format!("--delta-grid: bad count `{}`", v[2])))?;
        c.loss = LossSpec::Grid {
            start: num(&v[0])?,
            stop: num(&v[1])?,
            count,
        };
    }
    c.validate()?;
    Ok(c)
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = resolve_config(cli)?;
    let mut manifest = vec![("command".to_string(), cli.command.name().to_string())];
    manifest.extend(cfg.manifest_entries());
    if let Some(s) = cli.seed {
        manifest.push(("seed".into(), s.to_string()));
    }
    let out = Output {
        csv: String::new(),
        manifest,
        summary: String::new(),
        failure: None,
    };
    let out = match cli.command {
        Command::Params => cmd_params(&cfg, out)?,
        Command::Spectrum => cmd_spectrum(&cfg, out)?,
        Command::Solve => cmd_solve(&cfg, out)?,
        Command::Sweep => cmd_sweep(&cfg, out)?,
        Command::Field => cmd_field(&cfg, out)?,
        Command::Classify => cmd_classify(&cfg, out)?,
        Command::Validate => cmd_validate(&cfg, out)?,
    };
    let csv_name = match cli.command {
        Command::Validate => "validation.csv".to_string(),
        c => format!("{}.csv", c.name()),
    };
    write_file(&cfg.out_dir, &csv_name, &out.csv)?;
    let mut text = String::new();
    for (k, v) in &out.manifest {
        let _ = writeln!(text, "{k} = {v}");
    }
    write_file(&cfg.out_dir, "manifest.txt", &text)?;
    if let Some(m) = out.failure {
        return Err(CliError::Mismatch(m));
    }
    Ok(out.summary)
}

struct Output {
    csv: String,
    manifest: Vec<(String, String)>,
    summary: String,
    failure: Option<String>,
}

impl Output {
    fn note(&mut self, k: &str, v: impl Into<String>) {
        self.manifest.push((k.to_string(), v.into()));
    }

    fn row(&mut self, cells: &[String]) {
        self.csv.push_str(&cells.join(","));
        self.csv.push('\n');
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn problem(cfg: &RunConfig) -> Result<Problem, CliError> {
    Ok(Problem::with_options(
        cfg.material()?,
        cfg.geometry()?,
        cfg.source()?,
        cfg.cap,
        cfg.inner_method,
    )?)
}

fn cmd_params(cfg: &RunConfig, mut out: Output) -> Result<Output, CliError> {
    let m = cfg.material()?;
    let g = cfg.geometry()?;
    let (r_star, r_star2) = critical_radii(&g);
    let k = &m.consts;
    let zc = z_of_contrast(g.contrast_c)?;
    let rows: Vec<(&str, f64)> = vec![
        ("lambda", m.lambda()),
        ("mu", m.mu()),
        ("alpha1", k.alpha1),
        ("alpha2", k.alpha2),
        ("k0", k.k0),
        ("kappa", k.kappa),
        ("c_plus", contrast_for_resonance(ResonanceSign::Plus, k.k0)?),
        (
            "c_minus",
            contrast_for_resonance(ResonanceSign::Minus, k.k0)?,
        ),
        ("contrast_c", g.contrast_c),
        ("z_c", zc),
        ("r_i", g.r_i),
        ("r_e", g.r_e),
        ("rho", g.rho()),
        ("r_star", r_star),
        ("r_star2", r_star2),
        ("bounded_radius_plus", g.r_e.powi(3) / (g.r_i * g.r_i)),
        ("bounded_radius_minus", g.r_e * g.r_e / g.r_i),
    ];
    out.row(&["quantity".into(), "value".into()]);
    for (name, v) in rows {
        out.row(&[name.into(), f(v)]);
        let _ = writeln!(out.summary, "{name} = {}", f(v));
    }
    let res = g.resonance(k.k0).map_or("none", |s| s.symbol());
    out.note("resonance_detected", res);
    let _ = writeln!(out.summary, "resonance = {res}");
    Ok(out)
}

fn cmd_spectrum(cfg: &RunConfig, mut out: Output) -> Result<Output, CliError> {
    let m = cfg.material()?;
    let g = cfg.geometry()?;
    let top = cfg.n_max.unwrap_or(20).max(2);
    let k0 = m.k0();
    out.note("spectrum_orders", format!("2..={top}"));
    out.row(
        &[
            "n",
            "parity",
            "label",
            "eigenvalue",
            "asymptotic",
            "target",
            "abs_deviation",
            "star_norm",
        ]
        .map(String::from),
    );
    let mut worst_residual = 0.0f64;
    for n in 2..=top {
        for parity in [Parity::V, Parity::Vtilde] {
            let key = BlockKey::new(n, parity)?;
            let s = exact_eigen(key, &g, &m)?;
            worst_residual = worst_residual.max(s.residual);
            let mut order: Vec<usize> = (0..s.labels.len()).collect();
            order.sort_by_key(|&i| s.labels[i]);
            for i in order {
                let label = s.labels[i];
                let target = if label == 2 || label == 3 { k0 } else { -k0 };
                let lam = s.eigenvalues[i];
                out.row(&[
                    n.to_string(),
                    parity.label().into(),
                    label.to_string(),
                    f(lam),
                    f(s.asymptotic_eigenvalues[i]),
                    f(target),
                    f((lam - target).abs()),
                    f(s.star_norms[i]),
                ]);
            }
        }
    }
    out.note("max_eigen_residual", f(worst_residual));
    let _ = writeln!(
        out.summary,
        "spectrum: orders 2..={top}, max eigen residual {}",
        f(worst_residual)
    );
    Ok(out)
}

fn cmd_solve(cfg: &RunConfig, mut out: Output) -> Result<Output, CliError> {
    let p = problem(cfg)?;
    let delta = cfg.delta()?;
    let st = solve(&p, delta, cfg.n_max)?;
    let (e, de) = energy_proxy(&st);
    out.row(
        &[
            "n",
            "parity",
            "slot",
            "re_phi",
            "im_phi",
            "residual",
            "backward_error",
            "condition",
            "block_norm_sq",
        ]
        .map(String::from),
    );
    for b in &st.blocks {
        for (c, &slot) in b.slots.iter().enumerate() {
            out.row(&[
                b.key.n.to_string(),
                b.key.parity.label().into(),
                slot.to_string(),
                f(b.phi[c].re),
                f(b.phi[c].im),
                f(b.residual),
                f(b.backward_error),
                f(b.condition),
                f(b.norm_sq),
            ]);
        }
    }
    out.note("N_max", st.n_max.to_string());
    out.note("truncated_at_cap", st.truncated_at_cap.to_string());
    out.note(
        "z_delta",
        format!("{} + {}i", f(st.z_delta.re), f(st.z_delta.im)),
    );
    out.note("energy_proxy", f(e));
    out.note("dissipated", f(de));
    out.note("tail_estimate", f(st.tail_estimate));
    out.note("max_residual", f(st.max_residual()));
    let _ = writeln!(
        out.summary,
        "solve: delta = {}, N_max = {}, E = {}, delta E = {}, max residual = {}",
        f(delta),
        st.n_max,
        f(e),
        f(de),
        f(st.max_residual())
    );
    if st.truncated_at_cap {
        let _ = writeln!(out.summary, "warning: truncation reached the cap");
    }
    Ok(out)
}

fn cmd_sweep(cfg: &RunConfig, mut out: Output) -> Result<Output, CliError> {
    let p = problem(cfg)?;
    let grid = cfg.delta_grid()?;
    let r = delta_sweep(&p, &grid)?;
    out.row(
        &[
            "delta",
            "energy_proxy",
            "dissipated",
            "n_max",
            "local_slope",
        ]
        .map(String::from),
    );
    for i in 0..r.delta_grid.len() {
        out.row(&[
            f(r.delta_grid[i]),
            f(r.energy_values[i]),
            f(r.dissipated[i]),
            r.n_max_used[i].to_string(),
            f(r.local_slopes[i]),
        ]);
    }
    out.note("fitted_exponent", f(r.fitted_exponent));
    out.note("fitted_log_power", f(r.fitted_log_power));
    out.note("fitted_constant", f(r.fitted_constant));
    out.note("predicted_exponent", f(r.predicted_exponent));
    out.note(
        "N_max",
        r.n_max_used.iter().max().copied().unwrap_or(0).to_string(),
    );
    for (i, w) in r.warnings.iter().enumerate() {
        out.note(&format!("warning_{i}"), w.clone());
    }
    let _ = writeln!(
        out.summary,
        "sweep: {} points, fitted exponent {} (predicted {})",
        grid.len(),
        f(r.fitted_exponent),
        f(r.predicted_exponent)
    );
    for w in &r.warnings {
        let _ = writeln!(out.summary, "warning: {w}");
    }
    Ok(out)
}

fn cmd_field(cfg: &RunConfig, mut out: Output) -> Result<Output, CliError> {
    let p = problem(cfg)?;
    let delta = cfg.delta()?;
    let st = solve(&p, delta, cfg.n_max)?;
    let extent = cfg
        .field_extent
        .unwrap_or(1.25 * p.geometry.r_e.max(p.source.distance()));
    let k = cfg.field_points;
    out.note("N_max", st.n_max.to_string());
    out.note("field_extent_used", f(extent));
    out.row(&["x1", "x2", "re_u1", "im_u1", "re_u2", "im_u2", "abs_u"].map(String::from));
    let mut skipped = 0usize;
    let mut peak = 0.0f64;
    for iy in 0..k {
        for ix in 0..k {
            let t = |i: usize| -extent + 2.0 * extent * i as f64 / (k - 1) as f64;
            let x = [t(ix), t(iy)];
            let mut cells = vec![f(x[0]), f(x[1])];
            match evaluate_field(&st, &p, x) {
                Ok(s) => {
                    let m = s.magnitude();
                    peak = peak.max(m);
                    cells.extend([s.u[0].re, s.u[0].im, s.u[1].re, s.u[1].im, m].map(f));
                }
                Err(e) if e.is_validation() => {
                    skipped += 1;
                    cells.extend(["NaN"; 5].map(String::from));
                }
                Err(e) => return Err(e.into()),
            }
            out.row(&cells);
        }
    }
    out.note("singular_points", skipped.to_string());
    let _ = writeln!(
        out.summary,
        "field: {k}x{k} grid on [-{e}, {e}]^2, N_max = {}, peak |u| = {}, {skipped} singular points",
        st.n_max,
        f(peak),
        e = f(extent)
    );
    Ok(out)
}

fn cmd_classify(cfg: &RunConfig, mut out: Output) -> Result<Output, CliError> {
    let m = cfg.material()?;
    let g = cfg.geometry()?;
    let s = cfg.source()?;
    let c = classify_source(&g, &m, &s)?;
    let opt = |v: Option<f64>| v.map_or("NaN".to_string(), f);
    let rows = [
        ("class", c.class.as_str().to_string()),
        (
            "resonance",
            c.resonance.map_or("none", |r| r.symbol()).to_string(),
        ),
        ("distance", f(c.distance)),
        ("r_star", f(c.r_star)),
        ("r_star2", f(c.r_star2)),
        ("critical_radius", opt(c.critical_radius)),
        ("boundedness_radius", opt(c.boundedness_radius)),
    ];
    out.row(&["quantity".into(), "value".into()]);
    for (k, v) in rows {
        out.row(&[k.into(), v.clone()]);
        let _ = writeln!(out.summary, "{k} = {v}");
    }
    out.note("class", c.class.as_str());
    Ok(out)
}

fn cmd_validate(cfg: &RunConfig, mut out: Output) -> Result<Output, CliError> {
    let vc = ValidationConfig {
        material: cfg.material()?,
        geometry: cfg.geometry()?,
        source: Some(cfg.source()?),
        n_max: cfg.n_max.unwrap_or(12),
    };
    let rep = run_validation(&vc)?;
    out.csv = rep.to_csv();
    let failures = rep.failures();
    out.note("checks", rep.checks.len().to_string());
    out.note("failures", failures.len().to_string());
    let worst = rep
        .checks
        .iter()
        .map(|c| c.abs_error() / c.tolerance)
        .fold(0.0, f64::max);
    out.note("worst_error_to_tolerance", f(worst));
    let _ = writeln!(
        out.summary,
        "validate: {} checks, {} failures",
        rep.checks.len(),
        failures.len()
    );
    if !failures.is_empty() {
        let names: Vec<&str> = failures.iter().take(5).map(|c| c.name.as_str()).collect();
        out.failure = Some(format!(
            "{} checks exceed tolerance (first: {})",
            failures.len(),
            names.join("; ")
        ));
    }
    Ok(out)
}
