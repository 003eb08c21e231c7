//! `vmbspec` command line: configuration, experiment drivers and CSV output.
//!
//! Exit codes: 0 success, 1 computation or acceptance failure, 2
//! configuration error. Every CSV row ends with the config hash.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::checks::{run_suite, SuiteOptions};
use crate::collision::{self, CollisionMatrices};
use crate::config::{ConfigError, RunConfig};
use crate::dispersion::{asymptotic_coefficients, trace_branch, DispersionBranch, Resolvent};
use crate::error::Error;
use crate::modes::{assemble_mode, Frame, ModeKind};
use crate::semigroup::{
    decay_targets, fit_exponent, synthesize_decay, Channel, ExperimentConfig, FrameMode, Profile, Scenario,
};
use crate::spectra::{eig_all_residuals, gap_scan};
use crate::velocity::{build_grid, VelocityGrid};
use crate::c64;

#[derive(Debug, Parser)]
#[command(name = "vmbspec", version, about = "Spectra and decay rates of the linearized Vlasov-Maxwell-Boltzmann system")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// two, one or boltzmann.
    #[arg(long, global = true)]
    pub species: Option<String>,
    /// two_species_field, one_magnetic, one_electric or boltzmann.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    #[arg(long, global = true)]
    pub smin: Option<f64>,
    #[arg(long, global = true)]
    pub smax: Option<f64>,
    /// Number of s levels (radial nodes for `decay`).
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub tmax: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Velocity points per axis.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true, hide = true)]
    pub inject_fault: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expansion and transport coefficients with grid-refinement deltas.
    Coeffs,
    /// Trace a dispersion branch over s.
    Branch {
        /// two_low1, one_low, one_det0, one_det1, one_osc, two_high, one_high.
        #[arg(long)]
        which: Option<String>,
    },
    /// Full spectrum of one mode operator.
    Spectrum {
        #[arg(long)]
        s: Option<f64>,
    },
    /// Rightmost eigenvalue over a range of s.
    Gap,
    /// Mode-summed decay curves and fitted slopes.
    Decay,
    /// Run the invariant suite.
    Validate,
}

/// Failure of a subcommand, mapped to an exit code.
#[derive(Debug)]
enum Fail {
    Config(String),
    Compute(String),
}

impl From<ConfigError> for Fail {
    fn from(e: ConfigError) -> Self {
        Fail::Config(e.to_string())
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Compute(e.to_string())
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Compute(format!("write failed: {e}"))
    }
}

type Outcome = std::result::Result<(), Fail>;

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return 2;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.run.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("configuration error: thread pool: {e}");
            return 2;
        }
    };
    let result = pool.install(|| dispatch(&cli, &cfg));
    match result {
        Ok(()) => 0,
        Err(Fail::Config(m)) => {
            eprintln!("configuration error: {m}");
            2
        }
        Err(Fail::Compute(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

/// File config (or defaults) with command-line overrides applied and validated.
pub fn resolve_config(cli: &Cli) -> std::result::Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &cli.species {
        cfg.run.species = v.clone();
    }
    if let Some(v) = &cli.scenario {
        cfg.run.scenario = v.clone();
    }
    if let Some(v) = cli.threads {
        cfg.run.threads = v;
    }
    if let Some(v) = cli.seed {
        cfg.run.seed = v;
    }
    if let Some(n) = cli.n {
        match cli.command {
            Command::Decay => cfg.decay.n_per_axis = n,
            _ => cfg.grid.n_per_axis = n,
        }
    }
    match &cli.command {
        Command::Branch { which } => {
            if let Some(w) = which {
                cfg.branch.which = w.clone();
            }
            override_range(cli, &mut cfg.branch.s_min, &mut cfg.branch.s_max, &mut cfg.branch.steps);
        }
        Command::Gap => override_range(cli, &mut cfg.gap.s_min, &mut cfg.gap.s_max, &mut cfg.gap.steps),
        Command::Spectrum { s: Some(s) } => cfg.spectrum.s = *s,
        Command::Decay => {
            let d = &mut cfg.decay;
            override_range(cli, &mut d.s_min, &mut d.s_max, &mut d.n_radial);
            if let Some(t) = cli.tmax {
                d.t_max = t;
                d.window[1] = d.window[1].min(t);
                d.window[0] = d.window[0].min(d.window[1]);
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn override_range(cli: &Cli, lo: &mut f64, hi: &mut f64, steps: &mut usize) {
    if let Some(v) = cli.smin {
        *lo = v;
    }
    if let Some(v) = cli.smax {
        *hi = v;
    }
    if let Some(v) = cli.steps {
        *steps = v;
    }
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Outcome {
    match &cli.command {
        Command::Coeffs => cmd_coeffs(cfg, &cli.out),
        Command::Branch { .. } => cmd_branch(cfg, &cli.out),
        Command::Spectrum { .. } => cmd_spectrum(cfg, &cli.out),
        Command::Gap => cmd_gap(cfg, &cli.out),
        Command::Decay => cmd_decay(cfg, &cli.out),
        Command::Validate => cmd_validate(cfg, &cli.out, cli.inject_fault),
    }
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String], hash: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    let _ = writeln!(out, "{header},config_hash");
    for r in rows {
        let _ = writeln!(out, "{r},{hash}");
    }
    let path = dir.join(name);
    fs::write(&path, out)?;
    Ok(path)
}

fn mode_kind(species: &str) -> std::result::Result<ModeKind, Fail> {
    match species {
        "two" => Ok(ModeKind::TwoSpecies),
        "one" => Ok(ModeKind::OneSpecies),
        "boltzmann" => Ok(ModeKind::Boltzmann),
        other => Err(Fail::Config(format!("unknown species '{other}'"))),
    }
}

fn setup(n: usize, scale: f64) -> std::result::Result<(VelocityGrid, CollisionMatrices), Fail> {
    let grid = build_grid(n, scale)?;
    let cm = collision::assemble(&grid)?;
    Ok((grid, cm))
}

/// Geometric grid of `steps` levels from `lo` to `hi`.
pub fn geometric(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (steps - 1) as f64;
    (0..steps).map(|k| if k + 1 == steps { hi } else { lo * (r * k as f64).exp() }).collect()
}

fn cmd_coeffs(cfg: &RunConfig, out: &Path) -> Outcome {
    let hash = cfg.hash();
    let (grid, cm) = setup(cfg.grid.n_per_axis, cfg.grid.scale)?;
    let c = asymptotic_coefficients(&cm, &grid)?;
    drop(cm);
    let (gr, cmr) = setup(cfg.grid.refine_n, cfg.grid.scale)?;
    let cr = asymptotic_coefficients(&cmr, &gr)?;
    println!("coefficients at n = {} (delta against n = {}):", cfg.grid.n_per_axis, cfg.grid.refine_n);
    let mut rows = Vec::new();
    let mut coarse = Vec::new();
    for ((name, v), (_, vr)) in c.named().into_iter().zip(cr.named()) {
        let delta = vr - v;
        println!("  {name:<8} {v:>14.8}  delta {delta:+.3e}");
        if (delta / v).abs() >= 0.02 {
            coarse.push(name);
        }
        rows.push(format!("{name},{},{}", num(v), num(delta)));
    }
    let path = write_csv(out, "coeffs.csv", "name,value,refinement_delta", &rows, &hash)?;
    println!("wrote {}", path.display());
    if !coarse.is_empty() {
        eprintln!("warning: relative refinement delta >= 2% for {}", coarse.join(", "));
    }
    let id = (c.kappa3 * c.a1_two - 1.0).abs();
    if !(id <= 1e-6) {
        return Err(Fail::Compute(format!("check kappa3_a1_identity failed: |kappa3 a1_two - 1| = {id:.3e}")));
    }
    Ok(())
}

/// Dispersion function, initial guess at the first level, and multiplicity.
fn branch_spec<'r>(
    which: &str,
    res: &'r Resolvent<'r>,
    s0: f64,
    c: &crate::dispersion::SpectrumCoefficients,
) -> std::result::Result<(Box<dyn Fn(c64, f64) -> crate::Result<c64> + 'r>, c64, usize), Fail> {
    let i = c64::new(0.0, 1.0);
    let s2 = s0 * s0;
    Ok(match which {
        "two_low1" => (Box::new(move |l, s| res.d_two_low1(l, s)), c64::new(-c.a1_two * s2, 0.0), 2),
        "one_low" => (Box::new(move |l, s| res.d_one_low(l, s)), c64::new(-c.a3 * s2 * s2, 0.0), 2),
        "one_det0" => (Box::new(move |l, s| res.detm_one(l, s)), c64::new(-c.a0 * s2, 0.0), 1),
        "one_det1" => (Box::new(move |l, s| res.detm_one(l, s)), i + c64::new(-c.a1, c.b1) * s2, 1),
        "one_osc" => (Box::new(move |l, s| res.d_one_low(l, s)), i + c64::new(-c.a2, c.b2) * s2, 2),
        "two_high" => (Box::new(move |l, s| res.d_high(ModeKind::TwoSpecies, l, s)), i * s0, 2),
        "one_high" => (Box::new(move |l, s| res.d_high(ModeKind::OneSpecies, l, s)), i * s0, 2),
        other => return Err(Fail::Config(format!("unknown branch '{other}'"))),
    })
}

/// Traces the configured branch; shared with the acceptance harness.
pub fn trace_configured_branch(cfg: &RunConfig, grid: &VelocityGrid, cm: &CollisionMatrices) -> crate::Result<DispersionBranch> {
    let c = asymptotic_coefficients(cm, grid)?;
    let res = Resolvent::new(cm, grid)?;
    let b = &cfg.branch;
    let (d, seed, mult) =
        branch_spec(&b.which, &res, b.s_min, &c).map_err(|_| Error::Domain(format!("unknown branch '{}'", b.which)))?;
    trace_branch(d, &geometric(b.s_min, b.s_max, b.steps), seed, &b.which, mult)
}

fn cmd_branch(cfg: &RunConfig, out: &Path) -> Outcome {
    let (grid, cm) = setup(cfg.grid.n_per_axis, cfg.grid.scale)?;
    let br = trace_configured_branch(cfg, &grid, &cm)?;
    let rows: Vec<String> = (0..br.s.len())
        .map(|k| {
            format!(
                "{},{},{},{},{},{}",
                num(br.s[k]),
                num(br.lambda[k].re),
                num(br.lambda[k].im),
                num(br.residual[k]),
                br.converged[k],
                br.multiplicity
            )
        })
        .collect();
    let path = write_csv(out, "branch.csv", "s,re_lambda,im_lambda,residual,converged,multiplicity", &rows, &cfg.hash())?;
    let ok = br.converged.iter().filter(|&&c| c).count();
    println!("branch {}: {ok}/{} levels converged; wrote {}", br.label, cfg.branch.steps, path.display());
    if !br.complete {
        eprintln!("warning: continuation stopped at s = {:.6e}", br.s.last().copied().unwrap_or(f64::NAN));
    }
    if br.ambiguous() {
        eprintln!("warning: another root is reachable from the constant predictor at some levels");
    }
    if ok == 0 {
        return Err(Fail::Compute("no converged branch points".into()));
    }
    Ok(())
}

fn cmd_spectrum(cfg: &RunConfig, out: &Path) -> Outcome {
    let kind = mode_kind(&cfg.run.species)?;
    let (grid, cm) = setup(cfg.grid.n_per_axis, cfg.grid.scale)?;
    let s = cfg.spectrum.s;
    let op = assemble_mode(kind, s, Frame::canonical(), &cm, &grid)?;
    let mut pairs = eig_all_residuals(&op)?;
    pairs.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(b.0.im.total_cmp(&a.0.im)));
    let rows: Vec<String> = pairs
        .iter()
        .enumerate()
        .map(|(k, (l, r))| format!("{},{k},{},{},{}", num(s), num(l.re), num(l.im), num(*r)))
        .collect();
    let path = write_csv(out, "spectrum.csv", "s,index,re_lambda,im_lambda,residual", &rows, &cfg.hash())?;
    let cut = -cm.gap(kind.collision_species()) / 2.0;
    let right: Vec<c64> = pairs.iter().map(|p| p.0).filter(|z| z.re > cut).collect();
    println!("{} eigenvalues at s = {s}; {} with Re > {cut:.6}:", pairs.len(), right.len());
    for z in &right {
        println!("  {:+.10e} {:+.10e}i", z.re, z.im);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_gap(cfg: &RunConfig, out: &Path) -> Outcome {
    let kind = mode_kind(&cfg.run.species)?;
    let (grid, cm) = setup(cfg.grid.n_per_axis, cfg.grid.scale)?;
    let g = &cfg.gap;
    let scan = gap_scan(kind, &geometric(g.s_min, g.s_max, g.steps), &cm, &grid)?;
    let rows: Vec<String> = scan.rows.iter().map(|(s, r)| format!("{},{}", num(*s), num(*r))).collect();
    let path = write_csv(out, "gap.csv", "s,rightmost_re", &rows, &cfg.hash())?;
    println!("empirical gap alpha = {:.6e}; wrote {}", scan.alpha_emp, path.display());
    if !(scan.alpha_emp > 0.0) {
        return Err(Fail::Compute(format!("rightmost eigenvalue has Re >= 0 (alpha = {:.3e})", scan.alpha_emp)));
    }
    Ok(())
}

/// Experiment settings from the decay section.
pub fn experiment_config(cfg: &RunConfig) -> std::result::Result<ExperimentConfig, ConfigError> {
    let d = &cfg.decay;
    let scenario: Scenario = cfg
        .run
        .scenario
        .parse()
        .map_err(|e: Error| ConfigError::Range { key: "run.scenario".into(), msg: e.to_string() })?;
    let mut e = ExperimentConfig::new(scenario);
    e.n_radial = d.n_radial;
    e.s_min = d.s_min;
    e.s_max = d.s_max;
    e.t_max = d.t_max;
    e.n_times = d.n_times;
    e.n_per_axis = d.n_per_axis;
    e.frames = if d.frames == "direct" { FrameMode::Direct } else { FrameMode::Aligned };
    e.profile = Profile { d0: d.d0, r0: d.r0 };
    Ok(e)
}

fn cmd_decay(cfg: &RunConfig, out: &Path) -> Outcome {
    let e = experiment_config(cfg)?;
    let (grid, cm) = setup(e.n_per_axis, cfg.grid.scale)?;
    let curve = synthesize_decay(&e, &cm, &grid)?;
    let hash = cfg.hash();
    let order = [
        Channel::F,
        Channel::E,
        Channel::B,
        Channel::Density,
        Channel::Momentum,
        Channel::Energy,
        Channel::Micro,
        Channel::Pd,
        Channel::Pr,
    ];
    let rows: Vec<String> = (0..curve.times.len())
        .map(|k| {
            let mut r = num(curve.times[k]);
            for ch in order {
                r.push(',');
                if let Some(v) = curve.channel(ch) {
                    r += &num(v[k]);
                }
            }
            r
        })
        .collect();
    let header = "t,norm_f,norm_E,norm_B,norm_density,norm_momentum,norm_energy,norm_micro,norm_pd,norm_pr";
    let path = write_csv(out, "decay.csv", header, &rows, &hash)?;
    let window = (cfg.decay.window[0], cfg.decay.window[1]);
    println!("scenario {} ({} modes), window [{}, {}]", e.scenario, curve.n_modes, window.0, window.1);
    println!("  {:<9} {:>10} {:>9}  {:<32} result", "channel", "slope", "stderr", "target");
    let mut failed = Vec::new();
    let mut fit_rows = Vec::new();
    for (ch, target) in decay_targets(e.scenario, cfg.decay.slope_tol) {
        match fit_exponent(&curve, ch, window, target.mode()) {
            Ok(fit) => {
                let ok = target.accepts(fit.slope);
                println!(
                    "  {:<9} {:>10.4} {:>9.2e}  {:<32} {}",
                    ch.name(),
                    fit.slope,
                    fit.stderr,
                    target.to_string(),
                    if ok { "pass" } else { "FAIL" }
                );
                fit_rows.push(format!("{},{},{},{},{ok}", ch.name(), num(fit.slope), num(fit.stderr), target));
                if !ok {
                    failed.push(ch.name());
                }
            }
            Err(err) => {
                println!("  {:<9} fit failed: {err}", ch.name());
                fit_rows.push(format!("{},,,{},false", ch.name(), target));
                failed.push(ch.name());
            }
        }
    }
    let fits = write_csv(out, "decay_fit.csv", "channel,slope,stderr,target,pass", &fit_rows, &hash)?;
    println!("wrote {} and {}", path.display(), fits.display());
    if !failed.is_empty() {
        return Err(Fail::Compute(format!("slope targets missed for: {}", failed.join(", "))));
    }
    Ok(())
}

fn cmd_validate(cfg: &RunConfig, out: &Path, inject: bool) -> Outcome {
    let opts = SuiteOptions { n_per_axis: cfg.grid.n_per_axis, seed: cfg.run.seed, inject_maxwell_fault: inject };
    let checks = run_suite(&opts);
    let mut rows = Vec::new();
    for c in &checks {
        println!("{} {}.{}: {}", if c.pass { "PASS" } else { "FAIL" }, c.module, c.name, c.detail);
        rows.push(format!("{},{},{},\"{}\"", c.module, c.name, c.pass, c.detail.replace('"', "'")));
    }
    let path = write_csv(out, "validate.csv", "module,check,pass,detail", &rows, &cfg.hash())?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("summary: {} checks, {} passed, {failed} failed; wrote {}", checks.len(), checks.len() - failed, path.display());
    match checks.iter().find(|c| !c.pass) {
        Some(c) => Err(Fail::Compute(format!("first failing invariant: {}.{}", c.module, c.name))),
        None => Ok(()),
    }
}
