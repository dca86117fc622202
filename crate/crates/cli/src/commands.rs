use std::fs;
use std::io::Write;
use std::path::Path;

use indist::analysis::convex::SolverDiagnostics;
use indist::analysis::{
    hellinger_sample_bounds, k_star_sweep, pseudo_hellinger, pseudo_renyi, renyi_sample_bounds,
    sandwich_report, KStarResult, PipelineConfig, SandwichReport,
};
use indist::constructions::{build_hat, hat_partition_tv_sandwich, verify_structural_tilde, build_tilde};
use indist::distributions::{mixture, ProbDist};
use indist::function_families::{best_advantage, Family};
use indist::generators::{default_family, generate, GeneratorSpec};
use indist::io::{
    family_to_text, read_distribution, read_family, read_partition, write_curve_csv, write_distribution,
    write_partition, write_report_csv,
};
use indist::multicalibration::{audit, build_partition_traced, target_g, MCParams, Partition};
use indist::{Error, Result, Scalar};
use serde::Serialize;

use crate::config::RunConfig;

/// Result of a command that produced its outputs; `Ok(false)` reports a
/// failed audit.
pub type Status = Result<bool>;

fn parse<S: Scalar>(text: &str, what: &str) -> Result<S> {
    S::parse_value(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

fn parse_opt<S: Scalar>(text: &Option<String>, what: &str) -> Result<Option<S>> {
    text.as_deref().map(|t| parse(t, what)).transpose()
}

struct Inputs<S> {
    x0: ProbDist<S>,
    x1: ProbDist<S>,
    family: Family<S>,
}

/// Prefixes I/O and parse errors with the offending path.
fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_inputs<S: Scalar>(cfg: &RunConfig) -> Result<Inputs<S>> {
    let p0 = cfg.require(&cfg.x0, "x0")?;
    let p1 = cfg.require(&cfg.x1, "x1")?;
    let x0 = with_path(p0, read_distribution::<S>(p0))?;
    let x1 = with_path(p1, read_distribution::<S>(p1))?;
    x0.domain().same_size(x1.domain())?;
    let family = match &cfg.family {
        Some(path) => with_path(path, read_family::<S>(path))?,
        None => default_family::<S>(x0.len())?,
    };
    if let Some(n) = family.domain_size() {
        if n != x0.len() {
            return Err(Error::DomainMismatch { left: n, right: x0.len() });
        }
    }
    Ok(Inputs { x0, x1, family })
}

fn pipeline_config<S: Scalar>(cfg: &RunConfig) -> Result<PipelineConfig<S>> {
    let mut p = PipelineConfig::new(parse(&cfg.epsilon, "epsilon")?, parse(&cfg.delta, "delta")?);
    p.gamma = parse_opt(&cfg.gamma, "gamma")?;
    p.budget = cfg.budget;
    p.mc_trials = cfg.mc_trials;
    p.seed = cfg.seed;
    p.regime = cfg.regime.regime();
    p.constants = cfg.constants.clone();
    Ok(p)
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Invariant(format!("report serialization: {e}")))
}

/// Writes the JSON report to `--out`, or to stdout without it.
fn emit<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = json(value)?;
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn write_csv_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(fs::write(path, buf)?)
}

#[derive(Serialize)]
struct HatSummary {
    eps_prime: String,
    parts: usize,
    swapped_parts: usize,
    threshold: f64,
    advantage: f64,
    partition_tv: f64,
    domain_tv: f64,
    upper: f64,
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    config: &'a RunConfig,
    scalar: &'static str,
    report: SandwichReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    hat: Option<HatSummary>,
}

fn hat_summary<S: Scalar>(inputs: &Inputs<S>, eps_prime: S) -> Result<HatSummary> {
    let d = mixture(&inputs.x0, &inputs.x1)?;
    let g = target_g(&inputs.x0, &inputs.x1)?;
    let params = MCParams::new(eps_prime.clone())?;
    let (partition, _) = build_partition_traced(&d, &g, &inputs.family, &params)?;
    let hat = build_hat(&inputs.x0, &inputs.x1, &partition, eps_prime.clone())?;
    let advantage =
        if inputs.family.is_empty() { 0.0 } else { best_advantage(&inputs.family, &inputs.x0, &hat.hat0)?.1.as_f64() };
    let sandwich = hat_partition_tv_sandwich(&hat, &inputs.x1)?;
    Ok(HatSummary {
        eps_prime: eps_prime.to_repr(),
        parts: partition.m(),
        swapped_parts: hat.swapped.iter().filter(|s| **s).count(),
        threshold: hat.threshold,
        advantage,
        partition_tv: sandwich.lo.as_f64(),
        domain_tv: sandwich.mid.as_f64(),
        upper: sandwich.hi,
    })
}

pub fn analyze<S: Scalar>(cfg: &RunConfig) -> Status {
    if cfg.k.len() != 1 {
        return Err(Error::InvalidParameter(format!("`analyze` takes a single k, got {:?}; use `sweep`", cfg.k)));
    }
    let inputs = load_inputs::<S>(cfg)?;
    let pcfg = pipeline_config::<S>(cfg)?;
    let eps_prime = parse_opt::<S>(&cfg.eps_prime, "eps-prime")?;
    let report = sandwich_report(&inputs.x0, &inputs.x1, &inputs.family, &cfg.k, &pcfg)?;
    let hat = eps_prime.map(|e| hat_summary(&inputs, e)).transpose()?;
    if let Some(path) = &cfg.csv {
        write_csv_file(path, |buf| write_report_csv(buf, &report, None))?;
    }
    emit(cfg.out.as_deref(), &AnalyzeReport { config: cfg, scalar: S::NAME, report, hat })?;
    Ok(true)
}

#[derive(Serialize)]
struct SweepReport<'a> {
    config: &'a RunConfig,
    scalar: &'static str,
    report: SandwichReport,
    k_star: Option<KStarResult>,
    status: String,
}

pub fn sweep<S: Scalar>(cfg: &RunConfig) -> Status {
    let inputs = load_inputs::<S>(cfg)?;
    let pcfg = pipeline_config::<S>(cfg)?;
    let report = sandwich_report(&inputs.x0, &inputs.x1, &inputs.family, &cfg.k, &pcfg)?;
    let k_star = k_star_sweep(&inputs.x0, &inputs.x1, &inputs.family, cfg.target, cfg.k_max, &pcfg);
    // A budget failure in the k* search still flushes the per-k report.
    let (k_star, status, failure) = match k_star {
        Ok(r) => (Some(r), "ok".to_string(), None),
        Err(e @ Error::BudgetExceeded { .. }) => (None, format!("k_star not computed: {e}"), Some(e)),
        Err(e) => return Err(e),
    };
    if let Some(path) = &cfg.csv {
        let ks = k_star.as_ref().map(|r| r.k_star);
        write_csv_file(path, |buf| write_report_csv(buf, &report, ks))?;
        if let Some(r) = &k_star {
            write_csv_file(&curve_path(path), |buf| write_curve_csv(buf, r))?;
        }
    }
    emit(cfg.out.as_deref(), &SweepReport { config: cfg, scalar: S::NAME, report, k_star, status })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(true),
    }
}

/// `<csv>.curve.csv` next to the sweep report.
pub fn curve_path(csv: &Path) -> std::path::PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".curve.csv");
    name.into()
}

#[derive(Serialize)]
struct McalReport<'a> {
    config: &'a RunConfig,
    scalar: &'static str,
    epsilon: String,
    gamma: String,
    grid: u64,
    parts: usize,
    rounds: usize,
    round_bound: f64,
    audit_pass: bool,
    labeling: Vec<usize>,
    part_weights: Vec<String>,
    v: Vec<String>,
}

fn mc_params<S: Scalar>(cfg: &RunConfig) -> Result<MCParams<S>> {
    let mut params = MCParams::new(parse::<S>(&cfg.epsilon, "epsilon")?)?.with_seed(cfg.seed);
    if let Some(gamma) = parse_opt::<S>(&cfg.gamma, "gamma")? {
        params = params.with_gamma(gamma)?;
    }
    Ok(params)
}

fn reprs<S: Scalar>(values: &[S]) -> Vec<String> {
    values.iter().map(S::to_repr).collect()
}

/// Builds the partition at accuracy `--epsilon`. `--out` receives the
/// partition file; the summary goes to stdout.
pub fn mcal<S: Scalar>(cfg: &RunConfig) -> Status {
    let inputs = load_inputs::<S>(cfg)?;
    let params = mc_params::<S>(cfg)?;
    let d = mixture(&inputs.x0, &inputs.x1)?;
    let g = target_g(&inputs.x0, &inputs.x1)?;
    let (partition, trace) = build_partition_traced(&d, &g, &inputs.family, &params)?;
    let report = audit(&partition, &d, &g, &inputs.family, &params)?;
    if !report.pass {
        return Err(Error::Invariant(format!("built partition fails its audit ({} violations)", report.violations.len())));
    }
    if let Some(path) = &cfg.out {
        write_partition(path, &partition)?;
    }
    emit(
        None,
        &McalReport {
            config: cfg,
            scalar: S::NAME,
            epsilon: params.epsilon.to_repr(),
            gamma: params.gamma.to_repr(),
            grid: params.grid,
            parts: partition.m(),
            rounds: trace.rounds,
            round_bound: trace.round_bound,
            audit_pass: report.pass,
            labeling: partition.labeling().to_vec(),
            part_weights: reprs(partition.part_weights()),
            v: reprs(partition.v()),
        },
    )?;
    Ok(true)
}

#[derive(Serialize)]
struct Violation {
    part: usize,
    function: String,
    correlation: String,
}

#[derive(Serialize)]
struct AuditOutput<'a> {
    config: &'a RunConfig,
    scalar: &'static str,
    pass: bool,
    parts: usize,
    violations: Vec<Violation>,
    skipped_light_parts: Vec<usize>,
    structural_parts_checked: usize,
}

/// Audits a stored partition against the calibration condition and the
/// structural identities of the tilde pair. A failed audit exits with 1.
pub fn audit_cmd<S: Scalar>(cfg: &RunConfig) -> Status {
    let inputs = load_inputs::<S>(cfg)?;
    let path = cfg.require(&cfg.partition, "partition")?;
    let partition: Partition<S> = with_path(path, read_partition(path))?;
    if partition.domain_size() != inputs.x0.len() {
        return Err(Error::DomainMismatch { left: partition.domain_size(), right: inputs.x0.len() });
    }
    let params = mc_params::<S>(cfg)?;
    let d = mixture(&inputs.x0, &inputs.x1)?;
    let g = target_g(&inputs.x0, &inputs.x1)?;
    let mut pass = partition.validate_against(&d, &g).is_ok();
    let report = audit(&partition, &d, &g, &inputs.family, &params)?;
    pass &= report.pass;
    let tilde = build_tilde(&inputs.x0, &inputs.x1, &partition, params.epsilon.clone())?;
    let structural = verify_structural_tilde(&tilde, &inputs.x0, &inputs.x1);
    pass &= structural.is_ok();
    let violations = report
        .violations
        .iter()
        .map(|v| Violation {
            part: v.part,
            function: inputs.family.functions()[v.function].name().to_string(),
            correlation: v.correlation.to_repr(),
        })
        .collect();
    emit(
        cfg.out.as_deref(),
        &AuditOutput {
            config: cfg,
            scalar: S::NAME,
            pass,
            parts: partition.m(),
            violations,
            skipped_light_parts: report.skipped_light_parts,
            structural_parts_checked: structural.map(|s| s.parts_checked).unwrap_or(0),
        },
    )?;
    Ok(pass)
}

#[derive(Serialize)]
struct HellingerSummary {
    delta_star: f64,
    delta_star_sq: f64,
    method: String,
    tilde0: Vec<f64>,
    tilde1: Vec<f64>,
    constraint_slack: [f64; 2],
    diagnostics: SolverDiagnostics,
}

#[derive(Serialize)]
struct RenyiSummary {
    r_star: f64,
    gap: f64,
    method: String,
    witness: Vec<f64>,
    constraint_slack: f64,
    diagnostics: SolverDiagnostics,
}

#[derive(Serialize)]
struct BoundRow {
    k: usize,
    hellinger_upper: f64,
    hellinger_lower: f64,
    renyi_upper: f64,
    renyi_lower: f64,
}

#[derive(Serialize)]
struct PseudoReport<'a> {
    config: &'a RunConfig,
    scalar: &'static str,
    hellinger: HellingerSummary,
    renyi: RenyiSummary,
    bounds: Vec<BoundRow>,
}

pub fn pseudo<S: Scalar>(cfg: &RunConfig) -> Status {
    let inputs = load_inputs::<S>(cfg)?;
    let eps = parse::<S>(&cfg.epsilon, "epsilon")?.as_f64();
    let h = pseudo_hellinger(&inputs.x0, &inputs.x1, &inputs.family, eps, &cfg.solver)?;
    let r = pseudo_renyi(&inputs.x0, &inputs.family, eps, &cfg.solver)?;
    let bounds = cfg
        .k
        .iter()
        .map(|&k| {
            let (hu, hl) = hellinger_sample_bounds(h.delta_star, eps, k);
            let (ru, rl) = renyi_sample_bounds(r.gap, eps, k, &cfg.constants);
            BoundRow { k, hellinger_upper: hu, hellinger_lower: hl, renyi_upper: ru, renyi_lower: rl }
        })
        .collect();
    let report = PseudoReport {
        config: cfg,
        scalar: S::NAME,
        hellinger: HellingerSummary {
            delta_star: h.delta_star,
            delta_star_sq: h.delta_star_sq,
            method: h.method,
            tilde0: h.tilde0.mass().to_vec(),
            tilde1: h.tilde1.mass().to_vec(),
            constraint_slack: h.constraint_slack,
            diagnostics: h.diagnostics,
        },
        renyi: RenyiSummary {
            r_star: r.r_star,
            gap: r.gap,
            method: r.method,
            witness: r.witness.mass().to_vec(),
            constraint_slack: r.constraint_slack,
            diagnostics: r.diagnostics,
        },
        bounds,
    };
    emit(cfg.out.as_deref(), &report)?;
    Ok(true)
}

#[derive(Serialize)]
struct GenerateReport<'a> {
    config: &'a RunConfig,
    x0: String,
    x1: String,
    family: String,
}

/// Writes `x0.toml`, `x1.toml` and `family.txt` into the `--out` directory.
pub fn generate_cmd<S: Scalar>(cfg: &RunConfig) -> Status {
    let spec: &GeneratorSpec = cfg
        .generator
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("`generate` needs a generator kind".into()))?;
    let dir = cfg.require(&cfg.out, "out")?;
    let inst = generate::<S>(spec)?;
    fs::create_dir_all(dir)?;
    let paths = [dir.join("x0.toml"), dir.join("x1.toml"), dir.join("family.txt")];
    write_distribution(&paths[0], &inst.x0)?;
    write_distribution(&paths[1], &inst.x1)?;
    fs::write(&paths[2], family_to_text(&inst.family))?;
    let show = |p: &Path| p.display().to_string();
    emit(None, &GenerateReport { config: cfg, x0: show(&paths[0]), x1: show(&paths[1]), family: show(&paths[2]) })?;
    Ok(true)
}
