//! End-to-end bound evaluation: the per-`k` sandwich between the tilde pair's
//! product TV and the built distinguisher, the pseudo-Hellinger and
//! pseudo-Rényi convex programs, the product bound over an enlarged family,
//! and sample-complexity sweeps.

pub mod convex;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::config::{BoundConstants, DEFAULT_BUDGET};
use crate::constructions::{
    alphas, build_tilde, verify_indistinguishability, verify_structural_tilde, AlphaTable, IndistinguishabilityCheck,
    StructuralReport, TildePair,
};
use crate::distinguisher::{
    exact_advantage, guarantee_floor, mc_advantage, round_alphas, AdvantageEstimate, AdvantageMethod,
    RoundedAlphaTable,
};
use crate::distributions::{hellinger, hellinger_sq, mixture, product_tv_exact, pushforward, ProbDist};
use crate::error::{Error, Result};
use crate::function_families::{
    all_boolean_family, best_advantage, product_family, Family, ProductMode, TestFunction,
};
use crate::multicalibration::{build_partition_traced, target_g, MCParams, Partition};
use crate::scalar::Scalar;

use convex::{minimize, HellingerObjective, LinearConstraint, Problem, RootSumObjective, SolverConfig, SolverDiagnostics};

/// Slack for comparing `f64` bound evaluations.
pub const BOUND_TOL: f64 = 1e-9;

/// Which test family measures the advantage on `X^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyRegime {
    /// Every Boolean function on `X^k`, whose best advantage is the product TV.
    AllBoolean,
    /// Generators of the product class built from the supplied family.
    Products(ProductMode),
    /// No family measurement.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<S> {
    pub epsilon: S,
    pub delta: S,
    /// Heavy-part threshold; `(ε/C)²` when unset.
    pub gamma: Option<S>,
    pub budget: u128,
    pub mc_trials: u64,
    pub seed: u64,
    pub regime: FamilyRegime,
    pub constants: BoundConstants,
}

impl<S: Scalar> PipelineConfig<S> {
    pub fn new(epsilon: S, delta: S) -> Self {
        Self {
            epsilon,
            delta,
            gamma: None,
            budget: DEFAULT_BUDGET,
            mc_trials: 10_000,
            seed: 0,
            regime: FamilyRegime::Products(ProductMode::AllProducts),
            constants: BoundConstants::default(),
        }
    }

    /// `ε / C`, the calibration accuracy that makes the tilde pair
    /// `ε`-indistinguishable from `(X0, X1)` given `adv ≤ C·ε_mc`.
    pub fn calibration_epsilon(&self) -> S {
        self.epsilon.clone() / S::from_f64_decimal(self.constants.indistinguishability)
    }
}

/// Partition, tilde pair and rounded table for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline<S> {
    pub epsilon: S,
    pub calibration_epsilon: S,
    pub partition: Partition<S>,
    pub rounds: usize,
    pub tilde: TildePair<S>,
    pub structural: StructuralReport,
    pub tilde_advantage: IndistinguishabilityCheck<S>,
    pub alphas: AlphaTable<S>,
    pub rounded: RoundedAlphaTable,
    /// `p(X_b) = p(X̃_b)`.
    pub pi0: ProbDist<S>,
    pub pi1: ProbDist<S>,
}

pub fn run_pipeline<S: Scalar>(
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
    family: &Family<S>,
    cfg: &PipelineConfig<S>,
) -> Result<Pipeline<S>> {
    x0.domain().same_size(x1.domain())?;
    let d = mixture(x0, x1)?;
    let g = target_g(x0, x1)?;
    let eps_mc = cfg.calibration_epsilon();
    let mut params = MCParams::new(eps_mc.clone())?.with_seed(cfg.seed);
    if let Some(gamma) = &cfg.gamma {
        params = params.with_gamma(gamma.clone())?;
    }
    let (partition, trace) = build_partition_traced(&d, &g, family, &params)?;
    let tilde = build_tilde(x0, x1, &partition, eps_mc.clone())?;
    let structural = verify_structural_tilde(&tilde, x0, x1)?;
    let tilde_advantage = verify_indistinguishability(&tilde, x0, x1, family, cfg.constants.indistinguishability)?;
    let table = alphas(x0, x1, &partition)?;
    let rounded = round_alphas(&table, cfg.delta.clone())?;
    let pi0 = pushforward(x0, partition.labeling(), partition.m())?;
    let pi1 = pushforward(x1, partition.labeling(), partition.m())?;
    Ok(Pipeline {
        epsilon: cfg.epsilon.clone(),
        calibration_epsilon: eps_mc,
        partition,
        rounds: trace.rounds,
        tilde,
        structural,
        tilde_advantage,
        alphas: table,
        rounded,
        pi0,
        pi1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRecord {
    pub k: usize,
    pub tv_tilde_k: f64,
    /// Exact value in canonical text form, when computed exactly.
    pub tv_tilde_k_exact: Option<String>,
    /// `tv_tilde_k + 2kε`.
    pub upper: f64,
    /// `tv_tilde_k - 4δk`, asserted against exact achieved advantages.
    pub floor: f64,
    /// `tv_tilde_k - c·kε`, reported and not asserted.
    pub floor_eps: f64,
    pub achieved: AdvantageEstimate,
    pub measured_family_adv: Option<f64>,
    pub family_method: Option<String>,
    pub flags: Vec<String>,
}

impl SandwichRecord {
    /// Both sides of the sandwich that are asserted for this record.
    pub fn check(&self) -> Result<()> {
        if let Some(m) = self.measured_family_adv {
            if m > self.upper + BOUND_TOL {
                return Err(Error::Invariant(format!(
                    "k = {}: family advantage {m} above upper bound {}",
                    self.k, self.upper
                )));
            }
        }
        if self.achieved.method != AdvantageMethod::MonteCarlo && self.achieved.value < self.floor - BOUND_TOL {
            return Err(Error::Invariant(format!(
                "k = {}: achieved advantage {} below floor {}",
                self.k, self.achieved.value, self.floor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub epsilon: f64,
    pub calibration_epsilon: f64,
    pub delta: f64,
    pub parts: usize,
    pub rounds: usize,
    /// `best_advantage(F, X_b, X̃_b)` for `b = 0, 1`.
    pub tilde_advantage: [f64; 2],
    pub hellinger_sq_tilde: f64,
    pub denominator: u64,
    pub rounding_shift: [f64; 2],
    pub records: Vec<SandwichRecord>,
}

/// Plug-in estimate of `d_TV(π0^⊗k, π1^⊗k)` from the exact likelihood-ratio
/// rule, used when the exact product exceeds the budget.
fn mc_product_tv<S: Scalar>(pi0: &ProbDist<S>, pi1: &ProbDist<S>, k: usize, trials: u64, seed: u64) -> Result<AdvantageEstimate> {
    let p0: Vec<f64> = pi0.mass().iter().map(S::as_f64).collect();
    let p1: Vec<f64> = pi1.mass().iter().map(S::as_f64).collect();
    let llr: Vec<f64> = p0.iter().zip(&p1).map(|(a, b)| b.ln() - a.ln()).collect();
    let w0 = WeightedIndex::new(&p0).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let w1 = WeightedIndex::new(&p1).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = [0u64; 2];
    for _ in 0..trials {
        for (side, w) in [&w0, &w1].into_iter().enumerate() {
            let s: f64 = (0..k).map(|_| llr[w.sample(&mut rng)]).sum();
            if s >= 0.0 || s.is_nan() {
                hits[side] += 1;
            }
        }
    }
    let n = trials as f64;
    let (a, b) = (hits[0] as f64 / n, hits[1] as f64 / n);
    Ok(AdvantageEstimate {
        value: (b - a).abs(),
        method: AdvantageMethod::MonteCarlo,
        ci_halfwidth: 1.96 * (a * (1.0 - a) / n + b * (1.0 - b) / n).sqrt(),
        exact: None,
        trials: Some(trials),
        seed: Some(seed),
    })
}

/// Best advantage over the chosen family on `X^k`, with the method used.
pub fn measured_family_advantage<S: Scalar>(
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
    family: &Family<S>,
    k: usize,
    regime: FamilyRegime,
    budget: u128,
) -> Result<Option<(S, String)>> {
    match regime {
        FamilyRegime::None => Ok(None),
        FamilyRegime::AllBoolean => {
            let xs0 = vec![x0.clone(); k];
            let xs1 = vec![x1.clone(); k];
            let size = crate::combinatorics::product_size(std::iter::repeat_n(x0.len(), k));
            if size <= 16 {
                let p0 = ProbDist::product(&xs0)?;
                let p1 = ProbDist::product(&xs1)?;
                let fam = all_boolean_family::<S>(p0.domain())?;
                Ok(Some((best_advantage(&fam, &p0, &p1)?.1, "all_boolean_enumeration".into())))
            } else {
                Ok(Some((product_tv_exact(&xs0, &xs1, budget)?, "all_boolean_tv_identity".into())))
            }
        }
        FamilyRegime::Products(mode) => {
            let fam = product_family(family, k, mode, budget)?;
            let p0 = x0.power(k)?;
            let p1 = x1.power(k)?;
            Ok(Some((best_advantage(&fam, &p0, &p1)?.1, "product_family".into())))
        }
    }
}

/// One record per `k`: the tilde pair's product TV, the upper bound
/// `tv + 2kε`, the achieved advantage of the rounded distinguisher and the
/// measured family advantage. Each record is checked before it is returned.
pub fn sandwich_report<S: Scalar>(
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
    family: &Family<S>,
    k_list: &[usize],
    cfg: &PipelineConfig<S>,
) -> Result<SandwichReport> {
    if k_list.contains(&0) {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let pipe = run_pipeline(x0, x1, family, cfg)?;
    let eps = cfg.epsilon.as_f64();
    let delta = cfg.delta.as_f64();
    let mut records = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let mut flags = Vec::new();
        let (tv, tv_exact) =
            match product_tv_exact(&vec![pipe.pi0.clone(); k], &vec![pipe.pi1.clone(); k], cfg.budget) {
                Ok(v) => (v.as_f64(), Some(v.to_repr())),
                Err(Error::BudgetExceeded { .. }) => {
                    flags.push("tv_tilde_k_monte_carlo".to_string());
                    (mc_product_tv(&pipe.pi0, &pipe.pi1, k, cfg.mc_trials, cfg.seed)?.value, None)
                }
                Err(e) => return Err(e),
            };
        let achieved = match exact_advantage(&pipe.rounded, &pipe.pi0, &pipe.pi1, k, cfg.budget) {
            Ok(a) => a.estimate(),
            Err(Error::BudgetExceeded { .. }) => {
                flags.push("achieved_monte_carlo".to_string());
                mc_advantage(&pipe.rounded, x0, x1, pipe.partition.labeling(), k, cfg.mc_trials, cfg.seed)?
            }
            Err(e) => return Err(e),
        };
        let (measured, method) = match measured_family_advantage(x0, x1, family, k, cfg.regime, cfg.budget) {
            Ok(Some((v, m))) => (Some(v.as_f64()), Some(m)),
            Ok(None) => (None, None),
            Err(Error::BudgetExceeded { .. }) => {
                flags.push("family_advantage_over_budget".to_string());
                (None, None)
            }
            Err(e) => return Err(e),
        };
        let kf = k as f64;
        let record = SandwichRecord {
            k,
            tv_tilde_k: tv,
            tv_tilde_k_exact: tv_exact,
            upper: tv + 2.0 * kf * eps,
            floor: guarantee_floor(tv, delta, k),
            floor_eps: (tv - cfg.constants.eps_floor * kf * eps).max(0.0),
            achieved,
            measured_family_adv: measured,
            family_method: method,
            flags,
        };
        record.check()?;
        records.push(record);
    }
    Ok(SandwichReport {
        epsilon: eps,
        calibration_epsilon: pipe.calibration_epsilon.as_f64(),
        delta,
        parts: pipe.partition.m(),
        rounds: pipe.rounds,
        tilde_advantage: [pipe.tilde_advantage.adv0.as_f64(), pipe.tilde_advantage.adv1.as_f64()],
        hellinger_sq_tilde: hellinger_sq(&pipe.tilde.tilde0, &pipe.tilde.tilde1)?.value,
        denominator: pipe.rounded.denominator,
        rounding_shift: pipe.rounded.shift,
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoDistanceResult {
    pub delta_star: f64,
    pub delta_star_sq: f64,
    pub tilde0: ProbDist<f64>,
    pub tilde1: ProbDist<f64>,
    /// `common_point`, `pinned` or `barrier`.
    pub method: String,
    pub diagnostics: SolverDiagnostics,
    /// `ε - max_f |E_{X_b} f - E_{witness} f|` for `b = 0, 1`.
    pub constraint_slack: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoEntropyResult {
    pub r_star: f64,
    /// `log₂N - r_star`.
    pub gap: f64,
    pub witness: ProbDist<f64>,
    pub method: String,
    pub diagnostics: SolverDiagnostics,
    pub constraint_slack: f64,
}

fn family_rows<S: Scalar>(family: &Family<S>, n: usize) -> Result<Vec<Vec<f64>>> {
    if let Some(fam_n) = family.domain_size() {
        Error::check_domain(fam_n, n)?;
    }
    Ok(family.functions().iter().map(|f| f.values().iter().map(S::as_f64).collect()).collect())
}

fn max_gap(rows: &[Vec<f64>], a: &[f64], b: &[f64]) -> f64 {
    rows.iter()
        .map(|f| f.iter().zip(a.iter().zip(b)).map(|(v, (x, y))| v * (x - y)).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("epsilon {eps} outside [0,1)")));
    }
    Ok(())
}

/// Adds the constraints tying block `offset..offset+n` to `target`: the
/// simplex, and `|Σ f (target - p)| ≤ ε` (equalities when `ε = 0`).
fn add_block(problem: &mut Problem, rows: &[Vec<f64>], target: &[f64], offset: usize, eps: f64) {
    let n = target.len();
    let dim = problem.dim;
    let embed = |coef: &[f64], sign: f64| {
        let mut a = vec![0.0; dim];
        for (i, c) in coef.iter().enumerate() {
            a[offset + i] = sign * c;
        }
        a
    };
    problem.equalities.push(LinearConstraint::new(embed(&vec![1.0; n], 1.0), 1.0));
    for i in 0..n {
        let mut a = vec![0.0; dim];
        a[offset + i] = -1.0;
        problem.inequalities.push(LinearConstraint::new(a, 0.0));
    }
    for f in rows {
        let e: f64 = f.iter().zip(target).map(|(v, t)| v * t).sum();
        if eps == 0.0 {
            problem.equalities.push(LinearConstraint::new(embed(f, 1.0), e));
        } else {
            problem.inequalities.push(LinearConstraint::new(embed(f, 1.0), e + eps));
            problem.inequalities.push(LinearConstraint::new(embed(f, -1.0), eps - e));
        }
    }
}

fn interior_start(target: &[f64], eps: f64) -> Vec<f64> {
    if eps == 0.0 {
        return target.to_vec();
    }
    let theta = eps / 2.0;
    let u = 1.0 / target.len() as f64;
    target.iter().map(|t| (1.0 - theta) * t + theta * u).collect()
}

fn witness(x: &[f64]) -> Result<ProbDist<f64>> {
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    ProbDist::new(clipped.iter().map(|v| v / total).collect())
}

/// Smallest Hellinger distance between `ε`-indistinguishable stand-ins for
/// `X0` and `X1`: minimizes `1 - Σ √(p q)` subject to
/// `|E_{X0} f - E_p f| ≤ ε` and `|E_{X1} f - E_q f| ≤ ε` for every `f ∈ F`.
pub fn pseudo_hellinger<S: Scalar>(
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
    family: &Family<S>,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<PseudoDistanceResult> {
    check_epsilon(eps)?;
    x0.domain().same_size(x1.domain())?;
    let n = x0.len();
    let rows = family_rows(family, n)?;
    let a0: Vec<f64> = x0.mass().iter().map(S::as_f64).collect();
    let a1: Vec<f64> = x1.mass().iter().map(S::as_f64).collect();
    let finish = |p: ProbDist<f64>, q: ProbDist<f64>, method: &str, diagnostics: SolverDiagnostics| {
        let slack = [eps - max_gap(&rows, &a0, p.mass()), eps - max_gap(&rows, &a1, q.mass())];
        if slack.iter().any(|s| *s < -BOUND_TOL) {
            return Err(Error::Invariant(format!("pseudo-Hellinger witnesses violate constraints by {slack:?}")));
        }
        let h = hellinger(&p, &q)?.value;
        Ok(PseudoDistanceResult {
            delta_star: h,
            delta_star_sq: h * h,
            tilde0: p,
            tilde1: q,
            method: method.into(),
            diagnostics,
            constraint_slack: slack,
        })
    };
    if eps > 0.0 {
        let d: Vec<f64> = a0.iter().zip(&a1).map(|(a, b)| 0.5 * (a + b)).collect();
        if max_gap(&rows, &a0, &d) <= eps + BOUND_TOL && max_gap(&rows, &a1, &d) <= eps + BOUND_TOL {
            let dd = witness(&d)?;
            return finish(dd.clone(), dd, "common_point", SolverDiagnostics::default());
        }
    }
    let mut problem = Problem { dim: 2 * n, ..Problem::default() };
    add_block(&mut problem, &rows, &a0, 0, eps);
    add_block(&mut problem, &rows, &a1, n, eps);
    let mut start = interior_start(&a0, eps);
    start.extend(interior_start(&a1, eps));
    let objective = HellingerObjective { n, tau: cfg.tau };
    let sol = minimize(&objective, &problem, DVector::from_vec(start), cfg)?;
    let method = if sol.diagnostics.pinned { "pinned" } else { "barrier" };
    let x = sol.x.as_slice();
    finish(witness(&x[..n])?, witness(&x[n..])?, method, sol.diagnostics)
}

/// Largest Rényi-½ entropy of an `ε`-indistinguishable stand-in for `X0`:
/// maximizes `Σ √p` subject to `|E_{X0} f - E_p f| ≤ ε` for every `f ∈ F`.
pub fn pseudo_renyi<S: Scalar>(
    x0: &ProbDist<S>,
    family: &Family<S>,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<PseudoEntropyResult> {
    check_epsilon(eps)?;
    let n = x0.len();
    let rows = family_rows(family, n)?;
    let a0: Vec<f64> = x0.mass().iter().map(S::as_f64).collect();
    let log_n = (n as f64).log2();
    let finish = |p: ProbDist<f64>, method: &str, diagnostics: SolverDiagnostics| {
        let slack = eps - max_gap(&rows, &a0, p.mass());
        if slack < -BOUND_TOL {
            return Err(Error::Invariant(format!("pseudo-Rényi witness violates constraints by {slack}")));
        }
        let r = crate::distributions::renyi_half_entropy(&p).value;
        Ok(PseudoEntropyResult { r_star: r, gap: (log_n - r).max(0.0), witness: p, method: method.into(), diagnostics, constraint_slack: slack })
    };
    let u = vec![1.0 / n as f64; n];
    if eps > 0.0 && max_gap(&rows, &a0, &u) <= eps + BOUND_TOL {
        return finish(ProbDist::uniform(n)?, "common_point", SolverDiagnostics::default());
    }
    let mut problem = Problem { dim: n, ..Problem::default() };
    add_block(&mut problem, &rows, &a0, 0, eps);
    let objective = RootSumObjective { n, tau: cfg.tau };
    let sol = minimize(&objective, &problem, DVector::from_vec(interior_start(&a0, eps)), cfg)?;
    let method = if sol.diagnostics.pinned { "pinned" } else { "barrier" };
    finish(witness(sol.x.as_slice())?, method, sol.diagnostics)
}

/// `(min(1, √(2k)·δ + 2kε), max(0, 1 - e^{-kδ²} - 2kε))`.
pub fn hellinger_sample_bounds(delta_star: f64, eps: f64, k: usize) -> (f64, f64) {
    let kf = k as f64;
    let upper = ((2.0 * kf).sqrt() * delta_star + 2.0 * kf * eps).min(1.0);
    let lower = (1.0 - (-kf * delta_star * delta_star).exp() - 2.0 * kf * eps).max(0.0);
    (upper, lower)
}

/// `(min(1, a·√(k·gap) + 2kε), max(0, 1 - e^{-c·k·min(gap, 1)} - 2kε))` with
/// `a` and `c` taken from `constants`.
pub fn renyi_sample_bounds(gap: f64, eps: f64, k: usize, constants: &BoundConstants) -> (f64, f64) {
    let kf = k as f64;
    let upper = (constants.renyi_prefactor * (kf * gap).sqrt() + 2.0 * kf * eps).min(1.0);
    let lower = (1.0 - (-constants.renyi_exponent * kf * gap.min(1.0)).exp() - 2.0 * kf * eps).max(0.0);
    (upper, lower)
}

/// `min(1, 1 - (1 - d)^k + slack)`.
pub fn geier_bound(d: f64, k: usize, slack: f64) -> f64 {
    (1.0 - (1.0 - d).powi(k as i32) + slack).min(1.0)
}

/// `F` together with the indicator of `{x : X1(P(x)) ≥ X0(P(x))}` and its
/// complement.
pub fn enlarged_geier_family<S: Scalar>(
    family: &Family<S>,
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
    partition: &Partition<S>,
) -> Result<Family<S>> {
    let pi0 = pushforward(x0, partition.labeling(), partition.m())?;
    let pi1 = pushforward(x1, partition.labeling(), partition.m())?;
    let values: Vec<S> = (0..x0.len())
        .map(|x| {
            let p = partition.label(x);
            if pi1.get(p) >= pi0.get(p) { S::one() } else { S::zero() }
        })
        .collect();
    let ml = TestFunction::new("ml_part", values)?;
    let neg = ml.negation().renamed("ml_part_neg");
    family.clone().extended(vec![ml, neg])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeierRecord {
    pub k: usize,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeierReport {
    /// `best_advantage` over the enlarged family on one sample.
    pub d: f64,
    pub enlarged_size: usize,
    pub records: Vec<GeierRecord>,
}

/// Checks `measured ≤ 1 - (1-d)^k + C·kε` for each `k`, with the measured
/// advantage taken over `cfg.regime` on `X^k`.
pub fn geier_report<S: Scalar>(
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
    family: &Family<S>,
    k_list: &[usize],
    cfg: &PipelineConfig<S>,
) -> Result<GeierReport> {
    let pipe = run_pipeline(x0, x1, family, cfg)?;
    let enlarged = enlarged_geier_family(family, x0, x1, &pipe.partition)?;
    let d = best_advantage(&enlarged, x0, x1)?.1.as_f64();
    let eps = cfg.epsilon.as_f64();
    let mut records = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let measured = measured_family_advantage(x0, x1, family, k, cfg.regime, cfg.budget)?
            .map(|(v, _)| v.as_f64())
            .ok_or_else(|| Error::InvalidParameter("the product bound needs a family regime".into()))?;
        let bound = geier_bound(d, k, cfg.constants.geier * k as f64 * eps);
        if measured > bound + BOUND_TOL {
            return Err(Error::Invariant(format!("k = {k}: measured {measured} above product bound {bound}")));
        }
        records.push(GeierRecord { k, measured, bound });
    }
    Ok(GeierReport { d, enlarged_size: enlarged.len(), records })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub achieved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStarResult {
    pub k_star: Option<usize>,
    pub target: f64,
    /// Achieved advantage for `k = 1, 2, ...` up to `k_star` (or `k_max`).
    pub curve: Vec<CurvePoint>,
    pub hellinger_sq_tilde: f64,
    /// `[c₁/d_H², c₂/d_H²]`.
    pub window: [f64; 2],
    pub within_window: Option<bool>,
}

/// Smallest `k ≤ k_max` at which the rounded distinguisher reaches `target`,
/// from exact advantages evaluated in `f64`.
pub fn k_star_sweep<S: Scalar>(
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
    family: &Family<S>,
    target: f64,
    k_max: usize,
    cfg: &PipelineConfig<S>,
) -> Result<KStarResult> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!("target {target} outside (0,1)")));
    }
    let pipe = run_pipeline(x0, x1, family, cfg)?;
    let pi0 = pipe.pi0.to_f64();
    let pi1 = pipe.pi1.to_f64();
    let h2 = hellinger_sq(&pipe.tilde.tilde0, &pipe.tilde.tilde1)?.value;
    let window = [cfg.constants.kstar_low / h2, cfg.constants.kstar_high / h2];
    let mut curve = Vec::new();
    let mut k_star = None;
    for k in 1..=k_max {
        let achieved = exact_advantage(&pipe.rounded, &pi0, &pi1, k, cfg.budget)?.value;
        curve.push(CurvePoint { k, achieved });
        if achieved >= target {
            k_star = Some(k);
            break;
        }
    }
    let within_window = k_star.map(|k| {
        let k = k as f64;
        k >= window[0].min(1.0) && k <= window[1]
    });
    Ok(KStarResult { k_star, target, curve, hellinger_sq_tilde: h2, window, within_window })
}
