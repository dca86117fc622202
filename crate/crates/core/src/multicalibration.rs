//! Approximately multicalibrated partitions for the posterior `ḡ` on the
//! mixture `D = ½X0 + ½X1`.
//!
//! The builder keeps a predictor `h` on the grid `{0, 1/L, …, 1}` and uses its
//! level sets as parts. Whenever a heavy part `P` (where `h ≡ c`) has some
//! `f` with `|E_{D|P}[f·(ḡ - v_P)]| > ε`, a threshold set `U = {f ≥ t}` or its
//! complement inside `P` satisfies `|E_{D|P}[1_U·(ḡ - c)]| > ε`; moving `h` by
//! one grid step on that set lowers `E_D[(h - ḡ)²]` by at least `λ·ε·γ`.

use num_traits::ToPrimitive;

use crate::distributions::ProbDist;
use crate::error::{Error, Result};
use crate::function_families::{Family, TestFunction};
use crate::scalar::Scalar;

/// `ḡ(x) = X1(x) / (X0(x) + X1(x))`, and `½` where both vanish.
pub fn target_g<S: Scalar>(x0: &ProbDist<S>, x1: &ProbDist<S>) -> Result<TestFunction<S>> {
    x0.domain().same_size(x1.domain())?;
    let values = x0
        .mass()
        .iter()
        .zip(x1.mass())
        .map(|(a, b)| {
            let total = a.clone() + b.clone();
            if total.is_zero() {
                S::half()
            } else {
                b.clone() / total
            }
        })
        .collect();
    TestFunction::new("g", values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition<S> {
    labeling: Vec<usize>,
    m: usize,
    part_weights: Vec<S>,
    v: Vec<S>,
}

impl<S: Scalar> Partition<S> {
    /// Computes per-part `D`-weights and `v_P = E_{D|P}[g]` (`½` on
    /// zero-weight parts).
    pub fn from_labeling(
        labeling: Vec<usize>,
        m: usize,
        d: &ProbDist<S>,
        g: &TestFunction<S>,
    ) -> Result<Self> {
        Error::check_domain(labeling.len(), d.len())?;
        Error::check_domain(g.len(), d.len())?;
        if let Some(&bad) = labeling.iter().find(|&&l| l >= m) {
            return Err(Error::InvalidParameter(format!("label {bad} not below part count {m}")));
        }
        let mut part_weights = vec![S::zero(); m];
        let mut weighted_g = vec![S::zero(); m];
        for (x, &l) in labeling.iter().enumerate() {
            part_weights[l] = part_weights[l].clone() + d.get(x).clone();
            weighted_g[l] = weighted_g[l].clone() + d.get(x).clone() * g.eval(x).clone();
        }
        let v = part_weights
            .iter()
            .zip(weighted_g)
            .map(|(w, s)| if w.is_zero() { S::half() } else { s / w.clone() })
            .collect();
        Ok(Self { labeling, m, part_weights, v })
    }

    /// Reassembles a stored partition, checking only its internal invariants.
    pub fn from_parts(labeling: Vec<usize>, m: usize, part_weights: Vec<S>, v: Vec<S>) -> Result<Self> {
        if part_weights.len() != m || v.len() != m {
            return Err(Error::InvalidParameter("per-part tables must have m entries".into()));
        }
        if let Some(&bad) = labeling.iter().find(|&&l| l >= m) {
            return Err(Error::InvalidParameter(format!("label {bad} not below part count {m}")));
        }
        let total = crate::scalar::sum(&part_weights);
        if !total.approx_eq(&S::one()) || part_weights.iter().any(|w| *w < S::zero()) {
            return Err(Error::InvalidParameter(format!("part weights sum to {total}")));
        }
        if v.iter().any(|x| *x < S::zero() || *x > S::one()) {
            return Err(Error::InvalidParameter("v_P outside [0,1]".into()));
        }
        Ok(Self { labeling, m, part_weights, v })
    }

    pub fn singletons(d: &ProbDist<S>, g: &TestFunction<S>) -> Result<Self> {
        Self::from_labeling((0..d.len()).collect(), d.len(), d, g)
    }

    pub fn trivial(d: &ProbDist<S>, g: &TestFunction<S>) -> Result<Self> {
        Self::from_labeling(vec![0; d.len()], 1, d, g)
    }

    /// Recomputes weights and `v_P` from `d` and `g` and compares.
    pub fn validate_against(&self, d: &ProbDist<S>, g: &TestFunction<S>) -> Result<()> {
        let fresh = Self::from_labeling(self.labeling.clone(), self.m, d, g)?;
        for i in 0..self.m {
            if !fresh.part_weights[i].approx_eq(&self.part_weights[i]) || !fresh.v[i].approx_eq(&self.v[i]) {
                return Err(Error::Invariant(format!(
                    "part {i}: stored (w={}, v={}) but recomputed (w={}, v={})",
                    self.part_weights[i], self.v[i], fresh.part_weights[i], fresh.v[i]
                )));
            }
        }
        Ok(())
    }

    pub fn labeling(&self) -> &[usize] {
        &self.labeling
    }

    pub fn label(&self, x: usize) -> usize {
        self.labeling[x]
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn domain_size(&self) -> usize {
        self.labeling.len()
    }

    pub fn part_weights(&self) -> &[S] {
        &self.part_weights
    }

    pub fn v(&self) -> &[S] {
        &self.v
    }

    /// Members of each part, in increasing element order.
    pub fn parts(&self) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); self.m];
        for (x, &l) in self.labeling.iter().enumerate() {
            parts[l].push(x);
        }
        parts
    }

    /// The partition with parts `a` and `b` merged (labels renumbered densely).
    pub fn merge(&self, a: usize, b: usize, d: &ProbDist<S>, g: &TestFunction<S>) -> Result<Self> {
        if a >= self.m || b >= self.m || a == b {
            return Err(Error::InvalidParameter(format!("cannot merge parts {a} and {b}")));
        }
        let (keep, drop) = (a.min(b), a.max(b));
        let labeling = self
            .labeling
            .iter()
            .map(|&l| match l {
                l if l == drop => keep,
                l if l > drop => l - 1,
                l => l,
            })
            .collect();
        Self::from_labeling(labeling, self.m - 1, d, g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCParams<S> {
    pub epsilon: S,
    pub gamma: S,
    /// Grid resolution `L`; the step is `λ = 1/L`.
    pub grid: u64,
    pub max_rounds: usize,
    /// Recorded for reproducibility; the scan order is deterministic.
    pub seed: u64,
}

impl<S: Scalar> MCParams<S> {
    /// `γ = ε²` and `L = ⌈2/ε⌉`, so `λ ≤ ε/2` with equality when `2/ε` is an
    /// integer.
    pub fn new(epsilon: S) -> Result<Self> {
        if epsilon <= S::zero() || epsilon >= S::one() {
            return Err(Error::InvalidParameter(format!("epsilon {epsilon} outside (0,1)")));
        }
        let two = S::one() + S::one();
        let ratio = two.clone() / epsilon.clone();
        let mut grid = ratio.floor_int().to_u64().ok_or_else(|| {
            Error::InvalidParameter(format!("epsilon {epsilon} too small for the grid"))
        })?;
        if S::from_u64(grid).expect("grid fits") < ratio {
            grid += 1;
        }
        let gamma = epsilon.clone() * epsilon.clone();
        let mut params = Self { epsilon, gamma, grid, max_rounds: 0, seed: 0 };
        params.max_rounds = (params.round_bound().ceil().min(usize::MAX as f64) as usize).saturating_add(1);
        Ok(params)
    }

    pub fn with_gamma(mut self, gamma: S) -> Result<Self> {
        if gamma <= S::zero() || gamma >= S::one() {
            return Err(Error::InvalidParameter(format!("gamma {gamma} outside (0,1)")));
        }
        self.gamma = gamma;
        self.max_rounds = (self.round_bound().ceil().min(usize::MAX as f64) as usize).saturating_add(1);
        Ok(self)
    }

    pub fn with_grid(mut self, grid: u64) -> Result<Self> {
        if grid == 0 || S::from_u64(grid).expect("grid fits") * self.epsilon.clone() < S::one() {
            return Err(Error::InvalidParameter(format!("grid {grid} gives a step above epsilon")));
        }
        self.grid = grid;
        self.max_rounds = (self.round_bound().ceil().min(usize::MAX as f64) as usize).saturating_add(1);
        Ok(self)
    }

    pub fn with_max_rounds(mut self, max_rounds: usize) -> Self {
        self.max_rounds = max_rounds;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn lambda(&self) -> S {
        S::one() / S::from_u64(self.grid).expect("grid fits")
    }

    /// `1 / (λ·ε·γ)`, the potential-argument bound on update rounds.
    pub fn round_bound(&self) -> f64 {
        1.0 / (self.lambda().as_f64() * self.epsilon.as_f64() * self.gamma.as_f64())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation<S> {
    pub part: usize,
    pub function: usize,
    pub correlation: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport<S> {
    pub pass: bool,
    pub violations: Vec<Violation<S>>,
    pub skipped_light_parts: Vec<usize>,
}

/// `E_{D|P}[f·(g - v_P)]` for part `part` (zero on zero-weight parts).
pub fn correlation<S: Scalar>(
    partition: &Partition<S>,
    part: usize,
    f: &TestFunction<S>,
    d: &ProbDist<S>,
    g: &TestFunction<S>,
) -> S {
    let w = &partition.part_weights[part];
    if w.is_zero() {
        return S::zero();
    }
    let v = &partition.v[part];
    let total = partition
        .labeling
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == part)
        .fold(S::zero(), |acc, (x, _)| {
            acc + d.get(x).clone() * f.eval(x).clone() * (g.eval(x).clone() - v.clone())
        });
    total / w.clone()
}

/// Checks the calibration condition on every part of `D`-weight at least `γ`
/// against every function in `family`.
pub fn audit<S: Scalar>(
    partition: &Partition<S>,
    d: &ProbDist<S>,
    g: &TestFunction<S>,
    family: &Family<S>,
    params: &MCParams<S>,
) -> Result<AuditReport<S>> {
    Error::check_domain(partition.domain_size(), d.len())?;
    Error::check_domain(g.len(), d.len())?;
    if let Some(n) = family.domain_size() {
        Error::check_domain(n, d.len())?;
    }
    let mut violations = Vec::new();
    let mut skipped = Vec::new();
    for part in 0..partition.m {
        if partition.part_weights[part] < params.gamma {
            skipped.push(part);
            continue;
        }
        for (i, f) in family.functions().iter().enumerate() {
            let c = correlation(partition, part, f, d, g);
            if c.abs() > params.epsilon {
                violations.push(Violation { part, function: i, correlation: c });
            }
        }
    }
    Ok(AuditReport { pass: violations.is_empty(), violations, skipped_light_parts: skipped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildTrace<S> {
    pub rounds: usize,
    /// `E_D[(h - ḡ)²]` before the first round and after each round.
    pub potentials: Vec<S>,
    pub round_bound: f64,
}

pub fn build_partition<S: Scalar>(
    d: &ProbDist<S>,
    g: &TestFunction<S>,
    family: &Family<S>,
    params: &MCParams<S>,
) -> Result<Partition<S>> {
    build_partition_traced(d, g, family, params).map(|(p, _)| p)
}

pub fn build_partition_traced<S: Scalar>(
    d: &ProbDist<S>,
    g: &TestFunction<S>,
    family: &Family<S>,
    params: &MCParams<S>,
) -> Result<(Partition<S>, BuildTrace<S>)> {
    let n = d.len();
    Error::check_domain(g.len(), n)?;
    if let Some(fam_n) = family.domain_size() {
        Error::check_domain(fam_n, n)?;
    }
    let grid = params.grid;
    let grid_s = S::from_u64(grid).expect("grid fits");
    let lambda = params.lambda();
    let dm: Vec<S> = d.mass().to_vec();
    let dg: Vec<S> = (0..n).map(|x| dm[x].clone() * g.eval(x).clone()).collect();

    let mean = crate::scalar::sum(&dg);
    let start = nearest_level(&mean, &grid_s, grid);
    let mut level = vec![start; n];

    let potential = |level: &[u64]| {
        (0..n).fold(S::zero(), |acc, x| {
            let h = S::from_u64(level[x]).unwrap() / grid_s.clone();
            let diff = h - g.eval(x).clone();
            acc + dm[x].clone() * diff.clone() * diff
        })
    };
    let min_drop = lambda.clone() * params.epsilon.clone() * params.gamma.clone();
    let round_bound = params.round_bound();
    let mut potentials = vec![potential(&level)];
    let mut rounds = 0usize;

    loop {
        let (labeling, m, levels) = level_sets(&level);
        let mut weight = vec![S::zero(); m];
        let mut mass_g = vec![S::zero(); m];
        for x in 0..n {
            weight[labeling[x]] = weight[labeling[x]].clone() + dm[x].clone();
            mass_g[labeling[x]] = mass_g[labeling[x]].clone() + dg[x].clone();
        }

        let found = (0..m).filter(|&p| weight[p] >= params.gamma).find_map(|p| {
            let members: Vec<usize> = (0..n).filter(|&x| labeling[x] == p).collect();
            let v = mass_g[p].clone() / weight[p].clone();
            family.functions().iter().enumerate().find_map(|(i, f)| {
                let c = members.iter().fold(S::zero(), |acc, &x| {
                    acc + f.eval(x).clone() * (dg[x].clone() - v.clone() * dm[x].clone())
                }) / weight[p].clone();
                (c.abs() > params.epsilon).then(|| (p, i, c, members.clone()))
            })
        });

        let Some((part, fi, corr, members)) = found else {
            let partition = Partition::from_labeling(labeling, m, d, g)?;
            return Ok((partition, BuildTrace { rounds, potentials, round_bound }));
        };

        if rounds >= params.max_rounds {
            return Err(Error::MaxRoundsExceeded {
                rounds,
                detail: format!("part {part}, function {fi}, correlation {corr}"),
            });
        }

        // Threshold sets of f inside the part, their complements, scored by
        // a = E_{D|P}[1_U·(ḡ - c)].
        let c = S::from_u64(levels[part]).unwrap() / grid_s.clone();
        let f = &family.functions()[fi];
        let mut thresholds: Vec<&S> = members.iter().map(|&x| f.eval(x)).filter(|v| !v.is_zero()).collect();
        thresholds.sort_by(|a, b| a.partial_cmp(b).expect("comparable"));
        thresholds.dedup_by(|a, b| a == b);
        let score = |inside: &dyn Fn(usize) -> bool| {
            members.iter().filter(|&&x| inside(x)).fold(S::zero(), |acc, &x| {
                acc + dg[x].clone() - c.clone() * dm[x].clone()
            }) / weight[part].clone()
        };
        let mut best: Option<(S, Vec<usize>)> = None;
        for t in thresholds {
            for complement in [false, true] {
                let inside = |x: usize| (f.eval(x) >= t) != complement;
                let a = score(&inside);
                if best.as_ref().is_none_or(|(b, _)| a.abs() > b.abs()) {
                    let set = members.iter().copied().filter(|&x| inside(x)).collect();
                    best = Some((a, set));
                }
            }
        }
        let (a, set) = best.ok_or_else(|| Error::Invariant("violation with an all-zero function".into()))?;
        if a.abs() <= params.epsilon {
            return Err(Error::Invariant(format!(
                "no threshold set of function {fi} on part {part} exceeds epsilon (best {a})"
            )));
        }
        for x in set {
            level[x] = if a > S::zero() { (level[x] + 1).min(grid) } else { level[x].saturating_sub(1) };
        }
        rounds += 1;

        let before = potentials.last().expect("nonempty").clone();
        let after = potential(&level);
        let drop = before - after.clone();
        let slack = S::from_f64_decimal(S::tolerance());
        if drop.clone() + slack < min_drop {
            return Err(Error::Invariant(format!(
                "round {rounds}: potential dropped by {drop}, below lambda*eps*gamma = {min_drop}"
            )));
        }
        if rounds as f64 > round_bound {
            return Err(Error::Invariant(format!("round {rounds} exceeds the potential bound {round_bound}")));
        }
        potentials.push(after);
    }
}

fn nearest_level<S: Scalar>(value: &S, grid_s: &S, grid: u64) -> u64 {
    let scaled = value.clone() * grid_s.clone();
    let floor = scaled.floor_int();
    let frac = scaled - S::from_bigint(&floor);
    let base = floor.to_u64().unwrap_or(0);
    let level = if frac > S::half() { base + 1 } else { base };
    level.min(grid)
}

/// Labels by increasing level value.
fn level_sets(level: &[u64]) -> (Vec<usize>, usize, Vec<u64>) {
    let mut levels: Vec<u64> = level.to_vec();
    levels.sort_unstable();
    levels.dedup();
    let labeling = level.iter().map(|l| levels.binary_search(l).expect("present")).collect();
    (labeling, levels.len(), levels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartStats<S> {
    pub mass0: S,
    pub mass1: S,
    pub mass_d: S,
    pub v: S,
}

/// Per-part masses under `X0`, `X1` and `D` together with `v_P`; checks
/// `v_P = α1(P)` on every positive-mass part.
pub fn part_statistics<S: Scalar>(
    partition: &Partition<S>,
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
    d: &ProbDist<S>,
) -> Result<Vec<PartStats<S>>> {
    Error::check_domain(partition.domain_size(), x0.len())?;
    x0.domain().same_size(x1.domain())?;
    x0.domain().same_size(d.domain())?;
    let mut stats: Vec<PartStats<S>> = (0..partition.m)
        .map(|p| PartStats {
            mass0: S::zero(),
            mass1: S::zero(),
            mass_d: S::zero(),
            v: partition.v[p].clone(),
        })
        .collect();
    for (x, &l) in partition.labeling.iter().enumerate() {
        let s = &mut stats[l];
        s.mass0 = s.mass0.clone() + x0.get(x).clone();
        s.mass1 = s.mass1.clone() + x1.get(x).clone();
        s.mass_d = s.mass_d.clone() + d.get(x).clone();
    }
    for (p, s) in stats.iter().enumerate() {
        let total = s.mass0.clone() + s.mass1.clone();
        if total.is_zero() {
            continue;
        }
        let alpha1 = s.mass1.clone() / total;
        if !alpha1.approx_eq(&s.v) {
            return Err(Error::Invariant(format!("part {p}: v_P = {} but alpha1 = {alpha1}", s.v)));
        }
    }
    Ok(stats)
}
