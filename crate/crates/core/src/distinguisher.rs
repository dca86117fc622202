//! The rounded likelihood-ratio distinguisher and exact or Monte Carlo
//! evaluation of its advantage.
//!
//! Posterior weights are rounded to a shared denominator `⌈r/δ⌉`, so the
//! likelihood ratio of `k` samples is a ratio of two integer products and the
//! decision `κ ≥ 1` is made without floating point.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, count_vector_total, for_each_count_vector, for_each_tuple, product_size};
use crate::constructions::AlphaTable;
use crate::distributions::ProbDist;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundedAlphaTable {
    pub denominator: u64,
    pub n0: Vec<u64>,
    pub n1: Vec<u64>,
    pub r: usize,
    pub delta: f64,
    /// Mass moved by rounding: `Σ_P D(P)·|n_b/den - α_b(P)|` for `b = 0, 1`.
    pub shift: [f64; 2],
}

impl RoundedAlphaTable {
    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.r {
            return Err(Error::InvalidParameter(format!("part label {label} not below {}", self.r)));
        }
        if self.n0[label] == 0 && self.n1[label] == 0 {
            return Err(Error::InvalidParameter(format!("part {label} has no mass under either side")));
        }
        Ok(())
    }
}

/// Nearest multiple of `1/den`, ties toward zero.
fn nearest_numerator<S: Scalar>(alpha: &S, den: u64) -> Result<u64> {
    let scaled = alpha.clone() * S::from_u64(den).expect("denominator fits");
    let floor = scaled.floor_int();
    let frac = scaled - S::from_bigint(&floor);
    let base = floor
        .to_u64()
        .ok_or_else(|| Error::InvalidParameter(format!("alpha {alpha} not in [0,1]")))?;
    Ok(if frac > S::half() { base + 1 } else { base })
}

/// Rounds both posterior columns onto the grid `{j / ⌈r/δ⌉}`.
pub fn round_alphas<S: Scalar>(table: &AlphaTable<S>, delta: S) -> Result<RoundedAlphaTable> {
    if delta <= S::zero() || delta >= S::one() {
        return Err(Error::InvalidParameter(format!("delta {delta} outside (0,1)")));
    }
    let r = table.r();
    let ratio = S::from_count(r) / delta.clone();
    let mut den = ratio
        .floor_int()
        .to_u64()
        .ok_or_else(|| Error::InvalidParameter(format!("delta {delta} too small")))?;
    if S::from_u64(den).expect("fits") < ratio {
        den += 1;
    }
    let den_s = S::from_u64(den).expect("fits");
    let mut n0 = Vec::with_capacity(r);
    let mut n1 = Vec::with_capacity(r);
    let mut shift = [S::zero(), S::zero()];
    for p in 0..r {
        if table.zero_mass[p] {
            n0.push(0);
            n1.push(0);
            continue;
        }
        let a = nearest_numerator(&table.alpha0[p], den)?;
        let b = nearest_numerator(&table.alpha1[p], den)?;
        if a == 0 && b == 0 {
            return Err(Error::InvalidParameter(format!(
                "delta {delta} rounds both numerators of part {p} to zero"
            )));
        }
        let weight = (table.mass0[p].clone() + table.mass1[p].clone()) * S::half();
        for (slot, (num, alpha)) in [(a, &table.alpha0[p]), (b, &table.alpha1[p])].into_iter().enumerate() {
            let err = (S::from_u64(num).expect("fits") / den_s.clone() - alpha.clone()).abs();
            shift[slot] = shift[slot].clone() + weight.clone() * err;
        }
        n0.push(a);
        n1.push(b);
    }
    let delta_f = delta.as_f64();
    let shift = [shift[0].as_f64(), shift[1].as_f64()];
    if shift.iter().any(|s| *s > delta_f + S::tolerance()) {
        return Err(Error::Invariant(format!("rounding moved {shift:?}, more than delta {delta_f}")));
    }
    Ok(RoundedAlphaTable { denominator: den, n0, n1, r, delta: delta_f, shift })
}

/// `κ = Π n1 / Π n0` over the visited parts, kept as two exact integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kappa {
    pub numerator: BigUint,
    pub denominator: BigUint,
}

impl Kappa {
    /// `κ ≥ 1`, i.e. `Π n1 ≥ Π n0`. A zero denominator with a positive
    /// numerator is `κ = ∞` and decides 1.
    pub fn decide(&self) -> bool {
        self.numerator >= self.denominator
    }

    /// `log2 κ` for reporting (infinite when a product vanishes).
    pub fn log2(&self) -> f64 {
        big_log2(&self.numerator) - big_log2(&self.denominator)
    }
}

fn big_log2(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    let shift = bits.saturating_sub(60);
    let top = (n >> shift).to_f64().expect("fits in f64");
    top.log2() + shift as f64
}

pub fn kappa(table: &RoundedAlphaTable, labels: &[usize]) -> Result<Kappa> {
    let mut counts = vec![0u32; table.r];
    for &l in labels {
        table.check_label(l)?;
        counts[l] += 1;
    }
    Ok(kappa_from_counts(table, &counts))
}

fn kappa_from_counts(table: &RoundedAlphaTable, counts: &[u32]) -> Kappa {
    let mut numerator = BigUint::one();
    let mut denominator = BigUint::one();
    for (p, &c) in counts.iter().enumerate() {
        if c > 0 {
            numerator *= num_traits::pow(BigUint::from(table.n1[p]), c as usize);
            denominator *= num_traits::pow(BigUint::from(table.n0[p]), c as usize);
        }
    }
    Kappa { numerator, denominator }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LRDistinguisher {
    pub labeling: Vec<usize>,
    pub table: RoundedAlphaTable,
    pub k: usize,
    pub tie_rule: String,
}

impl LRDistinguisher {
    pub fn new(labeling: Vec<usize>, table: RoundedAlphaTable, k: usize) -> Result<Self> {
        if let Some(&bad) = labeling.iter().find(|&&l| l >= table.r) {
            return Err(Error::InvalidParameter(format!("label {bad} outside the table")));
        }
        Ok(Self { labeling, table, k, tie_rule: "output 1 iff prod(n1) >= prod(n0)".into() })
    }

    pub fn decide_labels(&self, labels: &[usize]) -> Result<bool> {
        if labels.len() != self.k {
            return Err(Error::InvalidParameter(format!("expected {} samples, got {}", self.k, labels.len())));
        }
        Ok(kappa(&self.table, labels)?.decide())
    }

    pub fn decide_elements(&self, samples: &[usize]) -> Result<bool> {
        let labels = samples
            .iter()
            .map(|&x| {
                self.labeling
                    .get(x)
                    .copied()
                    .ok_or_else(|| Error::InvalidParameter(format!("element {x} outside domain")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.decide_labels(&labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageMethod {
    ExactEnumeration,
    ExactCountDp,
    MonteCarlo,
}

impl AdvantageMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExactEnumeration => "exact_enumeration",
            Self::ExactCountDp => "exact_count_dp",
            Self::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEstimate {
    pub value: f64,
    pub method: AdvantageMethod,
    pub ci_halfwidth: f64,
    /// Exact value in canonical text form when the method is exact.
    pub exact: Option<String>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactAdvantage<S> {
    pub value: S,
    pub method: AdvantageMethod,
}

impl<S: Scalar> ExactAdvantage<S> {
    pub fn estimate(&self) -> AdvantageEstimate {
        AdvantageEstimate {
            value: self.value.as_f64(),
            method: self.method,
            ci_halfwidth: 0.0,
            exact: Some(self.value.to_repr()),
            trials: None,
            seed: None,
        }
    }
}

fn active_parts<S: Scalar>(pi0: &ProbDist<S>, pi1: &ProbDist<S>) -> Vec<usize> {
    (0..pi0.len()).filter(|&p| !pi0.get(p).is_zero() || !pi1.get(p).is_zero()).collect()
}

fn check_tables<S: Scalar>(table: &RoundedAlphaTable, pi0: &ProbDist<S>, pi1: &ProbDist<S>) -> Result<Vec<usize>> {
    Error::check_domain(table.r, pi0.len())?;
    Error::check_domain(table.r, pi1.len())?;
    let active = active_parts(pi0, pi1);
    for &p in &active {
        table.check_label(p)?;
    }
    Ok(active)
}

/// Exact advantage of the `κ ≥ 1` rule between `π0^⊗k` and `π1^⊗k`: count
/// vectors when `C(k+m-1, m-1)` fits the budget, else `m^k` tuples.
pub fn exact_advantage<S: Scalar>(
    table: &RoundedAlphaTable,
    pi0: &ProbDist<S>,
    pi1: &ProbDist<S>,
    k: usize,
    budget: u128,
) -> Result<ExactAdvantage<S>> {
    let active = check_tables(table, pi0, pi1)?;
    let m = active.len();
    if count_vector_total(k, m) <= budget {
        exact_advantage_with(table, pi0, pi1, k, budget, AdvantageMethod::ExactCountDp)
    } else if product_size(std::iter::repeat_n(m, k)) <= budget {
        exact_advantage_with(table, pi0, pi1, k, budget, AdvantageMethod::ExactEnumeration)
    } else {
        Err(Error::BudgetExceeded {
            needed: count_vector_total(k, m).min(product_size(std::iter::repeat_n(m, k))),
            budget,
            what: "exact distinguisher advantage",
        })
    }
}

/// As [`exact_advantage`] with the evaluation method forced.
pub fn exact_advantage_with<S: Scalar>(
    table: &RoundedAlphaTable,
    pi0: &ProbDist<S>,
    pi1: &ProbDist<S>,
    k: usize,
    budget: u128,
    method: AdvantageMethod,
) -> Result<ExactAdvantage<S>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let active = check_tables(table, pi0, pi1)?;
    let m = active.len();
    let signed = match method {
        AdvantageMethod::ExactCountDp => {
            let needed = count_vector_total(k, m);
            if needed > budget {
                return Err(Error::BudgetExceeded { needed, budget, what: "count-vector enumeration" });
            }
            count_vector_signed(table, pi0, pi1, &active, k)
        }
        AdvantageMethod::ExactEnumeration => {
            let needed = product_size(std::iter::repeat_n(m, k));
            if needed > budget {
                return Err(Error::BudgetExceeded { needed, budget, what: "tuple enumeration" });
            }
            let mut acc = S::zero();
            for_each_tuple(&vec![m; k], |t| {
                let mut counts = vec![0u32; table.r];
                let (mut a, mut b) = (S::one(), S::one());
                for &i in t {
                    let p = active[i];
                    counts[p] += 1;
                    a = a * pi1.get(p).clone();
                    b = b * pi0.get(p).clone();
                }
                if kappa_from_counts(table, &counts).decide() {
                    acc = acc.clone() + a - b;
                }
            });
            acc
        }
        AdvantageMethod::MonteCarlo => {
            return Err(Error::InvalidParameter("Monte Carlo is not an exact method".into()));
        }
    };
    Ok(ExactAdvantage { value: signed.abs(), method })
}

/// `Σ_{κ(c) ≥ 1} (P_{π1}(c) - P_{π0}(c))`, split over the count of the
/// first active part and summed in index order.
fn count_vector_signed<S: Scalar>(
    table: &RoundedAlphaTable,
    pi0: &ProbDist<S>,
    pi1: &ProbDist<S>,
    active: &[usize],
    k: usize,
) -> S {
    let m = active.len();
    if m == 0 {
        return S::zero();
    }
    let partials: Vec<S> = (0..=k)
        .into_par_iter()
        .map(|c0| {
            let lead = binomial(k as u64, c0 as u64);
            let mut acc = S::zero();
            let mut counts = vec![0u32; table.r];
            let mut f1: Vec<(S, u32)> = active.iter().map(|&p| (pi1.get(p).clone(), 0)).collect();
            let mut f0: Vec<(S, u32)> = active.iter().map(|&p| (pi0.get(p).clone(), 0)).collect();
            let mut visit = |rest: &[u32], coef: &BigUint| {
                counts[active[0]] = c0 as u32;
                f1[0].1 = c0 as u32;
                f0[0].1 = c0 as u32;
                for (i, &c) in rest.iter().enumerate() {
                    counts[active[i + 1]] = c;
                    f1[i + 1].1 = c;
                    f0[i + 1].1 = c;
                }
                if kappa_from_counts(table, &counts).decide() {
                    let coef = coef * &lead;
                    acc = acc.clone() + S::weighted_power_product(&coef, &f1)
                        - S::weighted_power_product(&coef, &f0);
                }
            };
            if m == 1 {
                if c0 == k {
                    visit(&[], &BigUint::one());
                }
            } else {
                for_each_count_vector(m - 1, k - c0, &mut visit);
            }
            acc
        })
        .collect();
    partials.into_iter().fold(S::zero(), |a, b| a + b)
}

const MC_BLOCK: u64 = 1000;

/// Plug-in estimate of the same advantage from samples of `X0` and `X1`, with
/// a 95% normal-approximation half-width. Blocks of trials use independent
/// ChaCha streams derived from `seed`, so results do not depend on threads.
pub fn mc_advantage<S: Scalar>(
    table: &RoundedAlphaTable,
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
    labeling: &[usize],
    k: usize,
    trials: u64,
    seed: u64,
) -> Result<AdvantageEstimate> {
    if trials < 1000 {
        return Err(Error::InvalidParameter(format!("need at least 1000 trials, got {trials}")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    x0.domain().same_size(x1.domain())?;
    Error::check_domain(labeling.len(), x0.len())?;
    let w0 = WeightedIndex::new(x0.mass().iter().map(S::as_f64))
        .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let w1 = WeightedIndex::new(x1.mass().iter().map(S::as_f64))
        .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let blocks = trials.div_ceil(MC_BLOCK);
    let hits = (0..blocks)
        .into_par_iter()
        .map(|block| -> Result<[u64; 2]> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block);
            let n = MC_BLOCK.min(trials - block * MC_BLOCK);
            let mut hits = [0u64; 2];
            let mut counts = vec![0u32; table.r];
            for _ in 0..n {
                for (side, w) in [&w0, &w1].into_iter().enumerate() {
                    counts.iter_mut().for_each(|c| *c = 0);
                    for _ in 0..k {
                        let l = labeling[w.sample(&mut rng)];
                        table.check_label(l)?;
                        counts[l] += 1;
                    }
                    if kappa_from_counts(table, &counts).decide() {
                        hits[side] += 1;
                    }
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?;
    let (h0, h1) = hits.iter().fold((0, 0), |(a, b), h| (a + h[0], b + h[1]));
    let n = trials as f64;
    let (p0, p1) = (h0 as f64 / n, h1 as f64 / n);
    let ci = 1.96 * (p1 * (1.0 - p1) / n + p0 * (1.0 - p0) / n).sqrt();
    Ok(AdvantageEstimate {
        value: (p1 - p0).abs(),
        method: AdvantageMethod::MonteCarlo,
        ci_halfwidth: ci,
        exact: None,
        trials: Some(trials),
        seed: Some(seed),
    })
}

/// `max(0, tv - 4δk)`.
pub fn guarantee_floor(tv_tilde_k: f64, delta: f64, k: usize) -> f64 {
    (tv_tilde_k - 4.0 * delta * k as f64).max(0.0)
}

/// Advantage of the per-index rule `Π_a n1^(a) ≥ Π_a n0^(a)` between
/// `⊗ pis0` and `⊗ pis1`, by enumerating label tuples.
pub fn heterogeneous_advantage<S: Scalar>(
    tables: &[RoundedAlphaTable],
    pis0: &[ProbDist<S>],
    pis1: &[ProbDist<S>],
    budget: u128,
) -> Result<ExactAdvantage<S>> {
    let k = tables.len();
    if k == 0 || pis0.len() != k || pis1.len() != k {
        return Err(Error::InvalidParameter("need one table and one pushforward pair per index".into()));
    }
    let actives = (0..k)
        .map(|a| check_tables(&tables[a], &pis0[a], &pis1[a]))
        .collect::<Result<Vec<_>>>()?;
    let needed = product_size(actives.iter().map(Vec::len));
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget, what: "heterogeneous enumeration" });
    }
    let radices: Vec<usize> = actives.iter().map(Vec::len).collect();
    let mut acc = S::zero();
    for_each_tuple(&radices, |t| {
        let mut numerator = BigUint::one();
        let mut denominator = BigUint::one();
        let (mut a1, mut a0) = (S::one(), S::one());
        for (a, &i) in t.iter().enumerate() {
            let p = actives[a][i];
            numerator *= tables[a].n1[p];
            denominator *= tables[a].n0[p];
            a1 = a1 * pis1[a].get(p).clone();
            a0 = a0 * pis0[a].get(p).clone();
        }
        if numerator >= denominator {
            acc = acc.clone() + a1 - a0;
        }
    });
    Ok(ExactAdvantage { value: acc.abs(), method: AdvantageMethod::ExactEnumeration })
}
