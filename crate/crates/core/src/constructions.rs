//! Intermediate distributions built from a partition: the tilde pair, whose
//! members share the conditional `D|P` on every part while keeping each
//! `X_b`'s part masses, and the single hat variable that swaps in `X1`'s
//! conditional only on parts where `α1` clears `√ε′`.

use crate::distributions::{mixture, pushforward, tv_distance, ProbDist};
use crate::error::{Error, Result};
use crate::function_families::{best_advantage, Family};
use crate::multicalibration::Partition;
use crate::scalar::Scalar;

/// Per-part posterior weights `α_b(P) = X_b(P) / (X0(P) + X1(P))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTable<S> {
    pub mass0: Vec<S>,
    pub mass1: Vec<S>,
    /// Zero on parts flagged in `zero_mass`.
    pub alpha0: Vec<S>,
    pub alpha1: Vec<S>,
    pub zero_mass: Vec<bool>,
}

impl<S: Scalar> AlphaTable<S> {
    pub fn r(&self) -> usize {
        self.alpha0.len()
    }

    /// `v(1-v)` per part with `v = α1`, the denominator of the per-part
    /// correlation bound.
    pub fn variance_terms(&self) -> Vec<S> {
        self.alpha1.iter().map(|a| a.clone() * (S::one() - a.clone())).collect()
    }
}

pub fn alphas<S: Scalar>(x0: &ProbDist<S>, x1: &ProbDist<S>, partition: &Partition<S>) -> Result<AlphaTable<S>> {
    x0.domain().same_size(x1.domain())?;
    Error::check_domain(partition.domain_size(), x0.len())?;
    let mass0 = pushforward(x0, partition.labeling(), partition.m())?.mass().to_vec();
    let mass1 = pushforward(x1, partition.labeling(), partition.m())?.mass().to_vec();
    let mut alpha0 = Vec::with_capacity(mass0.len());
    let mut alpha1 = Vec::with_capacity(mass0.len());
    let mut zero_mass = Vec::with_capacity(mass0.len());
    for (a, b) in mass0.iter().zip(&mass1) {
        let total = a.clone() + b.clone();
        if total.is_zero() {
            alpha0.push(S::zero());
            alpha1.push(S::zero());
            zero_mass.push(true);
        } else {
            alpha0.push(a.clone() / total.clone());
            alpha1.push(b.clone() / total);
            zero_mass.push(false);
        }
    }
    Ok(AlphaTable { mass0, mass1, alpha0, alpha1, zero_mass })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TildePair<S> {
    pub tilde0: ProbDist<S>,
    pub tilde1: ProbDist<S>,
    pub partition: Partition<S>,
    pub epsilon: S,
}

/// `X̃_b(x) = X_b(P) · D(x) / D(P)` for `x ∈ P`; zero on parts of zero `D`-mass.
pub fn build_tilde<S: Scalar>(
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
    partition: &Partition<S>,
    epsilon: S,
) -> Result<TildePair<S>> {
    let table = alphas(x0, x1, partition)?;
    let d = mixture(x0, x1)?;
    let weights = pushforward(&d, partition.labeling(), partition.m())?;
    let assemble = |part_mass: &[S]| {
        let mass = (0..d.len())
            .map(|x| {
                let p = partition.label(x);
                let w = weights.get(p);
                if w.is_zero() {
                    S::zero()
                } else {
                    part_mass[p].clone() * d.get(x).clone() / w.clone()
                }
            })
            .collect();
        ProbDist::with_domain(x0.domain().clone(), mass)
    };
    Ok(TildePair {
        tilde0: assemble(&table.mass0)?,
        tilde1: assemble(&table.mass1)?,
        partition: partition.clone(),
        epsilon,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HatVariable<S> {
    pub hat0: ProbDist<S>,
    pub partition: Partition<S>,
    pub eps_prime: S,
    /// `√ε′`, for reporting; the swap test itself is `α1² ≥ ε′`.
    pub threshold: f64,
    pub swapped: Vec<bool>,
}

/// Keeps `X0`'s part masses; on parts with `α1 ≥ √ε′` the conditional is
/// `X1|P`, elsewhere `X0|P`.
pub fn build_hat<S: Scalar>(
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
    partition: &Partition<S>,
    eps_prime: S,
) -> Result<HatVariable<S>> {
    if eps_prime <= S::zero() || eps_prime >= S::one() {
        return Err(Error::InvalidParameter(format!("eps_prime {eps_prime} outside (0,1)")));
    }
    let table = alphas(x0, x1, partition)?;
    let swapped: Vec<bool> = (0..table.r())
        .map(|p| !table.zero_mass[p] && table.alpha1[p].clone() * table.alpha1[p].clone() >= eps_prime)
        .collect();
    let mass = (0..x0.len())
        .map(|x| {
            let p = partition.label(x);
            if swapped[p] {
                table.mass0[p].clone() * x1.get(x).clone() / table.mass1[p].clone()
            } else {
                x0.get(x).clone()
            }
        })
        .collect();
    Ok(HatVariable {
        hat0: ProbDist::with_domain(x0.domain().clone(), mass)?,
        partition: partition.clone(),
        threshold: eps_prime.as_f64().sqrt(),
        eps_prime,
        swapped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuralReport {
    pub parts_checked: usize,
    pub conditionals_compared: usize,
}

/// Conditional of `dist` on `members`, or `None` when the part has no mass.
fn part_conditional<S: Scalar>(dist: &ProbDist<S>, members: &[usize]) -> Option<Vec<S>> {
    let total = dist.mass_of(members);
    if total.is_zero() {
        return None;
    }
    Some(members.iter().map(|&x| dist.get(x).clone() / total.clone()).collect())
}

fn same_vec<S: Scalar>(a: &[S], b: &[S]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.approx_eq(y))
}

fn check_pushforward<S: Scalar>(
    got: &ProbDist<S>,
    want: &ProbDist<S>,
    partition: &Partition<S>,
    what: &str,
) -> Result<()> {
    let a = pushforward(got, partition.labeling(), partition.m())?;
    let b = pushforward(want, partition.labeling(), partition.m())?;
    for p in 0..partition.m() {
        if !a.get(p).approx_eq(b.get(p)) {
            return Err(Error::StructuralViolation {
                part: p,
                detail: format!("{what}: part mass {} differs from {}", a.get(p), b.get(p)),
            });
        }
    }
    Ok(())
}

/// Pushforward identity `p(X̃_b) = p(X_b)` and conditional identity
/// `X̃0|P = X̃1|P = D|P` on every positive-mass part.
pub fn verify_structural_tilde<S: Scalar>(
    pair: &TildePair<S>,
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
) -> Result<StructuralReport> {
    let partition = &pair.partition;
    check_pushforward(&pair.tilde0, x0, partition, "tilde0 vs X0")?;
    check_pushforward(&pair.tilde1, x1, partition, "tilde1 vs X1")?;
    let d = mixture(x0, x1)?;
    let mut compared = 0;
    for (p, members) in partition.parts().iter().enumerate() {
        let Some(reference) = part_conditional(&d, members) else { continue };
        for (name, tilde) in [("tilde0", &pair.tilde0), ("tilde1", &pair.tilde1)] {
            if let Some(cond) = part_conditional(tilde, members) {
                compared += 1;
                if !same_vec(&cond, &reference) {
                    return Err(Error::StructuralViolation {
                        part: p,
                        detail: format!("{name} conditional differs from the mixture conditional"),
                    });
                }
            }
        }
    }
    Ok(StructuralReport { parts_checked: partition.m(), conditionals_compared: compared })
}

/// Pushforward identity `p(X̂0) = p(X0)` and the per-part conditional swap.
pub fn verify_structural_hat<S: Scalar>(
    hat: &HatVariable<S>,
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
) -> Result<StructuralReport> {
    let partition = &hat.partition;
    check_pushforward(&hat.hat0, x0, partition, "hat0 vs X0")?;
    let mut compared = 0;
    for (p, members) in partition.parts().iter().enumerate() {
        let Some(cond) = part_conditional(&hat.hat0, members) else { continue };
        let source = if hat.swapped[p] { x1 } else { x0 };
        let reference = part_conditional(source, members).ok_or_else(|| Error::StructuralViolation {
            part: p,
            detail: "hat0 has mass on a part its source conditional does not charge".into(),
        })?;
        compared += 1;
        if !same_vec(&cond, &reference) {
            return Err(Error::StructuralViolation {
                part: p,
                detail: format!(
                    "hat0 conditional differs from the {} conditional",
                    if hat.swapped[p] { "X1" } else { "X0" }
                ),
            });
        }
    }
    Ok(StructuralReport { parts_checked: partition.m(), conditionals_compared: compared })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndistinguishabilityCheck<S> {
    pub adv0: S,
    pub adv1: S,
    /// `C·ε`.
    pub bound: f64,
}

/// `best_advantage(F, X_b, X̃_b)` for both sides; errors when either
/// exceeds `constant·ε`.
pub fn verify_indistinguishability<S: Scalar>(
    pair: &TildePair<S>,
    x0: &ProbDist<S>,
    x1: &ProbDist<S>,
    family: &Family<S>,
    constant: f64,
) -> Result<IndistinguishabilityCheck<S>> {
    let (adv0, adv1) = if family.is_empty() {
        (S::zero(), S::zero())
    } else {
        (best_advantage(family, x0, &pair.tilde0)?.1, best_advantage(family, x1, &pair.tilde1)?.1)
    };
    let bound = constant * pair.epsilon.as_f64();
    let tol = S::tolerance();
    if adv0.as_f64() > bound + tol || adv1.as_f64() > bound + tol {
        return Err(Error::Invariant(format!(
            "tilde advantages ({adv0}, {adv1}) exceed {constant}*epsilon = {bound}"
        )));
    }
    Ok(IndistinguishabilityCheck { adv0, adv1, bound })
}

/// `best_advantage(F, X0, X̂0)`; errors when it exceeds `constant·epsilon`.
pub fn verify_hat_indistinguishability<S: Scalar>(
    hat: &HatVariable<S>,
    x0: &ProbDist<S>,
    family: &Family<S>,
    epsilon: f64,
    constant: f64,
) -> Result<(S, f64)> {
    let adv = if family.is_empty() { S::zero() } else { best_advantage(family, x0, &hat.hat0)?.1 };
    let bound = constant * epsilon;
    if adv.as_f64() > bound + S::tolerance() {
        return Err(Error::Invariant(format!("hat advantage {adv} exceeds {constant}*epsilon = {bound}")));
    }
    Ok((adv, bound))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HatSandwich<S> {
    /// `d_TV(p(X̂0), p(X1))`.
    pub lo: S,
    /// `d_TV(X̂0, X1)`.
    pub mid: S,
    /// `lo + 2√ε′`.
    pub hi: f64,
}

pub fn hat_partition_tv_sandwich<S: Scalar>(hat: &HatVariable<S>, x1: &ProbDist<S>) -> Result<HatSandwich<S>> {
    let partition = &hat.partition;
    let lo = tv_distance(
        &pushforward(&hat.hat0, partition.labeling(), partition.m())?,
        &pushforward(x1, partition.labeling(), partition.m())?,
    )?;
    let mid = tv_distance(&hat.hat0, x1)?;
    let hi = lo.as_f64() + 2.0 * hat.threshold;
    let tol = S::tolerance() + 1e-12;
    if mid < lo && !mid.approx_eq(&lo) || mid.as_f64() > hi + tol {
        return Err(Error::Invariant(format!("hat sandwich violated: {lo} <= {mid} <= {hi}")));
    }
    Ok(HatSandwich { lo, mid, hi })
}
