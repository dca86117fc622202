//! Explicit finite distributions and the information-theoretic metrics on them.
//!
//! Linear operations (TV distance, mixtures, conditionals, pushforwards,
//! product TV) stay in the distribution's scalar type and are exact for
//! [`Rational`](crate::Rational). Hellinger and Rényi-½ quantities involve
//! square roots and are reported as `f64` [`MetricValue`]s.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::combinatorics::{count_vector_total, for_each_count_vector, product_size};
use crate::error::{Error, Result};
use crate::scalar::{sum, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    size: usize,
    labels: Option<Vec<String>>,
}

impl Domain {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidDistribution("domain must be nonempty".into()));
        }
        Ok(Self { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let mut domain = Self::new(labels.len())?;
        let distinct: HashSet<&String> = labels.iter().collect();
        if distinct.len() != labels.len() {
            return Err(Error::InvalidDistribution("domain labels must be distinct".into()));
        }
        domain.labels = Some(labels);
        Ok(domain)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Domain of `k`-tuples, encoded in mixed radix with the first coordinate
    /// most significant.
    pub fn power(&self, k: usize) -> Result<Self> {
        let size = self
            .size
            .checked_pow(k as u32)
            .ok_or(Error::DomainTooLarge { size: usize::MAX, limit: usize::MAX })?;
        Self::new(size)
    }

    pub fn same_size(&self, other: &Domain) -> Result<()> {
        Error::check_domain(self.size, other.size)
    }
}

/// A probability vector over `0..N`. Zero-mass elements stay in the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist<S> {
    domain: Domain,
    mass: Vec<S>,
}

impl<S: Scalar> ProbDist<S> {
    pub fn new(mass: Vec<S>) -> Result<Self> {
        let domain = Domain::new(mass.len())?;
        Self::with_domain(domain, mass)
    }

    pub fn with_domain(domain: Domain, mass: Vec<S>) -> Result<Self> {
        if mass.len() != domain.size() {
            return Err(Error::DomainMismatch { left: domain.size(), right: mass.len() });
        }
        if let Some((i, m)) = mass.iter().enumerate().find(|(_, m)| **m < S::zero()) {
            return Err(Error::InvalidDistribution(format!("negative mass {m} at element {i}")));
        }
        let total = sum(&mass);
        let ok = if S::EXACT {
            total == S::one()
        } else {
            (total.as_f64() - 1.0).abs() <= crate::config::REAL_MASS_TOL.max(S::tolerance())
        };
        if !ok {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { domain, mass })
    }

    /// Builds from nonnegative weights by normalizing.
    pub fn from_weights(weights: Vec<S>) -> Result<Self> {
        let total = sum(&weights);
        if total <= S::zero() {
            return Err(Error::InvalidDistribution("weights have zero total".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total.clone()).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Domain::new(n)?;
        let each = S::one() / S::from_count(n);
        Self::new(vec![each; n])
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::InvalidParameter(format!("point {at} outside domain of size {n}")));
        }
        let mut mass = vec![S::zero(); n];
        mass[at] = S::one();
        Self::new(mass)
    }

    /// `[1 - p, p]`: element 1 is the outcome "1".
    pub fn bernoulli(p: S) -> Result<Self> {
        Self::new(vec![S::one() - p.clone(), p])
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[S] {
        &self.mass
    }

    pub fn get(&self, x: usize) -> &S {
        &self.mass[x]
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&x| !self.mass[x].is_zero()).collect()
    }

    pub fn mass_of(&self, subset: &[usize]) -> S {
        subset.iter().fold(S::zero(), |acc, &x| acc + self.mass[x].clone())
    }

    pub fn to_f64(&self) -> ProbDist<f64> {
        ProbDist { domain: self.domain.clone(), mass: self.mass.iter().map(S::as_f64).collect() }
    }

    /// Explicit product distribution over the tuple domain.
    pub fn product(factors: &[ProbDist<S>]) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter("empty product".into()));
        }
        let mut mass = vec![S::one()];
        for f in factors {
            let mut next = Vec::with_capacity(mass.len() * f.len());
            for a in &mass {
                for b in &f.mass {
                    next.push(a.clone() * b.clone());
                }
            }
            mass = next;
        }
        let domain = Domain::new(mass.len())?;
        Ok(Self { domain, mass })
    }

    pub fn power(&self, k: usize) -> Result<Self> {
        Self::product(&vec![self.clone(); k])
    }

    pub(crate) fn from_parts_unchecked(domain: Domain, mass: Vec<S>) -> Self {
        Self { domain, mass }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Tv,
    HellingerSq,
    Hellinger,
    RenyiHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub kind: MetricKind,
}

impl MetricValue {
    fn new(value: f64, kind: MetricKind) -> Self {
        Self { value, kind }
    }
}

/// `½ Σ |P(x) - Q(x)|`, exact in the distribution's scalar type.
pub fn tv_distance<S: Scalar>(p: &ProbDist<S>, q: &ProbDist<S>) -> Result<S> {
    p.domain.same_size(&q.domain)?;
    let total = p
        .mass
        .iter()
        .zip(&q.mass)
        .fold(S::zero(), |acc, (a, b)| acc + (a.clone() - b.clone()).abs());
    Ok(total * S::half())
}

pub fn tv_metric<S: Scalar>(p: &ProbDist<S>, q: &ProbDist<S>) -> Result<MetricValue> {
    Ok(MetricValue::new(tv_distance(p, q)?.as_f64(), MetricKind::Tv))
}

/// `½ Σ (√P(x) - √Q(x))²`.
pub fn hellinger_sq<S: Scalar>(p: &ProbDist<S>, q: &ProbDist<S>) -> Result<MetricValue> {
    p.domain.same_size(&q.domain)?;
    let h2 = 0.5
        * p.mass
            .iter()
            .zip(&q.mass)
            .map(|(a, b)| {
                let d = a.as_f64().max(0.0).sqrt() - b.as_f64().max(0.0).sqrt();
                d * d
            })
            .sum::<f64>();
    Ok(MetricValue::new(h2.clamp(0.0, 1.0), MetricKind::HellingerSq))
}

pub fn hellinger<S: Scalar>(p: &ProbDist<S>, q: &ProbDist<S>) -> Result<MetricValue> {
    Ok(MetricValue::new(hellinger_sq(p, q)?.value.sqrt(), MetricKind::Hellinger))
}

/// `Σ √P(x)`, the quantity both Rényi-½ and Hellinger-to-uniform reduce to.
pub fn root_mass_sum<S: Scalar>(p: &ProbDist<S>) -> f64 {
    p.mass.iter().map(|m| m.as_f64().max(0.0).sqrt()).sum()
}

/// Rényi entropy of order ½ in bits: `2·log₂(Σ √P(x))`.
pub fn renyi_half_entropy<S: Scalar>(p: &ProbDist<S>) -> MetricValue {
    let h = 2.0 * root_mass_sum(p).log2();
    let cap = (p.len() as f64).log2();
    MetricValue::new(h.clamp(0.0, cap), MetricKind::RenyiHalf)
}

/// `d_H²(P, U) = 1 - √(2^{H_½(P)} / N)`.
pub fn hellinger_to_uniform<S: Scalar>(p: &ProbDist<S>) -> MetricValue {
    let h = renyi_half_entropy(p).value;
    let v = 1.0 - (h.exp2() / p.len() as f64).sqrt();
    MetricValue::new(v.clamp(0.0, 1.0), MetricKind::HellingerSq)
}

/// Squared Hellinger distance of `m`-fold products: `1 - (1 - h2)^m`.
pub fn product_hellinger_sq(h2: f64, m: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&h2) || m == 0 {
        return Err(Error::InvalidParameter(format!("h2={h2}, m={m}")));
    }
    let v = 1.0 - (1.0 - h2).powi(m as i32);
    let mh = m as f64 * h2;
    let tol = crate::config::HELLINGER_TOL;
    assert!(
        1.0 - (-mh).exp() <= v + tol && v <= mh + tol,
        "product Hellinger {v} outside [1 - e^-{mh}, {mh}]"
    );
    Ok(v)
}

/// `(1 - e^{-k·d_H²}, min(1, √(2k)·d_H))` bracketing `d_TV(P^⊗k, Q^⊗k)`.
pub fn k_sample_tv_bounds<S: Scalar>(p: &ProbDist<S>, q: &ProbDist<S>, k: u32) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let h2 = hellinger_sq(p, q)?.value;
    let lower = 1.0 - (-(k as f64) * h2).exp();
    let upper = ((2.0 * k as f64).sqrt() * h2.sqrt()).min(1.0);
    Ok((lower, upper.max(lower)))
}

/// `½P + ½Q`.
pub fn mixture<S: Scalar>(p: &ProbDist<S>, q: &ProbDist<S>) -> Result<ProbDist<S>> {
    p.domain.same_size(&q.domain)?;
    let half = S::half();
    let mass = p
        .mass
        .iter()
        .zip(&q.mass)
        .map(|(a, b)| (a.clone() + b.clone()) * half.clone())
        .collect();
    Ok(ProbDist::from_parts_unchecked(p.domain.clone(), mass))
}

/// `P` restricted to `subset` and renormalized; zero outside.
pub fn conditional<S: Scalar>(p: &ProbDist<S>, subset: &[usize]) -> Result<ProbDist<S>> {
    if let Some(&x) = subset.iter().find(|&&x| x >= p.len()) {
        return Err(Error::InvalidParameter(format!("element {x} outside domain")));
    }
    let members: HashSet<usize> = subset.iter().copied().collect();
    let total = members.iter().fold(S::zero(), |acc, &x| acc + p.mass[x].clone());
    if total.is_zero() {
        return Err(Error::ZeroMassSubset);
    }
    let mass = (0..p.len())
        .map(|x| if members.contains(&x) { p.mass[x].clone() / total.clone() } else { S::zero() })
        .collect();
    Ok(ProbDist::from_parts_unchecked(p.domain.clone(), mass))
}

/// Distribution of `labeling(X)` over `0..m`.
pub fn pushforward<S: Scalar>(p: &ProbDist<S>, labeling: &[usize], m: usize) -> Result<ProbDist<S>> {
    Error::check_domain(p.len(), labeling.len())?;
    let mut mass = vec![S::zero(); m];
    for (x, &label) in labeling.iter().enumerate() {
        if label >= m {
            return Err(Error::InvalidParameter(format!("label {label} at {x} not below {m}")));
        }
        mass[label] = mass[label].clone() + p.mass[x].clone();
    }
    let domain = Domain::new(m)?;
    Ok(ProbDist::from_parts_unchecked(domain, mass))
}

fn check_pairs<S: Scalar>(ps: &[ProbDist<S>], qs: &[ProbDist<S>]) -> Result<()> {
    if ps.is_empty() || ps.len() != qs.len() {
        return Err(Error::InvalidParameter(format!(
            "product needs equal nonempty factor lists, got {} and {}",
            ps.len(),
            qs.len()
        )));
    }
    for (p, q) in ps.iter().zip(qs) {
        p.domain.same_size(&q.domain)?;
    }
    Ok(())
}

/// Exact `d_TV(⊗Ps, ⊗Qs)` by enumerating tuples over the union supports.
pub fn product_tv_enumerate<S: Scalar>(
    ps: &[ProbDist<S>],
    qs: &[ProbDist<S>],
    budget: u128,
) -> Result<S> {
    check_pairs(ps, qs)?;
    let supports: Vec<Vec<usize>> = ps
        .iter()
        .zip(qs)
        .map(|(p, q)| (0..p.len()).filter(|&x| !p.mass[x].is_zero() || !q.mass[x].is_zero()).collect())
        .collect();
    let needed = product_size(supports.iter().map(Vec::len));
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget, what: "product enumeration" });
    }
    fn walk<S: Scalar>(
        idx: usize,
        pa: S,
        qa: S,
        ps: &[ProbDist<S>],
        qs: &[ProbDist<S>],
        supports: &[Vec<usize>],
        acc: &mut S,
    ) {
        if idx == ps.len() {
            *acc = acc.clone() + (pa - qa).abs();
            return;
        }
        for &x in &supports[idx] {
            walk(
                idx + 1,
                pa.clone() * ps[idx].mass[x].clone(),
                qa.clone() * qs[idx].mass[x].clone(),
                ps,
                qs,
                supports,
                acc,
            );
        }
    }
    let mut acc = S::zero();
    walk(0, S::one(), S::one(), ps, qs, &supports, &mut acc);
    Ok(acc * S::half())
}

/// Exact `d_TV(P^⊗k, Q^⊗k)` by summing over count vectors of the union support.
pub fn product_tv_count_vectors<S: Scalar>(
    p: &ProbDist<S>,
    q: &ProbDist<S>,
    k: usize,
    budget: u128,
) -> Result<S> {
    p.domain.same_size(&q.domain)?;
    let support: Vec<usize> =
        (0..p.len()).filter(|&x| !p.mass[x].is_zero() || !q.mass[x].is_zero()).collect();
    let needed = count_vector_total(k, support.len());
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget, what: "count-vector enumeration" });
    }
    let mut acc = S::zero();
    let mut pf: Vec<(S, u32)> = support.iter().map(|&x| (p.mass[x].clone(), 0)).collect();
    let mut qf: Vec<(S, u32)> = support.iter().map(|&x| (q.mass[x].clone(), 0)).collect();
    for_each_count_vector(support.len(), k, |counts, coef| {
        for (i, &c) in counts.iter().enumerate() {
            pf[i].1 = c;
            qf[i].1 = c;
        }
        let a = S::weighted_power_product(coef, &pf);
        let b = S::weighted_power_product(coef, &qf);
        acc = acc.clone() + (a - b).abs();
    });
    Ok(acc * S::half())
}

/// Exact `d_TV(⊗Ps, ⊗Qs)`: exhaustive enumeration when the tuple count fits
/// the budget, otherwise count vectors when every factor pair is identical.
pub fn product_tv_exact<S: Scalar>(ps: &[ProbDist<S>], qs: &[ProbDist<S>], budget: u128) -> Result<S> {
    match product_tv_enumerate(ps, qs, budget) {
        Err(Error::BudgetExceeded { .. }) => {
            let identical = ps.iter().all(|p| p == &ps[0]) && qs.iter().all(|q| q == &qs[0]);
            if !identical {
                return Err(Error::BudgetExceeded {
                    needed: product_size(ps.iter().map(|p| p.len())),
                    budget,
                    what: "heterogeneous product enumeration",
                });
            }
            product_tv_count_vectors(&ps[0], &qs[0], ps.len(), budget)
        }
        other => other,
    }
}
