//! Tabulated test functions, distinguisher families and their advantages.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{for_each_tuple, product_size};
use crate::config::MAX_BOOLEAN_DOMAIN;
use crate::distributions::{Domain, ProbDist};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Declarative circuit-complexity metadata. Never enforced.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityTag {
    pub q: u64,
    pub t: u64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction<S> {
    domain: Domain,
    values: Vec<S>,
    name: String,
}

impl<S: Scalar> TestFunction<S> {
    pub fn new(name: impl Into<String>, values: Vec<S>) -> Result<Self> {
        let domain = Domain::new(values.len())?;
        if let Some((x, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| **v < S::zero() || **v > S::one())
        {
            return Err(Error::InvalidParameter(format!("test value {v} at {x} outside [0,1]")));
        }
        Ok(Self { domain, values, name: name.into() })
    }

    pub fn constant(n: usize, c: S) -> Result<Self> {
        let name = format!("const_{}", c.to_repr());
        Self::new(name, vec![c; n])
    }

    pub fn indicator(n: usize, subset: &[usize]) -> Result<Self> {
        let mut values = vec![S::zero(); n];
        for &x in subset {
            if x >= n {
                return Err(Error::InvalidParameter(format!("element {x} outside domain")));
            }
            values[x] = S::one();
        }
        let name = format!(
            "ind{{{}}}",
            subset.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
        );
        Self::new(name, values)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn eval(&self, x: usize) -> &S {
        &self.values[x]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn negation(&self) -> Self {
        Self {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| S::one() - v.clone()).collect(),
            name: format!("not_{}", self.name),
        }
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn same_values(&self, other: &Self) -> bool {
        self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a.approx_eq(b))
    }
}

/// Hash lookup on canonical value text. Exact scalars are decided by the
/// hash alone; real scalars fall back to a tolerance scan on a miss.
struct ValueIndex {
    keys: HashSet<Vec<String>>,
}

impl ValueIndex {
    fn new<S: Scalar>(functions: &[TestFunction<S>]) -> Self {
        let mut index = Self { keys: HashSet::with_capacity(functions.len()) };
        for f in functions {
            index.insert(f);
        }
        index
    }

    fn key<S: Scalar>(f: &TestFunction<S>) -> Vec<String> {
        f.values.iter().map(S::to_repr).collect()
    }

    fn insert<S: Scalar>(&mut self, f: &TestFunction<S>) {
        self.keys.insert(Self::key(f));
    }

    fn contains<S: Scalar>(&self, functions: &[TestFunction<S>], f: &TestFunction<S>) -> bool {
        self.keys.contains(&Self::key(f)) || (!S::EXACT && functions.iter().any(|g| g.same_values(f)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Family<S> {
    functions: Vec<TestFunction<S>>,
    closed_under_negation: bool,
    complexity: ComplexityTag,
}

impl<S: Scalar> Family<S> {
    /// Validates the shared domain and, when `closed_under_negation` is
    /// claimed, that `1 - f` is present for every `f`.
    pub fn new(
        functions: Vec<TestFunction<S>>,
        closed_under_negation: bool,
        complexity: ComplexityTag,
    ) -> Result<Self> {
        if let Some(first) = functions.first() {
            for f in &functions[1..] {
                first.domain.same_size(&f.domain)?;
            }
        }
        let family = Self { functions, closed_under_negation, complexity };
        if closed_under_negation {
            if let Some(i) = family.missing_negation() {
                return Err(Error::InvalidParameter(format!(
                    "family flagged closed under negation but 1 - f{i} is absent"
                )));
            }
        }
        Ok(family)
    }

    pub fn from_functions(functions: Vec<TestFunction<S>>) -> Result<Self> {
        Self::new(functions, false, ComplexityTag::default())
    }

    fn missing_negation(&self) -> Option<usize> {
        let index = ValueIndex::new(&self.functions);
        (0..self.functions.len()).find(|&i| !index.contains(&self.functions, &self.functions[i].negation()))
    }

    /// Adds `1 - f` for every `f` lacking it plus the constants 0 and 1, and
    /// sets the flag.
    pub fn close_under_negation(mut self) -> Result<Self> {
        let n = match self.domain_size() {
            Some(n) => n,
            None => return Err(Error::EmptyFamily),
        };
        let mut index = ValueIndex::new(&self.functions);
        for c in [S::zero(), S::one()] {
            let constant = TestFunction::constant(n, c)?;
            if !index.contains(&self.functions, &constant) {
                index.insert(&constant);
                self.functions.push(constant);
            }
        }
        let mut i = 0;
        while i < self.functions.len() {
            let neg = self.functions[i].negation();
            if !index.contains(&self.functions, &neg) {
                index.insert(&neg);
                self.functions.push(neg);
            }
            i += 1;
        }
        self.closed_under_negation = true;
        Ok(self)
    }

    pub fn functions(&self) -> &[TestFunction<S>] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn domain_size(&self) -> Option<usize> {
        self.functions.first().map(TestFunction::len)
    }

    pub fn closed_under_negation(&self) -> bool {
        self.closed_under_negation
    }

    pub fn complexity(&self) -> &ComplexityTag {
        &self.complexity
    }

    pub fn with_complexity(mut self, complexity: ComplexityTag) -> Self {
        self.complexity = complexity;
        self
    }

    /// Appends functions (same domain); the negation flag is re-checked.
    pub fn extended(self, extra: Vec<TestFunction<S>>) -> Result<Self> {
        let mut functions = self.functions;
        functions.extend(extra);
        let closed = self.closed_under_negation;
        let candidate = Self::new(functions.clone(), false, self.complexity.clone())?;
        let closed = closed && candidate.missing_negation().is_none();
        Self::new(functions, closed, self.complexity)
    }
}

/// `|Σ f(x)·(P(x) - Q(x))|`.
pub fn advantage<S: Scalar>(f: &TestFunction<S>, p: &ProbDist<S>, q: &ProbDist<S>) -> Result<S> {
    Error::check_domain(f.len(), p.len())?;
    Error::check_domain(p.len(), q.len())?;
    let signed = f
        .values
        .iter()
        .zip(p.mass().iter().zip(q.mass()))
        .fold(S::zero(), |acc, (v, (a, b))| acc + v.clone() * (a.clone() - b.clone()));
    Ok(signed.abs())
}

/// Index and value of the best function in `family`; ties go to the lowest
/// index.
pub fn best_advantage<S: Scalar>(
    family: &Family<S>,
    p: &ProbDist<S>,
    q: &ProbDist<S>,
) -> Result<(usize, S)> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let values = family
        .functions
        .par_iter()
        .map(|f| advantage(f, p, q))
        .collect::<Result<Vec<S>>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    Ok((best, values[best].clone()))
}

/// Every indicator function on the domain, indexed by the bitmask of its
/// support.
pub fn all_boolean_family<S: Scalar>(domain: &Domain) -> Result<Family<S>> {
    let n = domain.size();
    if n > MAX_BOOLEAN_DOMAIN {
        return Err(Error::DomainTooLarge { size: n, limit: MAX_BOOLEAN_DOMAIN });
    }
    let functions = (0u64..1 << n)
        .map(|mask| {
            let values = (0..n)
                .map(|x| if mask >> x & 1 == 1 { S::one() } else { S::zero() })
                .collect();
            TestFunction::new(format!("bool_{mask}"), values)
        })
        .collect::<Result<Vec<_>>>()?;
    let tag = ComplexityTag { q: 0, t: 0, note: format!("all 2^{n} indicators") };
    Family::new(functions, true, tag)
}

/// A product `Π f_j(x_j)` over `X^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductFunction<S> {
    factors: Vec<TestFunction<S>>,
}

impl<S: Scalar> ProductFunction<S> {
    pub fn new(factors: Vec<TestFunction<S>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter("product with no factors".into()));
        }
        for f in &factors[1..] {
            factors[0].domain.same_size(&f.domain)?;
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[TestFunction<S>] {
        &self.factors
    }

    pub fn arity(&self) -> usize {
        self.factors.len()
    }

    pub fn eval(&self, tuple: &[usize]) -> S {
        self.factors
            .iter()
            .zip(tuple)
            .fold(S::one(), |acc, (f, &x)| acc * f.values[x].clone())
    }

    /// Fixes every coordinate except `coord` at the values in `fixed` and
    /// returns the resulting function of the free coordinate.
    pub fn marginal(&self, coord: usize, fixed: &[usize]) -> Result<TestFunction<S>> {
        if coord >= self.arity() || fixed.len() != self.arity() {
            return Err(Error::InvalidParameter("marginal coordinate out of range".into()));
        }
        let scale = self
            .factors
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != coord)
            .fold(S::one(), |acc, (j, f)| acc * f.values[fixed[j]].clone());
        let values = self.factors[coord].values.iter().map(|v| v.clone() * scale.clone()).collect();
        TestFunction::new(format!("marg{coord}"), values)
    }

    /// Tabulates over `X^k` in mixed radix (first coordinate most significant).
    pub fn tabulate(&self) -> Result<TestFunction<S>> {
        let n = self.factors[0].len();
        let mut values = Vec::new();
        for_each_tuple(&vec![n; self.arity()], |t| values.push(self.eval(t)));
        let name = self.factors.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join("*");
        TestFunction::new(name, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductMode {
    /// Every product `Π f_j(x_j)` plus the coordinate liftings.
    AllProducts,
    /// Only the liftings `f(x_j)` of single functions.
    PerCoordinate,
    /// The liftings plus `n` products with uniformly drawn factors.
    Sampled { n: usize, seed: u64 },
}

/// Generator functions of the marginal-closed product class, untabulated.
pub fn product_generators<S: Scalar>(
    family: &Family<S>,
    k: usize,
    mode: ProductMode,
    budget: u128,
) -> Result<Vec<ProductFunction<S>>> {
    let n = family.domain_size().ok_or(Error::EmptyFamily)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let one = TestFunction::constant(n, S::one())?;
    let mut out = Vec::new();
    let lifting = |j: usize, f: &TestFunction<S>| {
        let mut factors = vec![one.clone(); k];
        factors[j] = f.clone();
        ProductFunction::new(factors)
    };
    match mode {
        ProductMode::AllProducts => {
            let needed = product_size(std::iter::repeat_n(family.len(), k));
            if needed > budget {
                return Err(Error::BudgetExceeded { needed, budget, what: "product family" });
            }
            let mut err = None;
            for_each_tuple(&vec![family.len(); k], |idx| {
                let factors = idx.iter().map(|&i| family.functions[i].clone()).collect();
                match ProductFunction::new(factors) {
                    Ok(p) => out.push(p),
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            if k > 1 {
                for j in 0..k {
                    for f in &family.functions {
                        out.push(lifting(j, f)?);
                    }
                }
            }
        }
        ProductMode::PerCoordinate => {
            for j in 0..k {
                for f in &family.functions {
                    out.push(lifting(j, f)?);
                }
            }
        }
        ProductMode::Sampled { n: count, seed } => {
            for j in 0..k {
                for f in &family.functions {
                    out.push(lifting(j, f)?);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                let factors = (0..k)
                    .map(|_| family.functions[rng.random_range(0..family.len())].clone())
                    .collect();
                out.push(ProductFunction::new(factors)?);
            }
        }
    }
    Ok(out)
}

/// Tabulated generator subset of the product class over `X^k`. For `k = 1`
/// this is the family itself.
pub fn product_family<S: Scalar>(
    family: &Family<S>,
    k: usize,
    mode: ProductMode,
    budget: u128,
) -> Result<Family<S>> {
    if k == 1 {
        return Ok(family.clone());
    }
    let n = family.domain_size().ok_or(Error::EmptyFamily)?;
    let table = product_size(std::iter::repeat_n(n, k));
    let generators = product_generators(family, k, mode, budget)?;
    let work = table.saturating_mul(generators.len() as u128);
    if work > budget.saturating_mul(16) {
        return Err(Error::BudgetExceeded { needed: work, budget, what: "product family table" });
    }
    let functions = generators.iter().map(ProductFunction::tabulate).collect::<Result<Vec<_>>>()?;
    let tag = ComplexityTag {
        q: family.complexity.q.saturating_mul(k as u64),
        t: family.complexity.t.saturating_mul(k as u64),
        note: format!("{k}-fold products of: {}", family.complexity.note),
    };
    Family::new(functions, false, tag)
}
