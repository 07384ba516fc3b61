//! Finite rules generating the infinite term sequences `(P_m)`: scale rules
//! for the periods `T(m)`, generator rules for the base polynomials `h_m`,
//! and the family combinators (tensor products and telescoping).
//!
//! Everything here is exact: rules carry rational data and the floating
//! evaluations derive from it on demand.

use num_rational::BigRational;
use num_traits::Signed;

use crate::error::{Error, Result};
use crate::laurent::{exp_distribution, rat_pow, Coeff, ExactPoly, FloatPoly, LaurentPoly, RationalAngle};

/// Default cap on materialized term support.
pub const DEFAULT_MATERIALIZE_CAP: usize = 1 << 20;

/// The scale sequence `n(m)`: an explicit prefix followed by an affine tail
/// `n(m) = slope·m + offset`. Every value must be at least 2, so the partial
/// products `T(m) = n(1)⋯n(m)` are strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaleRule {
    prefix: Vec<u64>,
    slope: u64,
    offset: u64,
}

impl ScaleRule {
    pub fn constant(n: u64) -> Result<Self> {
        Self::with_prefix(Vec::new(), 0, n)
    }

    pub fn affine(slope: u64, offset: u64) -> Result<Self> {
        Self::with_prefix(Vec::new(), slope, offset)
    }

    pub fn with_prefix(prefix: Vec<u64>, slope: u64, offset: u64) -> Result<Self> {
        if offset < 2 {
            return Err(Error::InvalidRule(format!("scale tail offset {offset} is below 2")));
        }
        if let Some(&bad) = prefix.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidRule(format!("scale prefix entry {bad} is below 2")));
        }
        Ok(Self { prefix, slope, offset })
    }

    /// `n(m)` for 1-based `m`.
    pub fn n(&self, m: u32) -> u64 {
        assert!(m >= 1, "scale index starts at 1");
        match self.prefix.get(m as usize - 1) {
            Some(&n) => n,
            None => self.slope * m as u64 + self.offset,
        }
    }

    /// `T(m) = ∏_{l≤m} n(l)`, failing on exponent-range overflow.
    pub fn t(&self, m: u32) -> Result<i64> {
        let mut acc: i64 = 1;
        for l in 1..=m {
            let n = self.n(l);
            acc = acc
                .checked_mul(i64::try_from(n).map_err(|_| Error::ScaleOverflow { index: l })?)
                .ok_or(Error::ScaleOverflow { index: l })?;
        }
        Ok(acc)
    }

    /// `T(m) mod q` without ever forming `T(m)`.
    pub fn t_mod(&self, m: u32, q: u64) -> u64 {
        if q == 1 {
            return 0;
        }
        let mut acc: u64 = 1 % q;
        for l in 1..=m {
            acc = ((acc as u128 * (self.n(l) % q) as u128) % q as u128) as u64;
        }
        acc
    }

    /// The constant value when the rule is constant everywhere.
    pub fn constant_value(&self) -> Option<u64> {
        if self.slope != 0 {
            return None;
        }
        if self.prefix.iter().all(|&n| n == self.offset) {
            Some(self.offset)
        } else {
            None
        }
    }

    /// True when `n(m) → ∞`.
    pub fn is_increasing(&self) -> bool {
        self.slope >= 1
    }

    /// Minimum of `n(j)` over `j ≥ m`.
    pub fn min_from(&self, m: u32) -> u64 {
        let first_tail = (self.prefix.len() as u32 + 1).max(m);
        let tail_min = self.slope * first_tail as u64 + self.offset;
        self.prefix
            .iter()
            .skip(m as usize - 1)
            .copied()
            .chain(std::iter::once(tail_min))
            .min()
            .unwrap()
    }

    pub fn prefix(&self) -> &[u64] {
        &self.prefix
    }

    pub fn slope(&self) -> u64 {
        self.slope
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }
}

/// The generator sequence `h_m`: an explicit prefix with a constant tail.
/// Generators are stored as entered; evaluation normalizes to unit mass.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorRule {
    prefix: Vec<ExactPoly>,
    tail: ExactPoly,
}

fn validate_generator(h: &ExactPoly, what: &str) -> Result<()> {
    if !h.is_nonnegative() {
        return Err(Error::InvalidRule(format!("{what} has a negative coefficient")));
    }
    if h.mass().is_zero() {
        return Err(Error::InvalidRule(format!("{what} has zero mass")));
    }
    Ok(())
}

impl GeneratorRule {
    pub fn constant(h: ExactPoly) -> Result<Self> {
        Self::with_prefix(Vec::new(), h)
    }

    pub fn with_prefix(prefix: Vec<ExactPoly>, tail: ExactPoly) -> Result<Self> {
        for (i, h) in prefix.iter().enumerate() {
            validate_generator(h, &format!("generator prefix entry {i}"))?;
        }
        validate_generator(&tail, "generator tail")?;
        Ok(Self { prefix, tail })
    }

    /// `h_m` for 1-based `m` (raw, not normalized).
    pub fn h(&self, m: u32) -> &ExactPoly {
        assert!(m >= 1, "generator index starts at 1");
        self.prefix.get(m as usize - 1).unwrap_or(&self.tail)
    }

    pub fn prefix_len(&self) -> u32 {
        self.prefix.len() as u32
    }

    pub fn tail(&self) -> &ExactPoly {
        &self.tail
    }

    pub fn prefix(&self) -> &[ExactPoly] {
        &self.prefix
    }

    /// All distinct generators that occur from index `m` on.
    pub fn occurring_from(&self, m: u32) -> Vec<&ExactPoly> {
        let mut out: Vec<&ExactPoly> = self.prefix.iter().skip(m as usize - 1).collect();
        out.push(&self.tail);
        out
    }
}

/// A finite description of an infinite sequence `(P_m)` of normalized
/// nonnegative terms.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilySpec {
    /// Compound-Poisson terms `P_m = Exp(r·h_m(x^{T(m)}))`.
    Divisible { gen: GeneratorRule, scale: ScaleRule, r: BigRational },
    /// Ratio terms `P_m = h_m(r·x^{T(m)}) / h_m(r)`.
    Rational { gen: GeneratorRule, scale: ScaleRule, r: BigRational },
    /// Periodic list of base polynomials: `P_m = g_{(m-1) mod p}(x^{T(m)})`.
    Explicit { gens: Vec<ExactPoly>, scale: ScaleRule },
    /// Termwise product of two families.
    Tensor { left: Box<FamilySpec>, right: Box<FamilySpec> },
    /// Consecutive products `P_{u(i)} ⋯ P_{u(i+1)-1}` for `u(i) = stride·i + offset`.
    Telescoped { inner: Box<FamilySpec>, stride: u64, offset: i64 },
}

impl FamilySpec {
    pub fn divisible(gen: GeneratorRule, scale: ScaleRule, r: BigRational) -> Result<Self> {
        if !r.is_positive() {
            return Err(Error::InvalidRule("family parameter r must be positive".into()));
        }
        for h in gen.prefix().iter().chain(std::iter::once(gen.tail())) {
            if !h.coeff(0).is_zero() {
                return Err(Error::InvalidRule(
                    "compound-Poisson generators need a zero constant term".into(),
                ));
            }
        }
        Ok(Self::Divisible { gen, scale, r })
    }

    pub fn rational(gen: GeneratorRule, scale: ScaleRule, r: BigRational) -> Result<Self> {
        if !r.is_positive() {
            return Err(Error::InvalidRule("family parameter r must be positive".into()));
        }
        Ok(Self::Rational { gen, scale, r })
    }

    pub fn explicit(gens: Vec<ExactPoly>, scale: ScaleRule) -> Result<Self> {
        if gens.is_empty() {
            return Err(Error::InvalidRule("explicit family needs at least one generator".into()));
        }
        for (i, g) in gens.iter().enumerate() {
            validate_generator(g, &format!("explicit generator {i}"))?;
        }
        Ok(Self::Explicit { gens, scale })
    }

    /// The family with every term identically 1.
    pub fn trivial() -> Self {
        Self::Explicit {
            gens: vec![ExactPoly::one()],
            scale: ScaleRule::constant(2).unwrap(),
        }
    }

    pub fn tensor(left: FamilySpec, right: FamilySpec) -> Self {
        Self::Tensor { left: Box::new(left), right: Box::new(right) }
    }

    pub fn telescope(inner: FamilySpec, stride: u64, offset: i64) -> Result<Self> {
        if stride < 1 {
            return Err(Error::InvalidRule("telescoping index map must be strictly increasing".into()));
        }
        if stride as i64 + offset < 1 {
            return Err(Error::InvalidRule("telescoping must start at index 1 or later".into()));
        }
        Ok(Self::Telescoped { inner: Box::new(inner), stride, offset })
    }

    /// Telescoping index map `u(i)`; identity for non-telescoped families.
    pub fn telescope_index(&self, i: u32) -> u32 {
        match self {
            Self::Telescoped { stride, offset, .. } => {
                let v = *stride as i64 * i as i64 + offset;
                u32::try_from(v).expect("telescoped index out of range")
            }
            _ => i,
        }
    }

    /// The single scale rule shared by every factor, when there is one.
    pub fn scale_rule(&self) -> Result<&ScaleRule> {
        match self {
            Self::Divisible { scale, .. } | Self::Rational { scale, .. } | Self::Explicit { scale, .. } => {
                Ok(scale)
            }
            Self::Tensor { left, right } => {
                let l = left.scale_rule()?;
                let r = right.scale_rule()?;
                if l == r {
                    Ok(l)
                } else {
                    Err(Error::MixedScale)
                }
            }
            Self::Telescoped { inner, .. } => inner.scale_rule(),
        }
    }

    /// `T(m)` for the shared scale rule.
    pub fn scale_product(&self, m: u32) -> Result<i64> {
        self.scale_rule()?.t(m)
    }

    /// Period of the generator choice in the term index (1 when constant),
    /// or `None` when a prefix makes it aperiodic.
    pub fn gen_period(&self) -> Option<u64> {
        match self {
            Self::Divisible { gen, .. } | Self::Rational { gen, .. } => {
                if gen.prefix_len() == 0 {
                    Some(1)
                } else {
                    None
                }
            }
            Self::Explicit { gens, .. } => Some(gens.len() as u64),
            Self::Tensor { left, right } => {
                let (a, b) = (left.gen_period()?, right.gen_period()?);
                Some(num_integer::lcm(a, b))
            }
            Self::Telescoped { inner, .. } => inner.gen_period(),
        }
    }

    /// Exact materialization of `P_m`. Unavailable for compound-Poisson
    /// families, whose terms are transcendental.
    pub fn term_exact(&self, m: u32, cap: usize) -> Result<ExactPoly> {
        match self {
            Self::Divisible { .. } => Err(Error::ExactTermsUnavailable),
            Self::Rational { gen, scale, r } => {
                let t = scale.t(m)?;
                let h = gen.h(m);
                let hr: ExactPoly = ExactPoly::from_pairs(
                    h.iter().map(|(e, c)| (*e, c * rat_pow(r, *e))),
                );
                let out = hr.normalized().compose_scale(t);
                check_cap(out.support_len(), cap)?;
                Ok(out)
            }
            Self::Explicit { gens, scale } => {
                let t = scale.t(m)?;
                let g = &gens[(m as usize - 1) % gens.len()];
                let out = g.normalized().compose_scale(t);
                check_cap(out.support_len(), cap)?;
                Ok(out)
            }
            Self::Tensor { left, right } => {
                let p = left.term_exact(m, cap)?.multiply(&right.term_exact(m, cap)?);
                check_cap(p.support_len(), cap)?;
                Ok(p)
            }
            Self::Telescoped { inner, .. } => {
                let (lo, hi) = (self.telescope_index(m), self.telescope_index(m + 1));
                let mut acc = ExactPoly::one();
                for mm in lo..hi {
                    acc = acc.multiply(&inner.term_exact(mm, cap)?);
                    check_cap(acc.support_len(), cap)?;
                }
                Ok(acc)
            }
        }
    }

    /// Floating materialization of `P_m`; `tol` budgets the compound-Poisson
    /// truncation.
    pub fn term_float(&self, m: u32, tol: f64, cap: usize) -> Result<FloatPoly> {
        match self {
            Self::Divisible { gen, scale, r } => {
                let t = scale.t(m)?;
                let h = gen.h(m).normalized();
                let exponent = FloatPoly::from_pairs(
                    h.iter().map(|(e, c)| (*e * t, c.to_f64() * r.to_f64())),
                );
                let out = exp_distribution(&exponent, tol);
                check_cap(out.support_len(), cap)?;
                Ok(out)
            }
            _ => Ok(self.term_exact(m, cap)?.to_float()),
        }
    }

    /// `ln |P_m(z)|` without materializing the term. `NegInfinity` is
    /// returned only for factors that are exactly zero in exact arithmetic.
    pub fn log_modulus_at(&self, m: u32, z: &RationalAngle) -> LogModulus {
        let mut acc = LogAcc::new();
        accumulate_log_modulus(self, m, z, &mut acc);
        if acc.exact_zero {
            LogModulus::NegInfinity
        } else {
            LogModulus::Finite(acc.log.min(0.0))
        }
    }
}

fn check_cap(support: usize, cap: usize) -> Result<()> {
    if support > cap {
        Err(Error::MaterializationCap { support, cap })
    } else {
        Ok(())
    }
}

/// Result of a log-modulus evaluation: finite, or an exact zero factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogModulus {
    Finite(f64),
    NegInfinity,
}

impl LogModulus {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::NegInfinity => None,
        }
    }
}

/// Accumulator shared by the engine: sums per-factor log moduli together
/// with a conservative floating-error budget.
#[derive(Clone, Debug)]
pub(crate) struct LogAcc {
    pub log: f64,
    pub err: f64,
    pub factors: u32,
    pub exact_zero: bool,
}

impl LogAcc {
    pub fn new() -> Self {
        Self { log: 0.0, err: 0.0, factors: 0, exact_zero: false }
    }

    pub(crate) fn push(&mut self, log: f64) {
        self.log += log;
        self.err += (log.abs() + 1.0) * 4e-15;
        self.factors += 1;
    }

    /// A factor provably within `bound` of 1 in log, counted as 1.
    pub(crate) fn push_negligible(&mut self, bound: f64) {
        self.err += bound + 1e-30;
        self.factors += 1;
    }
}

/// Smallest positive modulus treated as numerically meaningful before the
/// exact zero test is consulted.
const ZERO_PROBE: f64 = 1e-12;

/// `r·(Re h(z)/h(1) - 1)`, the log modulus of a compound-Poisson factor.
pub(crate) fn poisson_factor_log(h: &ExactPoly, r: &BigRational, z: &RationalAngle) -> f64 {
    let mass = h.mass().to_f64();
    let mut re = 0.0;
    for (e, c) in h.iter() {
        re += c.to_f64() * z.times(*e).cos_sin().0;
    }
    r.to_f64() * (re / mass - 1.0).min(0.0)
}

/// `ln(|h(r·z)| / h(r))`, or `None` when the factor vanishes in exact
/// arithmetic. Near-zero floating values without an exact-zero certificate
/// are clamped, never promoted to zero.
pub(crate) fn ratio_factor_log(h: &ExactPoly, r: &BigRational, z: &RationalAngle) -> Option<f64> {
    let rf = r.to_f64();
    let mut re = 0.0;
    let mut im = 0.0;
    let mut denom = 0.0;
    for (e, c) in h.iter() {
        let w = c.to_f64() * rf.powi(*e as i32);
        let (ct, st) = z.times(*e).cos_sin();
        re += w * ct;
        im += w * st;
        denom += w;
    }
    let modulus = re.hypot(im);
    if modulus < ZERO_PROBE * denom {
        if let Some(true) = crate::laurent::exact_zero_at(h, r, z) {
            return None;
        }
    }
    if modulus == 0.0 {
        return Some(-746.0);
    }
    Some((modulus / denom).ln().min(0.0))
}

/// Per-leaf factor evaluation at the point `z^{T(m)}` computed through
/// `T(m) mod den` so the true period never has to be representable.
pub(crate) fn accumulate_log_modulus(spec: &FamilySpec, m: u32, z: &RationalAngle, acc: &mut LogAcc) {
    if acc.exact_zero {
        return;
    }
    match spec {
        FamilySpec::Divisible { gen, scale, r } => {
            let zm = z.times_mod(scale.t_mod(m, z.den()));
            if zm.is_zero() {
                return;
            }
            acc.push(poisson_factor_log(gen.h(m), r, &zm));
        }
        FamilySpec::Rational { gen, scale, r } => {
            let zm = z.times_mod(scale.t_mod(m, z.den()));
            if zm.is_zero() {
                return;
            }
            match ratio_factor_log(gen.h(m), r, &zm) {
                Some(v) => acc.push(v),
                None => acc.exact_zero = true,
            }
        }
        FamilySpec::Explicit { gens, scale } => {
            let zm = z.times_mod(scale.t_mod(m, z.den()));
            if zm.is_zero() {
                return;
            }
            let g = &gens[(m as usize - 1) % gens.len()];
            match ratio_factor_log(g, &num_traits::One::one(), &zm) {
                Some(v) => acc.push(v),
                None => acc.exact_zero = true,
            }
        }
        FamilySpec::Tensor { left, right } => {
            accumulate_log_modulus(left, m, z, acc);
            accumulate_log_modulus(right, m, z, acc);
        }
        FamilySpec::Telescoped { inner, .. } => {
            let (lo, hi) = (spec.telescope_index(m), spec.telescope_index(m + 1));
            for mm in lo..hi {
                accumulate_log_modulus(inner, mm, z, acc);
            }
        }
    }
}

/// Support points of `h` that fall in `⋃_t (t·n + [n/R, n(1 - 1/R)])`,
/// the exponents whose angles stay bounded away from full turns.
pub fn support_set<C: Coeff>(h: &LaurentPoly<C>, n: u64, big_r: f64) -> std::collections::BTreeSet<i64> {
    assert!(n >= 2, "support window needs n >= 2");
    assert!(big_r > 1.0, "support window needs R > 1");
    let nf = n as f64;
    h.iter()
        .map(|(e, _)| *e)
        .filter(|e| {
            let s = e.rem_euclid(n as i64) as f64;
            s * big_r >= nf && s * big_r <= nf * (big_r - 1.0)
        })
        .collect()
}

/// Coefficient mass of a unit-mass `h` over [`support_set`].
pub fn mass_u<C: Coeff>(h: &LaurentPoly<C>, n: u64, big_r: f64) -> C {
    assert!(h.is_nonnegative(), "mass fraction needs nonnegative coefficients");
    let set = support_set(h, n, big_r);
    let total = h.mass();
    let inside = h
        .iter()
        .filter(|(e, _)| set.contains(e))
        .fold(C::zero(), |acc, (_, c)| acc.add(c));
    inside.div(&total)
}
