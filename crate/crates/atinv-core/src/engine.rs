//! Evaluation invariants: limits of `|P_l(w_k) ⋯ P_{l+d}(w_k)|`, the infimum
//! over the witness index `k`, and the limit over the start index `l`, all
//! with certified lower/upper brackets.
//!
//! The only uncertified limit in the definition is the `d → ∞` product; for
//! root-of-unity witnesses whose denominator divides a later period the
//! product becomes exactly finite, and the engine detects that divisibility
//! instead of truncating blindly. The `k`-infimum is bracketed by a sampled
//! window plus a geometric tail certificate where second moments provide
//! one, and honestly flagged where they do not.
//!
//! Witnesses tied to the scale products are evaluated through period ratios
//! `T(k)/T(m)`, so a window never needs `T(k)` itself to be representable.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::{
    poisson_factor_log, ratio_factor_log, FamilySpec, GeneratorRule, LogAcc, ScaleRule,
};
use crate::laurent::{rat_pow, ExactPoly, RationalAngle};

const TAU: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;

/// Rule generating the witness sequence `(w_k)` of circle points.
#[derive(Clone, Debug, PartialEq)]
pub enum WitnessRule {
    /// `w_k` of angle `1/T(k)`.
    Canonical,
    /// `w_k` of angle `1/(j·T(k))`.
    Scaled { j: u64 },
    /// `w_k` of angle `1/n(k+1)`.
    NextScale,
    /// An explicit list, `w_k = angles[k-1]`.
    Explicit(Vec<RationalAngle>),
}

impl WitnessRule {
    /// Resolve the angle of `w_k` against the family's scale rule. Fails
    /// when the denominator leaves the representable range; the engine's
    /// internal evaluation avoids that through period ratios.
    pub fn angle(&self, spec: &FamilySpec, k: u32) -> Result<RationalAngle> {
        match self {
            Self::Canonical => {
                let t = spec.scale_rule()?.t(k).map_err(|_| Error::WitnessOverflow { k })?;
                Ok(RationalAngle::unit_fraction(t as u64))
            }
            Self::Scaled { j } => {
                let t = spec.scale_rule()?.t(k).map_err(|_| Error::WitnessOverflow { k })?;
                let den = (t as u64)
                    .checked_mul(*j)
                    .filter(|&d| d <= RationalAngle::MAX_DEN)
                    .ok_or(Error::WitnessOverflow { k })?;
                Ok(RationalAngle::unit_fraction(den))
            }
            Self::NextScale => Ok(RationalAngle::unit_fraction(spec.scale_rule()?.n(k + 1))),
            Self::Explicit(angles) => {
                angles.get(k as usize - 1).copied().ok_or(Error::WitnessMissing { k })
            }
        }
    }

    fn scale_multiplier(&self) -> Option<u64> {
        match self {
            Self::Canonical => Some(1),
            Self::Scaled { j } => Some(*j),
            _ => None,
        }
    }
}

/// A resolved witness for one `k`: either a concrete circle point, or the
/// scale-tied point `1/(j·T(k))` kept in ratio form.
#[derive(Clone, Copy, Debug)]
enum WitnessPoint {
    Absolute(RationalAngle),
    ScaleTied { k: u32, j: u64 },
}

fn witness_point(witness: &WitnessRule, spec: &FamilySpec, k: u32) -> Result<WitnessPoint> {
    match witness {
        WitnessRule::Canonical => {
            spec.scale_rule()?;
            Ok(WitnessPoint::ScaleTied { k, j: 1 })
        }
        WitnessRule::Scaled { j } => {
            if *j == 0 {
                return Err(Error::InvalidRule("witness multiplier must be positive".into()));
            }
            spec.scale_rule()?;
            Ok(WitnessPoint::ScaleTied { k, j: *j })
        }
        WitnessRule::NextScale => Ok(WitnessPoint::Absolute(RationalAngle::unit_fraction(
            spec.scale_rule()?.n(k + 1),
        ))),
        WitnessRule::Explicit(angles) => angles
            .get(k as usize - 1)
            .copied()
            .map(WitnessPoint::Absolute)
            .ok_or(Error::WitnessMissing { k }),
    }
}

/// The point `w^{T(m)}` for one leaf: exactly 1, provably within `2^-60` of
/// it, or a concrete angle.
enum LeafPoint {
    One,
    Negligible,
    At(RationalAngle),
}

fn leaf_point(scale: &ScaleRule, m: u32, wp: &WitnessPoint) -> LeafPoint {
    match wp {
        WitnessPoint::Absolute(w) => {
            let zm = w.times_mod(scale.t_mod(m, w.den()));
            if zm.is_zero() {
                LeafPoint::One
            } else {
                LeafPoint::At(zm)
            }
        }
        WitnessPoint::ScaleTied { k, j } => {
            if m <= *k {
                // angle 1/(j·n(m+1)⋯n(k)); beyond the representable range the
                // factor is within 2^-60 of a full turn divisor of it.
                let mut den: u64 = *j;
                for i in (m + 1)..=*k {
                    den = match den.checked_mul(scale.n(i)) {
                        Some(v) if v <= RationalAngle::MAX_DEN => v,
                        _ => return LeafPoint::Negligible,
                    };
                }
                if den == 1 {
                    LeafPoint::One
                } else {
                    LeafPoint::At(RationalAngle::unit_fraction(den))
                }
            } else {
                // angle (n(k+1)⋯n(m) mod j)/j
                let mut num: u64 = 1 % *j;
                for i in (*k + 1)..=m {
                    num = ((num as u128 * (scale.n(i) % *j) as u128) % *j as u128) as u64;
                }
                if num == 0 {
                    LeafPoint::One
                } else {
                    LeafPoint::At(RationalAngle::new(num as i64, *j as i64))
                }
            }
        }
    }
}

/// True once every factor from term `m` on is exactly 1 at the witness
/// point: each leaf's point is exactly 1 there, which persists for later
/// terms because their periods are multiples, or the leaf only ever
/// produces unimodular factors.
fn terminated_from(spec: &FamilySpec, m: u32, wp: &WitnessPoint) -> bool {
    match spec {
        FamilySpec::Divisible { gen, scale, .. } => {
            gen.occurring_from(m).iter().all(|h| h.support_len() == 0)
                || matches!(leaf_point(scale, m, wp), LeafPoint::One)
        }
        FamilySpec::Rational { gen, scale, .. } => {
            gen.occurring_from(m).iter().all(|h| h.support_len() <= 1)
                || matches!(leaf_point(scale, m, wp), LeafPoint::One)
        }
        FamilySpec::Explicit { gens, scale } => {
            gens.iter().all(|g| g.support_len() <= 1)
                || matches!(leaf_point(scale, m, wp), LeafPoint::One)
        }
        FamilySpec::Tensor { left, right } => {
            terminated_from(left, m, wp) && terminated_from(right, m, wp)
        }
        FamilySpec::Telescoped { inner, .. } => terminated_from(inner, spec.telescope_index(m), wp),
    }
}

/// Squared angle of the smallest unrepresentable denominator: a factor at a
/// finer point than that differs from 1 by at most the leaf's second-moment
/// or variance coefficient times this.
const NEGLIGIBLE_ANGLE_SQ: f64 = (TAU / RationalAngle::MAX_DEN as f64) * (TAU / RationalAngle::MAX_DEN as f64);

fn accumulate_factor(spec: &FamilySpec, m: u32, wp: &WitnessPoint, acc: &mut LogAcc) {
    if acc.exact_zero {
        return;
    }
    match spec {
        FamilySpec::Divisible { gen, scale, r } => match leaf_point(scale, m, wp) {
            LeafPoint::One => {}
            LeafPoint::Negligible => {
                let mu2 = gen.h(m).normalized().moment(2).to_f64().unwrap_or(f64::INFINITY);
                acc.push_negligible(r.to_f64().unwrap() * mu2 * 0.5 * NEGLIGIBLE_ANGLE_SQ);
            }
            LeafPoint::At(z) => acc.push(poisson_factor_log(gen.h(m), r, &z)),
        },
        FamilySpec::Rational { gen, scale, r } => match leaf_point(scale, m, wp) {
            LeafPoint::One => {}
            LeafPoint::Negligible => {
                acc.push_negligible(ratio_variance(gen.h(m), r) * NEGLIGIBLE_ANGLE_SQ);
            }
            LeafPoint::At(z) => match ratio_factor_log(gen.h(m), r, &z) {
                Some(v) => acc.push(v),
                None => acc.exact_zero = true,
            },
        },
        FamilySpec::Explicit { gens, scale } => match leaf_point(scale, m, wp) {
            LeafPoint::One => {}
            LeafPoint::Negligible => {
                let g = &gens[(m as usize - 1) % gens.len()];
                acc.push_negligible(ratio_variance(g, &num_traits::One::one()) * NEGLIGIBLE_ANGLE_SQ);
            }
            LeafPoint::At(z) => {
                let g = &gens[(m as usize - 1) % gens.len()];
                match ratio_factor_log(g, &num_traits::One::one(), &z) {
                    Some(v) => acc.push(v),
                    None => acc.exact_zero = true,
                }
            }
        },
        FamilySpec::Tensor { left, right } => {
            accumulate_factor(left, m, wp, acc);
            accumulate_factor(right, m, wp, acc);
        }
        FamilySpec::Telescoped { inner, .. } => {
            let (lo, hi) = (spec.telescope_index(m), spec.telescope_index(m + 1));
            for mm in lo..hi {
                accumulate_factor(inner, mm, wp, acc);
            }
        }
    }
}

/// Source of the tail certificate attached to a bracket.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    /// No certificate: the lower bound is trivial.
    #[default]
    None,
    /// The product is exactly finite (all later factors are 1).
    Exact,
    /// Geometric tail from second moments of the exponent polynomials.
    SecondMomentGeometric,
    /// Geometric tail from variances of the scaled generators.
    VarianceGeometric,
    /// Far-window bound for strictly growing scales.
    FarWindow,
    /// Bracket carried by exact rational arithmetic.
    ExactRational,
}

/// Diagnostic flags carried by a certified value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// A factor vanished in exact arithmetic; the value is exactly zero.
    ExactZero,
    /// The defining product never became exactly finite within the depth cap.
    NonTerminating,
    /// No tail certificate applies; the lower bound is trivial.
    NoTailCertificate,
    /// The level values are structurally independent of the start index.
    ConstantInLevel,
    /// Consecutive level values agreed within the stabilization tolerance.
    Stabilized,
    /// The witness window stopped early (angle unavailable).
    WindowTruncated,
    /// A floating factor underflowed without an exact-zero certificate.
    UnderflowClamped,
}

/// Truncation metadata for a certified value.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ValueMeta {
    pub k_used: Option<u32>,
    pub l_used: Option<u32>,
    pub d_used: Option<u32>,
    pub tail: TailKind,
    pub flags: BTreeSet<Flag>,
}

/// A computed number together with a rigorous enclosing bracket.
#[derive(Clone, Debug, Serialize)]
pub struct CertifiedValue {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub meta: ValueMeta,
}

impl CertifiedValue {
    pub fn exact_zero(mut meta: ValueMeta) -> Self {
        meta.flags.insert(Flag::ExactZero);
        if meta.tail == TailKind::None {
            meta.tail = TailKind::Exact;
        }
        Self { value: 0.0, lower: 0.0, upper: 0.0, meta }
    }

    fn from_log(log: f64, err: f64, meta: ValueMeta) -> Self {
        let value = log.exp().min(1.0);
        Self { value, lower: (log - err).exp().min(value), upper: (log + err).exp().min(1.0), meta }
    }

    /// Bracket around an exact rational in `[0, 1]`, widened enough to
    /// absorb the binary conversion.
    pub fn from_exact_rational(q: &BigRational, meta: ValueMeta) -> Self {
        let v = q.to_f64().unwrap_or(0.0);
        let slack = v.abs() * 1e-15 + f64::MIN_POSITIVE;
        Self { value: v, lower: (v - slack).max(0.0), upper: (v + slack).min(1.0), meta }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn is_exact_zero(&self) -> bool {
        self.meta.flags.contains(&Flag::ExactZero)
    }

    /// Bracket of the `r`-th power, with `0^r = 0`.
    pub fn powf(&self, r: f64) -> (f64, f64) {
        assert!(r > 0.0);
        let p = |x: f64| if x == 0.0 { 0.0 } else { x.powf(r) };
        (p(self.lower), p(self.upper))
    }
}

/// Stopping parameters for the invariant computations.
#[derive(Clone, Copy, Debug)]
pub struct EngineOptions {
    /// Largest witness index sampled for the `k`-infimum.
    pub k_max: u32,
    /// Largest start index for the level limit.
    pub l_max: u32,
    /// Depth cap for products that never become exactly finite.
    pub d_max: u32,
    /// l¹ budget for compound-Poisson term materialization.
    pub exp_tol: f64,
    /// Materialized support cap.
    pub cap: usize,
    /// Agreement threshold declaring the level sequence stabilized.
    pub stabilization_eps: f64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            k_max: 64,
            l_max: 32,
            d_max: 512,
            exp_tol: 1e-12,
            cap: crate::families::DEFAULT_MATERIALIZE_CAP,
            stabilization_eps: 1e-9,
        }
    }
}

struct PartialOutcome {
    cv: CertifiedValue,
    terminated: bool,
}

fn partial_outcome(
    spec: &FamilySpec,
    wp: &WitnessPoint,
    k: u32,
    l: u32,
    opts: &EngineOptions,
) -> PartialOutcome {
    let mut acc = LogAcc::new();
    let mut m = l;
    let mut terminated = false;
    while m - l < opts.d_max {
        if terminated_from(spec, m, wp) {
            terminated = true;
            break;
        }
        accumulate_factor(spec, m, wp, &mut acc);
        if acc.exact_zero {
            let meta = ValueMeta {
                k_used: Some(k),
                l_used: Some(l),
                d_used: Some(m - l + 1),
                tail: TailKind::Exact,
                flags: BTreeSet::new(),
            };
            return PartialOutcome { cv: CertifiedValue::exact_zero(meta), terminated: true };
        }
        m += 1;
    }
    let mut meta = ValueMeta {
        k_used: Some(k),
        l_used: Some(l),
        d_used: Some(m - l),
        tail: if terminated { TailKind::Exact } else { TailKind::None },
        flags: BTreeSet::new(),
    };
    let cv = if terminated {
        CertifiedValue::from_log(acc.log, acc.err, meta)
    } else {
        meta.flags.insert(Flag::NonTerminating);
        meta.flags.insert(Flag::NoTailCertificate);
        let value = acc.log.exp().min(1.0);
        CertifiedValue { value, lower: 0.0, upper: (acc.log + acc.err).exp().min(1.0), meta }
    };
    PartialOutcome { cv, terminated }
}

/// `S_{k,l}`: the limiting modulus of `∏_{m=l}^{l+d} P_m(w_k)` as `d → ∞`.
///
/// When the witness angle denominator divides the period from some term on,
/// the limit is an exactly finite product and the bracket is tight up to
/// floating error. Otherwise the partial products are nonincreasing, the
/// depth-capped value is an upper bound, and the result is flagged.
pub fn partial_modulus(
    spec: &FamilySpec,
    witness: &WitnessRule,
    k: u32,
    l: u32,
    opts: &EngineOptions,
) -> Result<CertifiedValue> {
    assert!(k >= 1 && l >= 1, "indices start at 1");
    let wp = witness_point(witness, spec, k)?;
    Ok(partial_outcome(spec, &wp, k, l, opts).cv)
}

enum TailLeaf {
    Div { r: f64, mu2: f64 },
    Ratio { v: f64 },
}

fn ratio_variance(h: &ExactPoly, r: &BigRational) -> f64 {
    let hr = ExactPoly::from_pairs(h.iter().map(|(e, c)| (*e, c * rat_pow(r, *e))));
    hr.normalized().variance().to_f64().unwrap_or(f64::INFINITY)
}

fn collect_tail_leaves(spec: &FamilySpec, m_start: u32, out: &mut Vec<TailLeaf>) {
    match spec {
        FamilySpec::Divisible { gen, r, .. } => {
            let mu2 = gen
                .occurring_from(m_start)
                .iter()
                .map(|h| h.normalized().moment(2).to_f64().unwrap_or(f64::INFINITY))
                .fold(0.0f64, f64::max);
            out.push(TailLeaf::Div { r: r.to_f64().unwrap(), mu2 });
        }
        FamilySpec::Rational { gen, r, .. } => {
            let v = gen.occurring_from(m_start).iter().map(|h| ratio_variance(h, r)).fold(0.0f64, f64::max);
            out.push(TailLeaf::Ratio { v });
        }
        FamilySpec::Explicit { gens, .. } => {
            let one = num_traits::One::one();
            let v = gens.iter().map(|g| ratio_variance(g, &one)).fold(0.0f64, f64::max);
            out.push(TailLeaf::Ratio { v });
        }
        FamilySpec::Tensor { left, right } => {
            collect_tail_leaves(left, m_start, out);
            collect_tail_leaves(right, m_start, out);
        }
        FamilySpec::Telescoped { inner, .. } => collect_tail_leaves(inner, m_start, out),
    }
}

/// First base index covered by spec-level index `l` (telescoping expanded).
fn base_start(spec: &FamilySpec, l: u32) -> u32 {
    match spec {
        FamilySpec::Telescoped { inner, .. } => base_start(inner, spec.telescope_index(l)),
        _ => l,
    }
}

/// Upper bound on `-ln ∏_{t > depth} factor_t` for a constant scale `n` and
/// witness denominator multiplier `j`, or `None` when the variance bound is
/// not yet contractive at this depth.
fn const_scale_tail(spec: &FamilySpec, m_start: u32, depth: u32, n: u64, j: u64) -> Option<f64> {
    let mut leaves = Vec::new();
    collect_tail_leaves(spec, m_start, &mut leaves);
    let nf = n as f64;
    let jf = j as f64;
    let geom = 1.0 / (1.0 - 1.0 / (nf * nf));
    let denom = jf * nf.powi(depth as i32 + 1);
    let next_angle_sq = if denom.is_finite() { (TAU / denom).powi(2) } else { 0.0 };
    let mut total = 0.0;
    for leaf in &leaves {
        match leaf {
            TailLeaf::Div { r, mu2 } => total += r * mu2 * 0.5 * next_angle_sq * geom,
            TailLeaf::Ratio { v } => {
                let u = v * next_angle_sq;
                if u >= 0.5 {
                    return None;
                }
                total += 0.5 * u / (1.0 - u) * geom;
            }
        }
    }
    Some(total * (1.0 + 1e-9) + 1e-300)
}

/// Product over all depths of the worst factor any occurring generator can
/// contribute at that depth: a `k`-independent floor for constant scales.
fn const_scale_floor(spec: &FamilySpec, m_start: u32, n: u64, j: u64) -> Option<f64> {
    let mut log = 0.0f64;
    let mut err = 0.0f64;
    if j > 1 {
        // Factors beyond the witness index: angles (n^s mod j)/j until they
        // vanish; witnesses that terminate reach zero within the modulus.
        let mut num = 1 % j;
        let mut steps = 0;
        while num != 0 {
            let z = RationalAngle::new(num as i64, j as i64);
            let f = floor_factor_log(spec, m_start, &z)?;
            log += f;
            err += (f.abs() + 1.0) * 4e-15;
            num = ((num as u128 * (n % j) as u128) % j as u128) as u64;
            steps += 1;
            if steps > 256 {
                return None;
            }
        }
    }
    let mut t = 0u32;
    loop {
        t += 1;
        let den = (j as u128) * (n as u128).saturating_pow(t);
        if den > RationalAngle::MAX_DEN as u128 {
            break;
        }
        let f = floor_factor_log(spec, m_start, &RationalAngle::unit_fraction(den as u64))?;
        log += f;
        err += (f.abs() + 1.0) * 4e-15;
        if let Some(tail) = const_scale_tail(spec, m_start, t, n, j) {
            if tail < 1e-16 {
                return Some((log - tail - err).exp());
            }
        }
    }
    let tail = const_scale_tail(spec, m_start, t, n, j)?;
    Some((log - tail - err).exp())
}

/// Worst-case factor log at a fixed point over every generator that can
/// occur from `m_start` on; `None` when some generator vanishes there.
fn floor_factor_log(spec: &FamilySpec, m_start: u32, z: &RationalAngle) -> Option<f64> {
    match spec {
        FamilySpec::Divisible { gen, r, .. } => Some(
            gen.occurring_from(m_start)
                .iter()
                .map(|h| poisson_factor_log(h, r, z))
                .fold(0.0f64, f64::min),
        ),
        FamilySpec::Rational { gen, r, .. } => {
            let mut lo = 0.0f64;
            for h in gen.occurring_from(m_start) {
                lo = lo.min(ratio_factor_log(h, r, z)?);
            }
            Some(lo)
        }
        FamilySpec::Explicit { gens, .. } => {
            let one: BigRational = num_traits::One::one();
            let mut lo = 0.0f64;
            for g in gens {
                lo = lo.min(ratio_factor_log(g, &one, z)?);
            }
            Some(lo)
        }
        FamilySpec::Tensor { left, right } => {
            Some(floor_factor_log(left, m_start, z)? + floor_factor_log(right, m_start, z)?)
        }
        FamilySpec::Telescoped { inner, .. } => floor_factor_log(inner, m_start, z),
    }
}

/// Far-window bound for strictly growing scales: every `S_{k,l}` with
/// `k` beyond the window satisfies `Σ (T(m)/T(k))² ≤ (4/3)/n(k_max+1)²`.
fn increasing_scale_floor(spec: &FamilySpec, m_start: u32, rule: &ScaleRule, k_max: u32) -> Option<f64> {
    let n1 = rule.n(k_max + 1) as f64;
    let sum_sq = (TAU / n1).powi(2) * (4.0 / 3.0);
    let mut leaves = Vec::new();
    collect_tail_leaves(spec, m_start, &mut leaves);
    let mut log = 0.0;
    for leaf in &leaves {
        match leaf {
            TailLeaf::Div { r, mu2 } => log -= r * mu2 * 0.5 * sum_sq,
            TailLeaf::Ratio { v } => {
                let u = v * sum_sq;
                if u >= 1.0 {
                    return None;
                }
                log += 0.5 * (1.0 - u).ln();
            }
        }
    }
    Some(log.exp() * (1.0 - 1e-12))
}

fn any_divisible_leaf(spec: &FamilySpec) -> bool {
    match spec {
        FamilySpec::Divisible { .. } => true,
        FamilySpec::Rational { .. } | FamilySpec::Explicit { .. } => false,
        FamilySpec::Tensor { left, right } => any_divisible_leaf(left) || any_divisible_leaf(right),
        FamilySpec::Telescoped { inner, .. } => any_divisible_leaf(inner),
    }
}

/// `S_l = inf_k S_{k,l}`, bracketed by the sampled window plus a tail
/// certificate where the family structure provides one.
pub fn level_infimum(
    spec: &FamilySpec,
    witness: &WitnessRule,
    l: u32,
    opts: &EngineOptions,
) -> Result<CertifiedValue> {
    assert!(l >= 1, "level index starts at 1");
    let mut window: Vec<(u32, PartialOutcome)> = Vec::new();
    let mut truncated = false;
    for k in (l + 1)..=opts.k_max.max(l + 1) {
        match witness_point(witness, spec, k) {
            Ok(wp) => window.push((k, partial_outcome(spec, &wp, k, l, opts))),
            Err(Error::WitnessOverflow { .. }) | Err(Error::WitnessMissing { .. }) => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let mut meta = ValueMeta { l_used: Some(l), ..ValueMeta::default() };
    if truncated {
        meta.flags.insert(Flag::WindowTruncated);
    }
    if window.is_empty() {
        meta.flags.insert(Flag::NoTailCertificate);
        return Ok(CertifiedValue { value: 1.0, lower: 0.0, upper: 1.0, meta });
    }

    if let Some((k, out)) = window.iter().find(|(_, o)| o.cv.is_exact_zero()) {
        meta.k_used = Some(*k);
        meta.d_used = out.cv.meta.d_used;
        return Ok(CertifiedValue::exact_zero(meta));
    }

    let all_terminated = window.iter().all(|(_, o)| o.terminated);
    let (k_at, best) = window
        .iter()
        .min_by(|a, b| a.1.cv.value.partial_cmp(&b.1.cv.value).unwrap())
        .map(|(k, o)| (*k, &o.cv))
        .unwrap();
    let value = best.value;
    let upper = window.iter().map(|(_, o)| o.cv.upper).fold(1.0f64, f64::min);
    meta.k_used = Some(k_at);
    meta.d_used = best.meta.d_used;
    let window_low = window.iter().map(|(_, o)| o.cv.lower).fold(1.0f64, f64::min);

    let m_start = base_start(spec, l);
    let shared_n = spec.scale_rule().ok().and_then(|r| r.constant_value());
    let jmul = witness.scale_multiplier();

    let mut lower = None;
    if all_terminated && !truncated {
        if let (Some(n), Some(j)) = (shared_n, jmul) {
            // Along each residue class of k the partial values only lose
            // factors as k grows, so each class limit sits between its last
            // sampled value and that value shrunk by the geometric tail.
            if let Some(period) = spec.gen_period().map(|p| p.max(1) as u32) {
                if (opts.k_max - l) >= period {
                    let mut class_lows: Vec<f64> = Vec::new();
                    let mut seen = BTreeSet::new();
                    for (k, out) in window.iter().rev() {
                        if seen.insert(k % period) {
                            match const_scale_tail(spec, m_start, k - m_start, n, j) {
                                Some(tail) => class_lows.push(out.cv.lower * (-tail).exp()),
                                None => {
                                    class_lows.clear();
                                    break;
                                }
                            }
                            if seen.len() as u32 == period {
                                break;
                            }
                        }
                    }
                    if class_lows.len() as u32 == period {
                        let class_low = class_lows.iter().fold(1.0f64, |a, &b| a.min(b));
                        lower = Some(window_low.min(class_low));
                    }
                }
            }
            if lower.is_none() {
                // Aperiodic generators: fall back to the k-independent floor.
                lower = const_scale_floor(spec, m_start, n, j).map(|f| window_low.min(f));
            }
            if lower.is_some() {
                meta.tail = if any_divisible_leaf(spec) {
                    TailKind::SecondMomentGeometric
                } else {
                    TailKind::VarianceGeometric
                };
            }
        }
        // The far-window bound covers only the factors below the witness
        // index, which is every factor solely for the canonical witness.
        if lower.is_none() && jmul == Some(1) {
            if let Ok(rule) = spec.scale_rule() {
                if rule.is_increasing() {
                    if let Some(far) = increasing_scale_floor(spec, m_start, rule, opts.k_max) {
                        lower = Some(window_low.min(far));
                        meta.tail = TailKind::FarWindow;
                    }
                }
            }
        }
    } else if !all_terminated {
        meta.flags.insert(Flag::NonTerminating);
    }

    let lower = match lower {
        Some(v) => v.max(0.0),
        None => {
            meta.flags.insert(Flag::NoTailCertificate);
            0.0
        }
    };

    Ok(CertifiedValue { value, lower: lower.min(value), upper: upper.max(lower), meta })
}

fn scaled_witness_terminates(j: u64, n: u64) -> bool {
    if j == 1 {
        return true;
    }
    let mut pow = 1u64 % j;
    for _ in 0..128 {
        if pow == 0 {
            return true;
        }
        pow = ((pow as u128 * (n % j) as u128) % j as u128) as u64;
    }
    false
}

/// Whether `S_l` is structurally independent of `l`: constant shared scale,
/// purely periodic generators, and a witness whose products terminate.
fn constant_level(spec: &FamilySpec, witness: &WitnessRule) -> bool {
    let Some(n) = spec.scale_rule().ok().and_then(|r| r.constant_value()) else {
        return false;
    };
    let Some(j) = witness.scale_multiplier() else {
        return false;
    };
    scaled_witness_terminates(j, n) && spec.gen_period().is_some()
}

/// The evaluation invariant `lim_l S_l`.
///
/// The level sequence is nondecreasing, so the last level certifies the
/// lower bound. The upper bound is exact when the levels are structurally
/// constant in `l`; otherwise it stays at the trivial 1 and stabilization of
/// the observed sequence is reported as a diagnostic only.
pub fn invariant(spec: &FamilySpec, witness: &WitnessRule, opts: &EngineOptions) -> Result<CertifiedValue> {
    if constant_level(spec, witness) {
        let mut cv = level_infimum(spec, witness, 1, opts)?;
        cv.meta.flags.insert(Flag::ConstantInLevel);
        return Ok(cv);
    }
    let mut series = Vec::with_capacity(opts.l_max as usize);
    for l in 1..=opts.l_max.max(1) {
        series.push(level_infimum(spec, witness, l, opts)?);
    }
    let last = series.last().unwrap();
    let stabilized = series.len() >= 3 && {
        let v: Vec<f64> = series.iter().rev().take(3).map(|c| c.value).collect();
        (v[0] - v[1]).abs() <= opts.stabilization_eps && (v[1] - v[2]).abs() <= opts.stabilization_eps
    };
    let mut meta = last.meta.clone();
    meta.l_used = Some(series.len() as u32);
    meta.flags.remove(&Flag::ExactZero);
    if stabilized {
        meta.flags.insert(Flag::Stabilized);
    } else {
        meta.flags.insert(Flag::NoTailCertificate);
    }
    Ok(CertifiedValue { value: last.value, lower: last.lower, upper: 1.0, meta })
}

/// `exp(-Σ_{t≥1} Re(1 - h(e^{2πi/nᵗ})))` for a constant generator and scale:
/// the closed form of the invariant at parameter 1, with the partial sum
/// certified by the geometric second-moment tail. Panics if the bracket
/// fails to sit strictly inside (0, 1).
pub fn closed_form_divisible(h: &ExactPoly, n: u64, tol: f64) -> CertifiedValue {
    assert!(n >= 2, "scale must be at least 2");
    assert!(h.is_nonnegative(), "generator needs nonnegative coefficients");
    let hn = h.normalized();
    let coeffs: Vec<(f64, f64)> = hn.iter().map(|(e, c)| (*e as f64, c.to_f64().unwrap())).collect();
    let mu2 = hn.moment(2).to_f64().unwrap();
    let nf = n as f64;
    let geom = 1.0 / (1.0 - 1.0 / (nf * nf));
    let mut sum = 0.0f64;
    let mut err = 0.0f64;
    let mut tail = f64::INFINITY;
    for t in 1..=300u32 {
        let theta = TAU / nf.powi(t as i32);
        let re: f64 = coeffs.iter().map(|(jj, a)| a * (jj * theta).cos()).sum();
        let term = (1.0 - re).max(0.0);
        sum += term;
        err += term * 1e-14 + 1e-17;
        tail = 2.0 * mu2 * PI * PI / nf.powi(2 * (t as i32 + 1)) * geom;
        if tail < tol.min(1e-15) * sum.max(1e-3) {
            break;
        }
    }
    let meta = ValueMeta { tail: TailKind::SecondMomentGeometric, ..ValueMeta::default() };
    let cv = CertifiedValue {
        value: (-sum).exp(),
        lower: (-sum - tail - err).exp(),
        upper: (-sum + err).exp(),
        meta,
    };
    assert!(
        cv.lower > 0.0 && cv.upper < 1.0,
        "closed form did not certify a value strictly inside (0,1): {cv:?}"
    );
    cv
}

/// `∏_{t≥1} |h(r·e^{2πi/nᵗ})| / h(r)` for a constant generator and scale,
/// with the tail certified through the variance of the scaled generator.
/// The value is exactly zero iff some factor vanishes in exact arithmetic.
pub fn closed_form_rational(h: &ExactPoly, n: u64, r: &BigRational, tol: f64) -> CertifiedValue {
    assert!(n >= 2, "scale must be at least 2");
    assert!(h.is_nonnegative(), "generator needs nonnegative coefficients");
    assert!(num_traits::Signed::is_positive(r), "parameter r must be positive");
    // Exact zero factors can only arise while n^t is a small cyclotomic
    // denominator; scan those exactly.
    let mut den = 1u64;
    loop {
        den = den.saturating_mul(n);
        if den > 6 {
            break;
        }
        if crate::laurent::exact_zero_at(h, r, &RationalAngle::unit_fraction(den)) == Some(true) {
            let meta = ValueMeta { tail: TailKind::Exact, ..ValueMeta::default() };
            return CertifiedValue::exact_zero(meta);
        }
    }
    let rf = r.to_f64().unwrap();
    let weights: Vec<(f64, f64)> =
        h.iter().map(|(e, c)| (*e as f64, c.to_f64().unwrap() * rf.powi(*e as i32))).collect();
    let denom: f64 = weights.iter().map(|(_, w)| w).sum();
    let v = ratio_variance(h, r);
    let nf = n as f64;
    let geom = 1.0 / (1.0 - 1.0 / (nf * nf));
    let mut log = 0.0f64;
    let mut err = 0.0f64;
    let mut tail = f64::INFINITY;
    for t in 1..=300u32 {
        let theta = TAU / nf.powi(t as i32);
        let re: f64 = weights.iter().map(|(jj, w)| w * (jj * theta).cos()).sum();
        let im: f64 = weights.iter().map(|(jj, w)| w * (jj * theta).sin()).sum();
        let modulus = re.hypot(im) / denom;
        if modulus == 0.0 {
            // Vanishing without an exact certificate: honest near-zero bracket.
            let mut meta = ValueMeta::default();
            meta.flags.insert(Flag::UnderflowClamped);
            return CertifiedValue { value: 0.0, lower: 0.0, upper: 1e-300, meta };
        }
        let f = modulus.ln().min(0.0);
        log += f;
        err += (f.abs() + 1.0) * 4e-15;
        let u = v * (TAU / nf.powi(t as i32 + 1)).powi(2);
        if u < 0.5 {
            tail = 0.5 * u / (1.0 - u) * geom;
            if tail < tol.min(1e-15) {
                break;
            }
        }
    }
    let meta = ValueMeta { tail: TailKind::VarianceGeometric, ..ValueMeta::default() };
    CertifiedValue {
        value: log.exp(),
        lower: (log - tail - err).exp().min(1.0),
        upper: (log + err).exp().min(1.0),
        meta,
    }
}

/// One row of the parameter power-law comparison.
#[derive(Clone, Debug, Serialize)]
pub struct PowerLawEntry {
    pub r: f64,
    pub computed: CertifiedValue,
    pub predicted_lower: f64,
    pub predicted_upper: f64,
    pub consistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PowerLawReport {
    pub base: CertifiedValue,
    pub entries: Vec<PowerLawEntry>,
    pub all_consistent: bool,
}

/// For compound-Poisson families the parameter acts as an exponent on the
/// invariant; compare computed values against powers of the base value.
pub fn power_law_check(
    gen: &GeneratorRule,
    scale: &ScaleRule,
    witness: &WitnessRule,
    r_list: &[BigRational],
    opts: &EngineOptions,
) -> Result<PowerLawReport> {
    let one = num_traits::One::one();
    let base_spec = FamilySpec::divisible(gen.clone(), scale.clone(), one)?;
    let base = invariant(&base_spec, witness, opts)?;
    let mut entries = Vec::new();
    for r in r_list {
        let spec = FamilySpec::divisible(gen.clone(), scale.clone(), r.clone())?;
        let computed = invariant(&spec, witness, opts)?;
        let rf = r.to_f64().unwrap();
        let (plo, phi) = base.powf(rf);
        let consistent = computed.lower <= phi && plo <= computed.upper;
        entries.push(PowerLawEntry {
            r: rf,
            computed,
            predicted_lower: plo,
            predicted_upper: phi,
            consistent,
        });
    }
    let all_consistent = entries.iter().all(|e| e.consistent);
    Ok(PowerLawReport { base, entries, all_consistent })
}

fn mu2_of(gen: &GeneratorRule, k: u32) -> f64 {
    gen.h(k).normalized().moment(2).to_f64().unwrap()
}

/// Estimate of a limit superior over a sampled window: the maximum over the
/// window's upper half. Diagnostic, not a proof.
fn tail_half_max(series: &[f64]) -> f64 {
    let start = series.len() / 2;
    series[start..].iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

fn tail_half_min(series: &[f64]) -> f64 {
    let start = series.len() / 2;
    series[start..].iter().fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Lower-bound diagnostic from second-moment ratios: when the sampled ratio
/// `μ₂(h_{k-1})/(μ₂(h_k)n(k)²)` stays below 1 and `μ₂(h_{k-1})/(n(k)²n(k-1)²)`
/// stays bounded, the invariant is at least
/// `exp(-limsup Re(1 - h_k(e^{2πi/n(k+1)}))) · exp(-Mρ)` with `M = 2π²/(1-C)`.
#[derive(Clone, Debug, Serialize)]
pub struct SecondMomentBoundReport {
    pub c_series: Vec<f64>,
    pub rho_series: Vec<f64>,
    pub first_factor_series: Vec<f64>,
    pub c_estimate: f64,
    pub rho_estimate: f64,
    pub hypothesis_ok: bool,
    pub bound: Option<f64>,
    pub equality_flagged: bool,
}

pub fn second_moment_lower_bound(
    gen: &GeneratorRule,
    scale: &ScaleRule,
    k_range: RangeInclusive<u32>,
) -> SecondMomentBoundReport {
    let ks: Vec<u32> = k_range.filter(|&k| k >= 2).collect();
    assert!(ks.len() >= 4, "need at least four sampled indices");
    let mut c_series = Vec::new();
    let mut rho_series = Vec::new();
    let mut ff_series = Vec::new();
    for &k in &ks {
        let prev = mu2_of(gen, k - 1);
        let cur = mu2_of(gen, k);
        let nk = scale.n(k) as f64;
        let nk1 = scale.n(k - 1) as f64;
        c_series.push(if cur > 0.0 { prev / (cur * nk * nk) } else { f64::INFINITY });
        rho_series.push(prev / (nk * nk * nk1 * nk1));
        let theta = TAU / scale.n(k + 1) as f64;
        let h = gen.h(k).normalized();
        let re: f64 = h.iter().map(|(e, c)| c.to_f64().unwrap() * (*e as f64 * theta).cos()).sum();
        ff_series.push((1.0 - re).max(0.0));
    }
    let c_estimate = tail_half_max(&c_series);
    let rho_estimate = tail_half_max(&rho_series);
    let ff_estimate = tail_half_max(&ff_series);
    let hypothesis_ok = c_estimate < 1.0 && rho_estimate.is_finite();
    let equality_flagged = rho_estimate <= 1e-12;
    let bound = hypothesis_ok.then(|| {
        let m = 2.0 * PI * PI / (1.0 - c_estimate);
        (-ff_estimate).exp() * (-m * rho_estimate).exp()
    });
    SecondMomentBoundReport {
        c_series,
        rho_series,
        first_factor_series: ff_series,
        c_estimate,
        rho_estimate,
        hypothesis_ok,
        bound,
        equality_flagged,
    }
}

/// Upper-bound diagnostic from the support-mass window: with
/// `η = min_k U(h_k, n(k+1), R)` positive, the invariant is at most
/// `exp(-2η sin²(π/R))`.
#[derive(Clone, Debug, Serialize)]
pub struct SupportMassBoundReport {
    pub u_series: Vec<f64>,
    pub eta: f64,
    pub bound: Option<f64>,
}

pub fn support_mass_upper_bound(
    gen: &GeneratorRule,
    scale: &ScaleRule,
    big_r: f64,
    k_range: RangeInclusive<u32>,
) -> SupportMassBoundReport {
    let mut u_series = Vec::new();
    for k in k_range {
        let h = gen.h(k).normalized();
        let u: f64 = crate::families::mass_u(&h, scale.n(k + 1), big_r).to_f64().unwrap();
        u_series.push(u);
    }
    let eta = u_series.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let bound = (eta > 0.0).then(|| {
        let s = (PI / big_r).sin();
        (-2.0 * eta * s * s).exp()
    });
    SupportMassBoundReport { u_series, eta, bound }
}

/// Tensor comparison: the tensor invariant is sandwiched between the
/// pointwise minimum and the product, squares on equal factors, and is
/// absorbed by a factor with invariant 1.
#[derive(Clone, Debug, Serialize)]
pub struct MultiplicativityReport {
    pub left: CertifiedValue,
    pub right: CertifiedValue,
    pub tensor: CertifiedValue,
    pub sandwich_ok: bool,
    pub product_consistent: bool,
    pub square_law: Option<bool>,
    pub absorption: Option<bool>,
    pub zero_consistent: bool,
}

pub fn multiplicativity_report(
    a: &FamilySpec,
    b: &FamilySpec,
    witness: &WitnessRule,
    opts: &EngineOptions,
) -> Result<MultiplicativityReport> {
    let left = invariant(a, witness, opts)?;
    let right = invariant(b, witness, opts)?;
    let tensor_spec = FamilySpec::tensor(a.clone(), b.clone());
    let tensor = invariant(&tensor_spec, witness, opts)?;

    let sandwich_ok =
        left.upper.min(right.upper) >= tensor.lower && tensor.upper >= left.lower * right.lower;
    let product_consistent =
        tensor.lower <= left.upper * right.upper && left.lower * right.lower <= tensor.upper;
    let square_law = (a == b).then(|| {
        let (lo, hi) = (left.lower * left.lower, left.upper * left.upper);
        tensor.lower <= hi && lo <= tensor.upper
    });
    let is_one = |cv: &CertifiedValue| cv.contains(1.0) && cv.width() < 1e-9;
    let absorption = if is_one(&left) {
        Some(tensor.overlaps(&right))
    } else if is_one(&right) {
        Some(tensor.overlaps(&left))
    } else {
        None
    };
    let is_zero = |cv: &CertifiedValue| cv.is_exact_zero() || cv.upper == 0.0;
    let zero_consistent = if left.lower > 0.0 { is_zero(&tensor) == is_zero(&right) } else { true };

    Ok(MultiplicativityReport {
        left,
        right,
        tensor,
        sandwich_ok,
        product_consistent,
        square_law,
        absorption,
        zero_consistent,
    })
}

/// Ratio by which the second half of a sampled series may exceed the first
/// before the O-growth hypothesis is flagged.
const GROWTH_TOLERANCE: f64 = 2.0;

/// Hypothesis check combining the lower and upper bound diagnostics: when
/// the sampled window passes all four conditions, the invariant is certified
/// inside (0, 1) and the one-parameter family is pairwise distinct.
#[derive(Clone, Debug, Serialize)]
pub struct NonisomorphismReport {
    pub mu2_finite: bool,
    pub ratio_ok: bool,
    pub c_estimate: f64,
    pub growth_ok: bool,
    pub growth_ratio: f64,
    pub mass_ok: bool,
    pub eta: f64,
    pub all_pass: bool,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub separated: bool,
}

pub fn nonisomorphism_certificate(
    gen: &GeneratorRule,
    scale: &ScaleRule,
    big_r: f64,
    k_range: RangeInclusive<u32>,
) -> NonisomorphismReport {
    let lowr = second_moment_lower_bound(gen, scale, k_range.clone());
    let upr = support_mass_upper_bound(gen, scale, big_r, k_range);

    let mu2_finite = true; // generators are Laurent polynomials
    let ratio_ok = lowr.c_estimate < 1.0;
    let half = (lowr.rho_series.len() / 2).max(1);
    let first_half_max = lowr.rho_series[..half].iter().fold(1e-300f64, |a, &b| a.max(b));
    let growth_ratio = tail_half_max(&lowr.rho_series) / first_half_max;
    let growth_ok = growth_ratio <= GROWTH_TOLERANCE;
    let eta = tail_half_min(&upr.u_series);
    let mass_ok = eta > 0.0;
    let all_pass = mu2_finite && ratio_ok && growth_ok && mass_ok;

    let (lower, upper, separated) = if all_pass {
        let lo = lowr.bound;
        let s = (PI / big_r).sin();
        let hi = Some((-2.0 * eta * s * s).exp());
        let sep = matches!((lo, hi), (Some(l), Some(h)) if l > 0.0 && h < 1.0);
        (lo, hi, sep)
    } else {
        (None, None, false)
    };

    NonisomorphismReport {
        mu2_finite,
        ratio_ok,
        c_estimate: lowr.c_estimate,
        growth_ok,
        growth_ratio,
        mass_ok,
        eta,
        all_pass,
        lower,
        upper,
        separated,
    }
}
