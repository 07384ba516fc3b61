//! Sparse Laurent polynomials over exact rationals or binary floats, circle
//! points of rational angle, and the moment/distribution helpers the
//! invariant engines are built on.
//!
//! A polynomial is a finite map exponent → coefficient with no stored zeros.
//! The same operations run in both coefficient rings; identities that must
//! hold with zero tolerance (variance forms, dyadic combinatorics) use the
//! exact ring, the infinite-product numerics use `f64`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Coefficient ring: exact rationals or `f64`.
pub trait Coeff: Clone + PartialEq + PartialOrd + fmt::Debug + Send + Sync + 'static {
    /// Exact rings make identity checks meaningful with zero tolerance.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(v: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn is_negative(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    fn to_f64(&self) -> f64;

    /// Slack allowed when checking unit mass `f(1) = 1`.
    fn unit_mass_slack() -> f64 {
        if Self::EXACT {
            0.0
        } else {
            1e-9
        }
    }
}

impl Coeff for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_negative(&self) -> bool {
        *self < 0.0
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Coeff for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        BigRational::from_integer(BigInt::from(1))
    }
    fn from_int(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).expect("rational does not fit in f64")
    }
}

/// Convenience constructor for small exact rationals.
pub fn rat(num: i64, den: i64) -> BigRational {
    assert!(den != 0, "rational denominator must be nonzero");
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Raise an exact rational to an integer power (negative allowed for nonzero base).
pub fn rat_pow(base: &BigRational, exp: i64) -> BigRational {
    if exp >= 0 {
        num_traits::pow::pow(base.clone(), exp as usize)
    } else {
        assert!(!Zero::is_zero(base), "zero cannot be raised to a negative power");
        num_traits::pow::pow(base.recip(), (-exp) as usize)
    }
}

/// A point `exp(2πi·num/den)` on the unit circle, stored as a reduced
/// fraction of a full turn with `0 ≤ num < den`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct RationalAngle {
    num: u64,
    den: u64,
}

impl RationalAngle {
    /// Largest representable denominator; keeps modular products in `i128`.
    pub const MAX_DEN: u64 = i64::MAX as u64;

    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "angle denominator must be nonzero");
        let (num, den) = if den < 0 { (-(num as i128), (-(den as i128)) as u64) } else { (num as i128, den as u64) };
        assert!(den <= Self::MAX_DEN, "angle denominator out of range");
        let num = num.rem_euclid(den as i128) as u64;
        Self { num, den }.reduced()
    }

    /// Angle `1/den` of a full turn.
    pub fn unit_fraction(den: u64) -> Self {
        assert!(den >= 1 && den <= Self::MAX_DEN, "angle denominator out of range");
        Self { num: if den == 1 { 0 } else { 1 }, den: if den == 1 { 1 } else { den } }
    }

    pub fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    fn reduced(self) -> Self {
        let g = self.num.gcd(&self.den);
        if g <= 1 {
            self
        } else {
            Self { num: self.num / g, den: self.den / g }
        }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// The angle of `z^t` for this point `z`.
    pub fn times(&self, t: i64) -> Self {
        let num = (self.num as i128 * t as i128).rem_euclid(self.den as i128) as u64;
        Self { num, den: self.den }.reduced()
    }

    /// Same as [`times`](Self::times) for a nonnegative multiplier already
    /// reduced modulo the denominator.
    pub fn times_mod(&self, t: u64) -> Self {
        debug_assert!(t < self.den || self.den == 1);
        let num = ((self.num as u128 * t as u128) % self.den as u128) as u64;
        Self { num, den: self.den }.reduced()
    }

    pub fn turns(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Cosine and sine of the angle. Exact at quarter turns; elsewhere the
    /// fraction is centered to `[-1/2, 1/2)` before scaling so points close
    /// to a full turn lose no precision.
    pub fn cos_sin(&self) -> (f64, f64) {
        let q4 = self.num as u128 * 4;
        if q4 % self.den as u128 == 0 {
            return match (q4 / self.den as u128) % 4 {
                0 => (1.0, 0.0),
                1 => (0.0, 1.0),
                2 => (-1.0, 0.0),
                _ => (0.0, -1.0),
            };
        }
        let centered = if self.num * 2 >= self.den {
            self.num as i64 - self.den as i64
        } else {
            self.num as i64
        };
        let theta = std::f64::consts::TAU * centered as f64 / self.den as f64;
        (theta.cos(), theta.sin())
    }
}

/// Sparse Laurent polynomial: finite exponent → coefficient map, no zeros.
#[derive(Clone, PartialEq)]
pub struct LaurentPoly<C: Coeff> {
    coeffs: BTreeMap<i64, C>,
}

pub type ExactPoly = LaurentPoly<BigRational>;
pub type FloatPoly = LaurentPoly<f64>;

impl<C: Coeff> fmt::Debug for LaurentPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LaurentPoly{:?}", self.coeffs)
    }
}

impl<C: Coeff> Default for LaurentPoly<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coeff> LaurentPoly<C> {
    pub fn zero() -> Self {
        Self { coeffs: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::monomial(0, C::one())
    }

    pub fn monomial(exp: i64, c: C) -> Self {
        let mut coeffs = BTreeMap::new();
        if !c.is_zero() {
            coeffs.insert(exp, c);
        }
        Self { coeffs }
    }

    pub fn from_pairs<I: IntoIterator<Item = (i64, C)>>(pairs: I) -> Self {
        let mut p = Self::zero();
        for (e, c) in pairs {
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, exp: i64, c: C) {
        if c.is_zero() {
            return;
        }
        match self.coeffs.entry(exp) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().add(&c);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn coeff(&self, exp: i64) -> C {
        self.coeffs.get(&exp).cloned().unwrap_or_else(C::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&i64, &C)> {
        self.coeffs.iter()
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero_poly(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn min_exp(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_exp(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    /// Difference between the largest and smallest exponent (0 if ≤ 1 term).
    pub fn spread(&self) -> i64 {
        match (self.min_exp(), self.max_exp()) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.coeffs.values().all(|c| !c.is_negative())
    }

    /// Value at the point 1, i.e. the coefficient sum.
    pub fn mass(&self) -> C {
        self.coeffs.values().fold(C::zero(), |acc, c| acc.add(c))
    }

    /// l¹ norm: sum of absolute coefficient values. Equals `mass` when all
    /// coefficients are nonnegative.
    pub fn l1_norm(&self) -> C {
        self.coeffs.values().fold(C::zero(), |acc, c| acc.add(&c.abs()))
    }

    fn is_unit_mass(&self) -> bool {
        let m = self.mass();
        if C::EXACT {
            m == C::one()
        } else {
            (m.to_f64() - 1.0).abs() <= C::unit_mass_slack()
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in rhs.iter() {
            out.add_term(*e, c.clone());
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self { coeffs: self.coeffs.iter().map(|(e, v)| (*e, v.mul(c))).collect() }
    }

    pub fn scale_div(&self, c: &C) -> Self {
        assert!(!c.is_zero(), "division of coefficients by zero");
        Self { coeffs: self.coeffs.iter().map(|(e, v)| (*e, v.div(c))).collect() }
    }

    /// Exponent-wise convolution. Panics loudly if an exponent sum would
    /// leave the machine-integer range.
    pub fn multiply(&self, rhs: &Self) -> Self {
        let mut out = Self::zero();
        for (e1, c1) in self.iter() {
            for (e2, c2) in rhs.iter() {
                let e = e1.checked_add(*e2).expect("Laurent exponent overflow in multiply");
                out.add_term(e, c1.mul(c2));
            }
        }
        out
    }

    /// Substitute `x ↦ x^period` (exponents scaled by `period`).
    pub fn compose_scale(&self, period: i64) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .map(|(e, c)| {
                    (e.checked_mul(period).expect("Laurent exponent overflow in scaling"), c.clone())
                })
                .collect(),
        }
    }

    pub fn shift(&self, by: i64) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .map(|(e, c)| (e.checked_add(by).expect("Laurent exponent overflow in shift"), c.clone()))
                .collect(),
        }
    }

    /// Exponent reflection `t ↦ -t`, an l¹ isometry and an involution.
    pub fn opposite(&self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .map(|(e, c)| (e.checked_neg().expect("Laurent exponent overflow in opposite"), c.clone()))
                .collect(),
        }
    }

    /// Divide by the mass so the result has `f(1) = 1`.
    pub fn normalized(&self) -> Self {
        let m = self.mass();
        assert!(!m.is_zero(), "cannot normalize a polynomial of zero mass");
        self.scale_div(&m)
    }

    /// Evaluate at a circle point of rational angle.
    pub fn eval_at(&self, z: &RationalAngle) -> Complex64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (e, c) in self.iter() {
            let (ct, st) = z.times(*e).cos_sin();
            let a = c.to_f64();
            re += a * ct;
            im += a * st;
        }
        Complex64::new(re, im)
    }

    /// `Σ a_t · t^order`. Orders 2 and 4 require nonnegative coefficients.
    pub fn moment(&self, order: u32) -> C {
        assert!(matches!(order, 1 | 2 | 4), "supported moment orders are 1, 2, 4");
        if order != 1 {
            assert!(self.is_nonnegative(), "even moments need nonnegative coefficients");
        }
        let mut acc = C::zero();
        for (e, c) in self.iter() {
            let base = C::from_int(*e);
            let mut t = base.clone();
            for _ in 1..order {
                t = t.mul(&base);
            }
            acc = acc.add(&c.mul(&t));
        }
        acc
    }

    /// Variance `μ₂ - μ₁²` of a unit-mass polynomial. Zero for monomials and
    /// invariant under exponent shifts.
    pub fn variance(&self) -> C {
        assert!(self.is_unit_mass(), "variance needs a unit-mass polynomial");
        let m1 = self.moment(1);
        self.moment(2).sub(&m1.mul(&m1))
    }

    /// Pairwise form `Σ_{j<j'} a_j a_{j'} (j'-j)²`; agrees with
    /// [`variance`](Self::variance) and serves as its independent oracle.
    pub fn variance_pairwise(&self) -> C {
        assert!(self.is_unit_mass(), "variance needs a unit-mass polynomial");
        self.pairwise_power_sum(2)
    }

    /// `Σ_{j<j'} a_j a_{j'} (j'-j)⁴ / 12`, the fourth-order analogue of the
    /// pairwise variance used in the quartic modulus bound.
    pub fn fourth_spread(&self) -> C {
        assert!(self.is_unit_mass(), "fourth spread needs a unit-mass polynomial");
        self.pairwise_power_sum(4).div(&C::from_int(12))
    }

    fn pairwise_power_sum(&self, power: u32) -> C {
        let terms: Vec<(&i64, &C)> = self.coeffs.iter().collect();
        let mut acc = C::zero();
        for i in 0..terms.len() {
            for j in (i + 1)..terms.len() {
                let d = C::from_int(terms[j].0 - terms[i].0);
                let mut dp = d.clone();
                for _ in 1..power {
                    dp = dp.mul(&d);
                }
                acc = acc.add(&terms[i].1.mul(terms[j].1).mul(&dp));
            }
        }
        acc
    }

    /// `(M - μ₁)(μ₁ - m)` for extreme exponents `M, m`: an upper bound on the
    /// variance that needs no second moment.
    pub fn bhatia_davis_bound(&self) -> C {
        assert!(!self.coeffs.is_empty(), "empty support has no variance bound");
        assert!(self.is_unit_mass(), "bound needs a unit-mass polynomial");
        let m1 = self.moment(1);
        let hi = C::from_int(self.max_exp().unwrap());
        let lo = C::from_int(self.min_exp().unwrap());
        hi.sub(&m1).mul(&m1.sub(&lo))
    }
}

impl ExactPoly {
    pub fn to_float(&self) -> FloatPoly {
        FloatPoly { coeffs: self.coeffs.iter().map(|(e, c)| (*e, Coeff::to_f64(c))).collect() }
    }
}

impl FloatPoly {
    /// Drop the smallest-magnitude coefficients whose combined absolute mass
    /// stays within `budget`.
    fn drop_smallest(&mut self, budget: f64) {
        let mut order: Vec<(f64, i64)> = self.coeffs.iter().map(|(e, c)| (f64::abs(*c), *e)).collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut spent = 0.0;
        for (a, e) in order {
            if spent + a > budget {
                break;
            }
            spent += a;
            self.coeffs.remove(&e);
        }
    }
}

/// Truncated `Exp H = exp(H - H(1))` for a nonnegative-coefficient exponent
/// polynomial, the compound-Poisson term constructor.
///
/// The series order and the support are truncated separately, each within
/// `tol/2` of l¹ mass, so the result has mass in `[1 - tol, 1]`. The order
/// cut is certified by the factorial tail of the Poisson weights at `‖H‖`.
pub fn exp_distribution(h: &FloatPoly, tol: f64) -> FloatPoly {
    assert!(tol > 0.0, "truncation tolerance must be positive");
    assert!(h.is_nonnegative(), "Exp needs nonnegative coefficients");
    let lambda = h.mass();
    let mut acc = FloatPoly::one();
    let mut term = FloatPoly::one();
    let mut weight = 1.0f64; // λ^s / s!
    let mut partial = 1.0f64; // Σ_{s'≤s} λ^s'/s'!
    let mut s = 0u32;
    // e^{-λ}(e^λ - partial) is the dropped series mass.
    while (-lambda).exp() * (lambda.exp() - partial) > tol / 2.0 {
        s += 1;
        assert!(s <= 100_000, "Exp series failed to converge");
        term = term.multiply(h).scale(&(1.0 / s as f64));
        acc = acc.add(&term);
        weight *= lambda / s as f64;
        partial += weight;
    }
    let mut out = acc.scale(&(-lambda).exp());
    out.drop_smallest(tol / 2.0);
    out
}

/// Decide exactly whether `h(r·z) = 0` for an exact polynomial, exact `r > 0`
/// and a rational-angle point `z`.
///
/// Returns `None` when the reduced angle denominator is not one of
/// 1, 2, 3, 4, 6 — the denominators whose root of unity lives in a degree ≤ 2
/// extension, where the test is a pair of exact rational comparisons.
pub fn exact_zero_at(h: &ExactPoly, r: &BigRational, z: &RationalAngle) -> Option<bool> {
    let q = z.den();
    if !matches!(q, 1 | 2 | 3 | 4 | 6) {
        return None;
    }
    // Class sums S_c = Σ_{p·t ≡ c (mod q)} a_t r^t.
    let mut class = vec![<BigRational as Zero>::zero(); q as usize];
    for (e, c) in h.iter() {
        let idx = (z.num() as i128 * *e as i128).rem_euclid(q as i128) as usize;
        class[idx] += c * rat_pow(r, *e);
    }
    let is0 = |v: &BigRational| Zero::is_zero(v);
    Some(match q {
        1 => is0(&class[0]),
        2 => is0(&(&class[0] - &class[1])),
        3 => is0(&(&class[0] - &class[2])) && is0(&(&class[1] - &class[2])),
        4 => is0(&(&class[0] - &class[2])) && is0(&(&class[1] - &class[3])),
        6 => {
            // ζ = exp(πi/3), ζ² = ζ - 1: value = A + Bζ.
            let a = &class[0] - &class[2] - &class[3] + &class[5];
            let b = &class[1] + &class[2] - &class[4] - &class[5];
            is0(&a) && is0(&b)
        }
        _ => unreachable!(),
    })
}
