//! Standalone checkers for the analytic inequalities the engine's tail
//! certificates lean on. Every check re-derives its quantities through its
//! own code path (direct trigonometric sums and explicit product formulas),
//! independent of the engine, so a passing run is a genuine cross-check.

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::laurent::{rat, ExactPoly};

const PI: f64 = std::f64::consts::PI;

/// Outcome of one checker: how many points were examined and which, if any,
/// violated the asserted inequalities.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: &'static str,
    pub points: u64,
    pub violations: Vec<String>,
}

impl CheckReport {
    fn new(name: &'static str) -> Self {
        Self { name, points: 0, violations: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Grid documented for the inequality suites: 0.01 to 2.00 in steps of 0.01.
pub fn default_theta_grid() -> Vec<f64> {
    (1..=200).map(|i| i as f64 * 0.01).collect()
}

/// Slack granted to floating comparisons of the partial sums.
const FLOAT_SLACK: f64 = 1e-13;

fn sin_partial(theta: f64, terms: u32) -> f64 {
    // Σ_{t=0}^{terms} (-1)^t θ^{2t+1}/(2t+1)!
    let mut term = theta;
    let mut sum = term;
    for t in 1..=terms {
        term *= -theta * theta / ((2 * t) as f64 * (2 * t + 1) as f64);
        sum += term;
    }
    sum
}

fn cos_partial(theta: f64, terms: u32) -> f64 {
    let mut term = 1.0;
    let mut sum = term;
    for t in 1..=terms {
        term *= -theta * theta / ((2 * t - 1) as f64 * (2 * t) as f64);
        sum += term;
    }
    sum
}

/// Alternating partial sums of the sine and cosine series bracket the true
/// values for every positive angle: odd-length truncations from below, even
/// from above (cosine needs at least the quadratic term).
pub fn check_sin_cos_bounds(thetas: &[f64], s_max: u32) -> CheckReport {
    let mut report = CheckReport::new("sin-cos-bounds");
    for &theta in thetas {
        assert!(theta > 0.0, "grid angles must be positive");
        let (sin, cos) = theta.sin_cos();
        for s in 0..=s_max {
            let lo = sin_partial(theta, 2 * s + 1);
            let hi = sin_partial(theta, 2 * s);
            report.points += 1;
            if lo > sin + FLOAT_SLACK || sin > hi + FLOAT_SLACK {
                report.violations.push(format!("sin sandwich failed at theta={theta} s={s}"));
            }
            // Where the first omitted term is resolvable the inequalities
            // must hold strictly even in floating point.
            let omitted = theta.powi(4 * s as i32 + 5) / factorial(4 * s + 5);
            if omitted > 1e-10 && !(lo < sin && sin < hi) {
                report.violations.push(format!("sin sandwich not strict at theta={theta} s={s}"));
            }
        }
        for s in 1..=s_max.max(1) {
            let lo = cos_partial(theta, 2 * s + 1);
            let hi = cos_partial(theta, 2 * s);
            report.points += 1;
            if lo > cos + FLOAT_SLACK || cos > hi + FLOAT_SLACK {
                report.violations.push(format!("cos sandwich failed at theta={theta} s={s}"));
            }
            let omitted = theta.powi(4 * s as i32 + 4) / factorial(4 * s + 4);
            if omitted > 1e-10 && !(lo < cos && cos < hi) {
                report.violations.push(format!("cos sandwich not strict at theta={theta} s={s}"));
            }
        }
    }
    report
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0f64, |acc, k| acc * k as f64)
}

/// Seeded sample of normalized nonnegative Laurent polynomials.
pub fn random_unit_polys(seed: u64, count: usize, max_support: usize) -> Vec<ExactPoly> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let support = rng.gen_range(1..=max_support);
            let p = ExactPoly::from_pairs(
                (0..support).map(|_| (rng.gen_range(-8..=8), rat(rng.gen_range(1..=9), rng.gen_range(1..=9)))),
            );
            p.normalized()
        })
        .collect()
}

/// Second- and fourth-moment bounds on the circle values of a normalized
/// nonnegative polynomial:
/// `-μ₂θ²/2 < Re(h(e^{iθ}) - 1) < -μ₂θ²/2 + μ₄θ⁴/24` and
/// `1 - Vθ² < |h(e^{iθ})|² < 1 - Vθ² + Kθ⁴`, degenerating to equalities for
/// single-atom polynomials.
pub fn check_modulus_bounds(polys: &[ExactPoly], thetas: &[f64]) -> CheckReport {
    let mut report = CheckReport::new("modulus-bounds");
    for (idx, h) in polys.iter().enumerate() {
        let coeffs: Vec<(f64, f64)> = h.iter().map(|(e, c)| (*e as f64, c.to_f64().unwrap())).collect();
        let mu2 = h.moment(2).to_f64().unwrap();
        let mu4 = h.moment(4).to_f64().unwrap();
        let v = h.variance().to_f64().unwrap();
        let k4 = h.fourth_spread().to_f64().unwrap();
        for &theta in thetas {
            let re: f64 = coeffs.iter().map(|(j, a)| a * (j * theta).cos()).sum();
            let im: f64 = coeffs.iter().map(|(j, a)| a * (j * theta).sin()).sum();
            let re_gap = re - 1.0;
            let lo = -mu2 * theta * theta / 2.0;
            let hi = lo + mu4 * theta.powi(4) / 24.0;
            report.points += 1;
            if re_gap < lo - 1e-12 || re_gap > hi + 1e-12 {
                report.violations.push(format!("moment bound failed for sample {idx} at theta={theta}"));
            }
            let m2 = re * re + im * im;
            let mlo = 1.0 - v * theta * theta;
            let mhi = mlo + k4 * theta.powi(4);
            report.points += 1;
            if m2 < mlo - 1e-12 || m2 > mhi + 1e-12 {
                report.violations.push(format!("modulus bound failed for sample {idx} at theta={theta}"));
            }
            if k4 * theta.powi(4) > 1e-8 && !(mlo < m2 && m2 < mhi) {
                report.violations.push(format!("modulus bound not strict for sample {idx} at theta={theta}"));
            }
        }
    }
    report
}

/// Values of the alternating two-generator construction: two systems that
/// share every evaluation invariant while their tensor product breaks
/// multiplicativity by a strict gap.
#[derive(Clone, Debug, Serialize)]
pub struct TensorGapReport {
    pub value_first: f64,
    pub value_second: f64,
    pub value_tensor: f64,
    /// Gap between the two interleaved class products (must be strictly
    /// positive: the smaller one is the shared invariant).
    pub interleaving_gap: f64,
    /// `|tensor - first²|`: strictly positive, the failure of
    /// multiplicativity.
    pub multiplicativity_gap: f64,
    pub violations: Vec<String>,
}

impl TensorGapReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Direct product evaluation for the alternating pair `(1+2x^{2^m})/3`,
/// `(1+τx^{2^m})/(1+τ)` at witnesses of angle `1/2^k`: squared factor
/// moduli are `1 - c·sin²(π/2^t)` with `c` per generator.
pub fn check_alternating_tensor_gap(tau: f64, t_max: u32) -> TensorGapReport {
    assert!(tau > 0.0 && tau < 0.5, "the alternating construction needs 0 < tau < 1/2");
    let c2 = 8.0 / 9.0;
    let ct = 4.0 * tau / ((1.0 + tau) * (1.0 + tau));
    let s2 = |t: u32| {
        let s = (PI / 2f64.powi(t as i32)).sin();
        s * s
    };
    // Class products: which generator sits at odd depths depends on the
    // witness index parity.
    let class = |c_odd: f64, c_even: f64| -> f64 {
        (1..=t_max)
            .map(|t| 1.0 - if t % 2 == 1 { c_odd } else { c_even } * s2(t))
            .product::<f64>()
    };
    let top = class(c2, ct);
    let bottom = class(ct, c2);
    // First system: generator 2 at even term indices. Second: interchanged.
    // Each system's invariant is the square root of its smaller class value;
    // interchanging the generators swaps the classes.
    let value_first = top.min(bottom).sqrt();
    let value_second = bottom.min(top).sqrt();
    let tensor_sq: f64 = (1..=t_max).map(|t| (1.0 - c2 * s2(t)) * (1.0 - ct * s2(t))).product();
    let value_tensor = tensor_sq.sqrt();

    let mut violations = Vec::new();
    if !(top < bottom) {
        violations.push(format!("interleaving comparison not strict: {top} vs {bottom}"));
    }
    if (value_first - value_second).abs() > 1e-14 {
        violations.push("the two systems disagree on the invariant".into());
    }
    let mult_gap = (value_tensor - value_first * value_second).abs();
    if mult_gap <= 1e-12 {
        violations.push("tensor value failed to break multiplicativity".into());
    }
    // Sandwich sanity: min ≥ tensor ≥ product.
    if !(value_first.min(value_second) >= value_tensor - 1e-14
        && value_tensor >= value_first * value_second - 1e-14)
    {
        violations.push("tensor value escaped the min/product sandwich".into());
    }
    TensorGapReport {
        value_first,
        value_second,
        value_tensor,
        interleaving_gap: bottom - top,
        multiplicativity_gap: mult_gap,
        violations,
    }
}

/// Direct product formula for the two-term ratio family:
/// `S(r) = ∏_t sqrt(1 - (4r/(1+r)²) sin²(π/nᵗ))`. Checks the inversion
/// symmetry `S(r) = S(1/r)`, strict decrease on (0, 1], and the vanishing
/// value at `r = 1, n = 2`.
pub fn check_ratio_monotonicity(r_grid: &[f64], n: u64, t_max: u32) -> CheckReport {
    let mut report = CheckReport::new("ratio-monotonicity");
    let value = |r: f64| -> f64 {
        (1..=t_max)
            .map(|t| {
                let s = (PI / (n as f64).powi(t as i32)).sin();
                (1.0 - 4.0 * r / ((1.0 + r) * (1.0 + r)) * s * s).max(0.0).sqrt()
            })
            .product()
    };
    for &r in r_grid {
        assert!(r > 0.0 && r <= 1.0, "grid must sit in (0, 1]");
        report.points += 1;
        let direct = value(r);
        let inverted = value(1.0 / r);
        if (direct - inverted).abs() > 1e-10 {
            report.violations.push(format!("inversion symmetry failed at r={r}: {direct} vs {inverted}"));
        }
    }
    let mut prev = f64::NEG_INFINITY;
    for window in r_grid.windows(2) {
        report.points += 1;
        let (a, b) = (value(window[0]), value(window[1]));
        if !(a > b) && !(n == 2 && window[1] == 1.0 && b == 0.0 && a > 0.0) {
            report.violations.push(format!("not strictly decreasing between r={} and r={}", window[0], window[1]));
        }
        prev = prev.max(a);
    }
    if n == 2 {
        report.points += 1;
        if value(1.0) != 0.0 {
            report.violations.push("dyadic value at r = 1 must vanish".into());
        }
    }
    report
}

/// Growing-scale behavior of the two-term ratio family with `n(k) = k + c`:
/// the level infimum is attained at the very next witness index and climbs
/// to 1, for every parameter. Also checks the quartic sine bound used in
/// that argument.
pub fn check_growing_scale_limit(c_offset: u64, l_grid: &[u32], r_grid: &[f64]) -> CheckReport {
    assert!(c_offset >= 2, "scale offset must keep n(k) >= 2");
    let mut report = CheckReport::new("growing-scale");
    let n = |k: u32| (k as u64 + c_offset) as f64;
    // S_{k,l} = ∏_{m=l}^{k-1} sqrt(1 - c·sin²(π / (n(m+1)⋯n(k)))).
    let partial = |r: f64, k: u32, l: u32| -> f64 {
        let c = 4.0 * r / ((1.0 + r) * (1.0 + r));
        let mut value = 1.0f64;
        for m in l..k {
            let mut ratio = 1.0f64;
            for i in (m + 1)..=k {
                ratio *= n(i);
            }
            let s = (PI / ratio).sin();
            value *= (1.0 - c * s * s).max(0.0).sqrt();
        }
        value
    };
    for &r in r_grid {
        for &l in l_grid {
            // The nearest witness index realizes the infimum.
            let first = partial(r, l + 1, l);
            for k in (l + 2)..=(l + 12) {
                report.points += 1;
                if first > partial(r, k, l) + 1e-12 {
                    report.violations.push(format!("infimum not at the nearest index: r={r} l={l} k={k}"));
                }
            }
        }
        // Levels climb towards 1.
        let level = |l: u32| (l + 1..=l + 40).map(|k| partial(r, k, l)).fold(1.0f64, f64::min);
        let mut prev = 0.0;
        for &l in l_grid {
            report.points += 1;
            let s = level(l);
            if s < prev - 1e-12 {
                report.violations.push(format!("levels not nondecreasing at r={r} l={l}"));
            }
            prev = s;
            if l >= 20 && s < 0.99 {
                report.violations.push(format!("level at l={l} is {s}, below 0.99 (r={r})"));
            }
        }
    }
    // sin²(π/n) ≥ π²/n² - π⁴/(3n⁴) on the range used by the argument.
    for nn in 4..=100u32 {
        report.points += 1;
        let s = (PI / nn as f64).sin();
        let rhs = PI * PI / (nn * nn) as f64 - PI.powi(4) / (3.0 * (nn as f64).powi(4));
        if s * s < rhs {
            report.violations.push(format!("quartic sine bound failed at n={nn}"));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_cos_grid_is_clean() {
        let rep = check_sin_cos_bounds(&default_theta_grid(), 4);
        assert!(rep.passed(), "{:?}", rep.violations);
        assert!(rep.points > 1000);
    }

    #[test]
    fn sin_cos_spot_values() {
        // theta = 0.1, s = 0: θ - θ³/6 < sin θ < θ.
        let theta = 0.1f64;
        assert!(sin_partial(theta, 1) < theta.sin() && theta.sin() < sin_partial(theta, 0));
        // theta = 2.0, s = 1: four-term lower, three-term upper.
        let theta = 2.0f64;
        assert!(sin_partial(theta, 3) < theta.sin() && theta.sin() < sin_partial(theta, 2));
        // Cosine at theta = 0.5, s = 1.
        let theta = 0.5f64;
        assert!(cos_partial(theta, 3) < theta.cos() && theta.cos() < cos_partial(theta, 2));
    }

    #[test]
    fn modulus_bounds_on_random_samples() {
        let polys = random_unit_polys(0x5eed, 100, 8);
        let thetas: Vec<f64> = (1..=50).map(|i| i as f64 * 0.01).collect();
        let rep = check_modulus_bounds(&polys, &thetas);
        assert!(rep.passed(), "{:?}", rep.violations);
    }

    #[test]
    fn modulus_bounds_closed_form_case() {
        // h = (1+x)/2: |h|² = cos²(θ/2) sits between 1 - θ²/4 and
        // 1 - θ²/4 + θ⁴/48.
        let h = ExactPoly::from_pairs([(0, rat(1, 2)), (1, rat(1, 2))]);
        let theta = 0.3f64;
        let m2 = (theta / 2.0).cos().powi(2);
        let v = h.variance().to_f64().unwrap();
        let k4 = h.fourth_spread().to_f64().unwrap();
        assert!((v - 0.25).abs() < 1e-15 && (k4 - 1.0 / 48.0).abs() < 1e-15);
        assert!(1.0 - v * theta * theta < m2);
        assert!(m2 < 1.0 - v * theta * theta + k4 * theta.powi(4));
        let rep = check_modulus_bounds(&[h], &[theta]);
        assert!(rep.passed());
        // Single atom: both sides collapse without violations.
        let atom = ExactPoly::monomial(3, rat(1, 1));
        assert!(check_modulus_bounds(&[atom], &[0.2, 1.0]).passed());
    }

    #[test]
    fn alternating_tensor_gap_quarter() {
        let rep = check_alternating_tensor_gap(0.25, 64);
        assert!(rep.passed(), "{:?}", rep.violations);
        assert!(rep.interleaving_gap > 0.0);
        assert!(rep.multiplicativity_gap > 0.01);
        // The tensor value and the squared invariant frozen coarsely.
        assert!((rep.value_first - 0.2519).abs() < 1e-3, "{}", rep.value_first);
        assert!((rep.value_tensor - 0.1049).abs() < 1e-3, "{}", rep.value_tensor);
    }

    #[test]
    fn alternating_tensor_gap_small_tau() {
        for tau in [0.05, 0.01, 0.002] {
            let rep = check_alternating_tensor_gap(tau, 64);
            assert!(rep.passed(), "tau={tau}: {:?}", rep.violations);
        }
    }

    #[test]
    fn ratio_monotonicity_grids() {
        let grid: Vec<f64> = (1..=5).map(|i| i as f64 * 0.2).collect();
        let rep = check_ratio_monotonicity(&grid, 3, 64);
        assert!(rep.passed(), "{:?}", rep.violations);
        let rep = check_ratio_monotonicity(&grid, 2, 64);
        assert!(rep.passed(), "{:?}", rep.violations);
    }

    #[test]
    fn growing_scale_limits() {
        let rep = check_growing_scale_limit(2, &[5, 10, 20], &[1.0, 3.0]);
        assert!(rep.passed(), "{:?}", rep.violations);
    }
}
