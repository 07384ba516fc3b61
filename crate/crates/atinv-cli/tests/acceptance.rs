//! Acceptance gate: one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test -p atinv-cli --test acceptance -- --nocapture` to see
//! every line. Two criteria assert published closed-form values that exact
//! arithmetic contradicts; those tests state the honest computed value
//! before failing (see notes/decisions in the project history).

use atinv_core::engine::{
    closed_form_divisible, closed_form_rational, invariant, level_infimum,
    multiplicativity_report, power_law_check, EngineOptions, TailKind, WitnessRule,
};
use atinv_core::families::{FamilySpec, GeneratorRule, ScaleRule};
use atinv_core::laurent::{rat, ExactPoly};
use atinv_core::massloss::{
    self as massloss, dyadic_mirror_limit, dyadic_mirror_norm, dyadic_pair_limit, dyadic_pair_norm,
    inverse_distinguish, mass_loss_invariant, probe_norm_limit, MasslossOptions, ProbeRule,
};
use atinv_core::verify;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion(num: &str, name: &str, body: impl FnOnce() -> Result<String, String>) {
    match body() {
        Ok(detail) => println!("acceptance [{num}] {name}: PASS — {detail}"),
        Err(msg) => {
            println!("acceptance [{num}] {name}: FAIL — {msg}");
            panic!("acceptance criterion {num} failed: {msg}");
        }
    }
}

fn opts() -> EngineOptions {
    EngineOptions::default()
}

fn one_plus_x() -> ExactPoly {
    ExactPoly::from_pairs([(0, rat(1, 1)), (1, rat(1, 1))])
}

fn gen_x() -> GeneratorRule {
    GeneratorRule::constant(ExactPoly::monomial(1, rat(1, 1))).unwrap()
}

fn ratio_family(n: u64, r: BigRational) -> FamilySpec {
    FamilySpec::rational(GeneratorRule::constant(one_plus_x()).unwrap(), ScaleRule::constant(n).unwrap(), r)
        .unwrap()
}

fn pow_big(base: &BigRational, e: u32) -> BigRational {
    num_traits::pow::pow(base.clone(), e as usize)
}

#[test]
fn a01_variance_identities() {
    criterion("01", "variance identities in exact arithmetic", || {
        let polys = verify::random_unit_polys(0xA01, 700, 10);
        for (i, p) in polys.iter().take(500).enumerate() {
            if p.variance() != p.variance_pairwise() {
                return Err(format!("pairwise variance form failed at sample {i}"));
            }
        }
        for i in 0..200 {
            let (f, g) = (&polys[i], &polys[500 + i]);
            if f.multiply(g).variance() != f.variance() + g.variance() {
                return Err(format!("variance additivity failed at pair {i}"));
            }
        }
        Ok("500 pairwise identities and 200 additivity identities, all exact".into())
    });
}

#[test]
fn a02_inequality_suites() {
    criterion("02", "sine/cosine and modulus bound suites", || {
        let rep = verify::check_sin_cos_bounds(&verify::default_theta_grid(), 4);
        if !rep.passed() {
            return Err(format!("sine/cosine sandwich violations: {:?}", rep.violations));
        }
        let polys = verify::random_unit_polys(0xA02, 100, 8);
        let thetas: Vec<f64> = (1..=50).map(|i| i as f64 * 0.01).collect();
        let rep2 = verify::check_modulus_bounds(&polys, &thetas);
        if !rep2.passed() {
            return Err(format!("modulus bound violations: {:?}", rep2.violations));
        }
        Ok(format!("{} + {} grid points, zero violations", rep.points, rep2.points))
    });
}

#[test]
fn a03_closed_form_against_engine() {
    criterion("03", "compound-Poisson closed form brackets the engine value", || {
        let x = ExactPoly::monomial(1, rat(1, 1));
        let cf = closed_form_divisible(&x, 2, 1e-12);
        let spec = FamilySpec::divisible(gen_x(), ScaleRule::constant(2).unwrap(), rat(1, 1)).unwrap();
        let inv = invariant(&spec, &WitnessRule::Canonical, &opts()).map_err(|e| e.to_string())?;
        let combined = cf.width() + inv.width();
        if combined > 1e-8 {
            return Err(format!("combined bracket width {combined} exceeds 1e-8"));
        }
        if !cf.overlaps(&inv) {
            return Err("closed form and engine brackets are disjoint".into());
        }
        if !(cf.lower > 0.0 && cf.upper < 1.0) {
            return Err("value not certified strictly inside (0,1)".into());
        }
        let first_factor = (-2.0f64).exp();
        if !(cf.upper < first_factor) {
            return Err(format!("value {} not below the leading factor bound {first_factor}", cf.upper));
        }
        Ok(format!(
            "value {:.6} in ({:.3e}, {:.6}), combined width {:.2e}",
            cf.value, cf.lower, first_factor, combined
        ))
    });
}

#[test]
fn a04_parameter_power_law() {
    criterion("04", "parameter acts as an exponent on the invariant", || {
        let rs = [rat(1, 2), rat(2, 1), rat(3, 1)];
        for n in [2u64, 3] {
            let rep = power_law_check(&gen_x(), &ScaleRule::constant(n).unwrap(), &WitnessRule::Canonical, &rs, &opts())
                .map_err(|e| e.to_string())?;
            if !rep.all_consistent {
                return Err(format!("power law failed at scale {n}: {rep:?}"));
            }
        }
        Ok("r in {1/2, 2, 3} against base powers at scales 2 and 3".into())
    });
}

fn random_ratio_spec(rng: &mut ChaCha8Rng, n: u64) -> FamilySpec {
    let support = rng.gen_range(2..=4);
    let h = ExactPoly::from_pairs(
        (0..support).map(|_| (rng.gen_range(0..=4i64), rat(rng.gen_range(1..=9), rng.gen_range(1..=9)))),
    );
    let r = rat(rng.gen_range(1..=6), rng.gen_range(1..=6));
    FamilySpec::rational(GeneratorRule::constant(h).unwrap(), ScaleRule::constant(n).unwrap(), r).unwrap()
}

#[test]
fn a05_tensor_sandwich_and_gap() {
    criterion("05", "tensor sandwich, square law, and the alternating gap", || {
        let o = opts();
        let mut rng = ChaCha8Rng::seed_from_u64(0xA05);
        for i in 0..10 {
            let n = [2u64, 3, 4][rng.gen_range(0..3)];
            let a = random_ratio_spec(&mut rng, n);
            let b = random_ratio_spec(&mut rng, n);
            let rep = multiplicativity_report(&a, &b, &WitnessRule::Canonical, &o).map_err(|e| e.to_string())?;
            if !rep.sandwich_ok || !rep.product_consistent || !rep.zero_consistent {
                return Err(format!("sandwich failed on random pair {i}: {rep:?}"));
            }
            let sq = multiplicativity_report(&a, &a, &WitnessRule::Canonical, &o).map_err(|e| e.to_string())?;
            if sq.square_law != Some(true) {
                return Err(format!("square law failed on random spec {i}"));
            }
        }

        // The alternating two-generator pair at tau = 1/4.
        let tau = rat(1, 4);
        let g2 = ExactPoly::from_pairs([(0, rat(1, 1)), (1, rat(2, 1))]);
        let gt = ExactPoly::from_pairs([(0, rat(1, 1)), (1, tau)]);
        let scale = ScaleRule::constant(2).unwrap();
        let m1 = FamilySpec::explicit(vec![g2.clone(), gt.clone()], scale.clone()).unwrap();
        let m2 = FamilySpec::explicit(vec![gt, g2], scale).unwrap();
        let s1 = invariant(&m1, &WitnessRule::Canonical, &o).map_err(|e| e.to_string())?;
        let s2 = invariant(&m2, &WitnessRule::Canonical, &o).map_err(|e| e.to_string())?;
        if !s1.overlaps(&s2) || (s1.value - s2.value).abs() > 1e-12 {
            return Err("the interchanged systems disagree on the invariant".into());
        }
        let tensor = invariant(&FamilySpec::tensor(m1, m2), &WitnessRule::Canonical, &o)
            .map_err(|e| e.to_string())?;
        let gap = tensor.lower - s1.upper * s2.upper;
        if gap <= 0.0 {
            return Err(format!("no certified multiplicativity gap: {gap}"));
        }
        // Cross-check against the independent product oracle.
        let oracle = verify::check_alternating_tensor_gap(0.25, 64);
        if (oracle.value_first - s1.value).abs() > 1e-9 || (oracle.value_tensor - tensor.value).abs() > 1e-9 {
            return Err("engine values drifted from the direct product oracle".into());
        }
        Ok(format!(
            "10 random pairs sandwiched; alternating gap {:.4} certified (tensor {:.6} vs squared {:.6})",
            gap,
            tensor.value,
            s1.value * s1.value
        ))
    });
}

#[test]
fn a06_ratio_closed_form() {
    criterion("06", "ratio closed form: exact zero, inversion symmetry, monotonicity", || {
        let h = one_plus_x();
        let z = closed_form_rational(&h, 2, &rat(1, 1), 1e-12);
        if !z.is_exact_zero() {
            return Err("dyadic value at r = 1 is not an exact zero".into());
        }
        for (p, q) in [(3i64, 10i64), (1, 2), (4, 5)] {
            let a = closed_form_rational(&h, 3, &rat(p, q), 1e-12);
            let b = closed_form_rational(&h, 3, &rat(q, p), 1e-12);
            if (a.value - b.value).abs() > 1e-10 {
                return Err(format!("inversion symmetry broken at r={p}/{q}"));
            }
        }
        let values: Vec<_> =
            (1..=8).map(|i| closed_form_rational(&h, 3, &rat(i, 8), 1e-12)).collect();
        for w in values.windows(2) {
            if !(w[0].lower > w[1].upper) {
                return Err(format!(
                    "monotone decrease not certified between brackets [{}, {}] and [{}, {}]",
                    w[0].lower, w[0].upper, w[1].lower, w[1].upper
                ));
            }
        }
        Ok("exact zero at the dyadic odometer point, symmetry to 1e-10, strict decrease on the 8-point grid".into())
    });
}

#[test]
fn a07_slice_identity_exhaustive() {
    criterion("07", "two-adic slice sums equal the closed form, exhaustively", || {
        let one = BigRational::one();
        for r in [rat(1, 3), rat(1, 2), rat(2, 3), rat(2, 1)] {
            for d in 1..=20u32 {
                let mut total = BigRational::from_integer(BigInt::from(0));
                for u in 0..d {
                    let by_enum = massloss::two_adic_slice_sum(&r, d, u);
                    if by_enum != massloss::two_adic_slice_closed(&r, d, u) {
                        return Err(format!("slice mismatch at r={r} d={d} u={u}"));
                    }
                    total += by_enum;
                }
                if total != pow_big(&(&one + &r), d) - &one {
                    return Err(format!("slice totals inconsistent at r={r} d={d}"));
                }
            }
        }
        Ok("all d <= 20, all orders, four parameters, zero tolerance".into())
    });
}

#[test]
fn a08_mass_loss_noninteracting_value() {
    criterion("08a", "pair probe on the ratio family at scale 3 yields exactly 1/3", || {
        let spec = ratio_family(3, rat(1, 2));
        let v = mass_loss_invariant(&ProbeRule::SignedPair, &spec, &MasslossOptions::default())
            .map_err(|e| e.to_string())?;
        if v.certified.meta.tail != TailKind::ExactRational {
            return Err("non-interaction was not certified".into());
        }
        let exact = v.exact_value.clone().ok_or("no exact value returned")?;
        // The stated closed form. The exact convolution oracle computes
        // ‖(1 - rx^T)(1 + rx^T)‖/(1+r)² = (1+r²)/(1+r)² = 5/9 at r = 1/2,
        // with non-interaction certified, and the sampled chains agree;
        // the asserted 1/3 is what an unbounded dyadic cancellation would
        // give, not the frozen value at scale 3.
        if exact != rat(1, 3) {
            return Err(format!(
                "computed exact value {exact} (≈{:.6}); the criterion asserts 1/3. \
                 Oracle chain at r=1/2, n=3: ‖p·P‖ = ‖(1 - x⁹/2)(1 + x⁹/2)‖/(9/4) \
                 = (1 + 1/4)/(9/4) = 5/9, frozen thereafter (certified no further \
                 cancellation); see the decisions ledger",
                exact.to_f64().unwrap()
            ));
        }
        Ok("exact value 1/3 with certified non-interaction".into())
    });
}

#[test]
fn a08_mass_loss_dyadic_convergence() {
    criterion("08b", "dyadic normalized norms approach their limits geometrically", || {
        for r in [rat(1, 3), rat(1, 2), rat(2, 3)] {
            let ratio = &r / (BigRational::one() + &r);
            for d in [8u32, 16, 24] {
                let bound = rat(2, 1) * pow_big(&ratio, d);
                let pair_gap = (dyadic_pair_norm(&r, d) - dyadic_pair_limit(&r)).abs();
                if pair_gap > bound {
                    return Err(format!("pair probe approach too slow at r={r} d={d}"));
                }
                let mirror_gap = (dyadic_mirror_norm(&r, d) - dyadic_mirror_limit(&r)).abs();
                if mirror_gap > bound {
                    return Err(format!("mirror probe approach too slow at r={r} d={d}"));
                }
            }
        }
        Ok("pair and mirror errors below 2(r/(1+r))^d at d in {8, 16, 24}, exactly".into())
    });
}

#[test]
fn a08_inverse_distinguishing() {
    criterion("08c", "mass loss distinguishes a system from its inverse", || {
        let mo = MasslossOptions::default();
        for n in [3u64, 2] {
            for r in [rat(1, 3), rat(1, 2), rat(2, 3)] {
                let rep = inverse_distinguish(&ratio_family(n, r.clone()), &mo).map_err(|e| e.to_string())?;
                if !rep.distinct {
                    return Err(format!("failed to distinguish at n={n} r={r}"));
                }
            }
            let rep = inverse_distinguish(&ratio_family(n, rat(1, 1)), &mo).map_err(|e| e.to_string())?;
            if rep.distinct {
                return Err(format!("self-inverse case reported distinct at n={n}"));
            }
        }
        Ok("distinct for r in {1/3, 1/2, 2/3} at scales 3 and 2; equal at r = 1".into())
    });
}

#[test]
fn a09_oracle_display_audit() {
    criterion("09", "structural sums equal the exact convolution; display deviation reproduced", || {
        for r in [rat(1, 3), rat(1, 2), rat(2, 3), rat(2, 1)] {
            for a in [r.clone(), r.recip()] {
                for d in [2u32, 4, 8, 12, 16, 20] {
                    // probe_norm_limit asserts the three routes agree.
                    let _ = probe_norm_limit(&a, &r, d);
                }
            }
        }
        let (oracle, rep) = probe_norm_limit(&rat(1, 2), &rat(1, 2), 2);
        if oracle != rat(11, 8) {
            return Err(format!("oracle at d=2, r=1/2 is {oracle}, expected 11/8"));
        }
        if rep.simplified_display.as_deref() != Some("9/8") || rep.display_deviation.as_deref() != Some("1/4") {
            return Err(format!("display deviation not reproduced: {rep:?}"));
        }
        Ok("48 parameter triples audited; 11/8 vs 9/8 deviation reproduced exactly".into())
    });
}

#[test]
fn a10_growing_scale_ratio_levels() {
    criterion("10a", "growing-scale ratio family levels certified above 0.99 at l = 20", || {
        let mut details = Vec::new();
        for r in [rat(1, 2), rat(1, 1), rat(3, 1)] {
            let spec = FamilySpec::rational(
                GeneratorRule::constant(one_plus_x()).unwrap(),
                ScaleRule::affine(1, 2).unwrap(),
                r.clone(),
            )
            .unwrap();
            let cv = level_infimum(&spec, &WitnessRule::Canonical, 20, &opts()).map_err(|e| e.to_string())?;
            if cv.lower < 0.99 {
                return Err(format!("certified lower bound {} below 0.99 at r={r}", cv.lower));
            }
            details.push(format!("r={r}: [{:.5}, {:.5}]", cv.lower, cv.upper));
        }
        Ok(details.join("; "))
    });
}

#[test]
fn a10_growing_scale_divisible_next_scale() {
    criterion("10b", "growing-scale compound-Poisson family under the next-scale witness", || {
        let spec = FamilySpec::divisible(gen_x(), ScaleRule::affine(1, 2).unwrap(), rat(1, 1)).unwrap();
        let cv = level_infimum(&spec, &WitnessRule::NextScale, 20, &opts()).map_err(|e| e.to_string())?;
        // The criterion asserts the level value reaches 0.99 by l = 20. The
        // honest computation contradicts it: whenever n(k+1) is prime the
        // scale products T(m) for m <= k are nonzero factorial residues
        // modulo it (by Wilson's theorem T(20) ≡ 11 mod 23), so the window
        // contains values like exp(-(1 - cos(22π/23))) ≈ 0.137 and smaller,
        // while composite n(k+1) gives exactly 1. See the decisions ledger.
        if cv.value < 0.99 {
            return Err(format!(
                "computed level value {:.3e} (upper {:.3e}) at l = 20; the criterion asserts >= 0.99. \
                 Prime witness denominators pin the infimum far below it: the k = 20 chain alone \
                 evaluates to exp(-(1 - cos(2π·11/23))) ≈ 0.1366",
                cv.value, cv.upper
            ));
        }
        Ok(format!("level value {:.5} at l = 20", cv.value))
    });
}

#[test]
fn a11_telescoping_invariance() {
    criterion("11", "telescoping leaves the invariant unchanged", || {
        let o = opts();
        let specs: Vec<FamilySpec> = vec![
            FamilySpec::divisible(gen_x(), ScaleRule::constant(2).unwrap(), rat(1, 1)).unwrap(),
            ratio_family(3, rat(1, 2)),
            {
                let g2 = ExactPoly::from_pairs([(0, rat(1, 1)), (1, rat(2, 1))]);
                let gt = ExactPoly::from_pairs([(0, rat(1, 1)), (1, rat(1, 4))]);
                FamilySpec::explicit(vec![g2, gt], ScaleRule::constant(2).unwrap()).unwrap()
            },
        ];
        for (i, spec) in specs.iter().enumerate() {
            let base = invariant(spec, &WitnessRule::Canonical, &o).map_err(|e| e.to_string())?;
            for (stride, offset) in [(2u64, -1i64), (3, -2)] {
                let tel = FamilySpec::telescope(spec.clone(), stride, offset).map_err(|e| e.to_string())?;
                let cv = invariant(&tel, &WitnessRule::Canonical, &o).map_err(|e| e.to_string())?;
                if !cv.overlaps(&base) || (cv.value - base.value).abs() > 1e-9 {
                    return Err(format!(
                        "spec {i} drifted under u(i) = {stride}i{offset:+}: {} vs {}",
                        cv.value, base.value
                    ));
                }
            }
        }
        Ok("three families, two index maps, brackets and values agree".into())
    });
}

#[test]
fn a12_sweep_reproducibility() {
    criterion("12", "identical sweep configs produce byte-identical outputs", || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config_path = dir.path().join("sweep.json");
        std::fs::write(
            &config_path,
            include_str!("../../../configs/rational_sweep_n3.json"),
        )
        .map_err(|e| e.to_string())?;
        let run = |tag: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
            let csv_path = dir.path().join(format!("out_{tag}.csv"));
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_atinv"))
                .args([
                    "sweep",
                    "--config",
                    config_path.to_str().unwrap(),
                    "--out",
                    csv_path.to_str().unwrap(),
                    "--svg",
                    "--workers",
                    "3",
                ])
                .status()
                .map_err(|e| e.to_string())?;
            if !status.success() {
                return Err(format!("sweep run {tag} failed with {status:?}"));
            }
            let csv = std::fs::read(&csv_path).map_err(|e| e.to_string())?;
            let svg = std::fs::read(csv_path.with_extension("svg")).map_err(|e| e.to_string())?;
            Ok((csv, svg))
        };
        let (csv1, svg1) = run("a")?;
        let (csv2, svg2) = run("b")?;
        if csv1 != csv2 {
            return Err("CSV outputs differ between identical runs".into());
        }
        if svg1 != svg2 {
            return Err("SVG outputs differ between identical runs".into());
        }
        Ok(format!("two runs, {} CSV bytes and {} SVG bytes, identical", csv1.len(), svg1.len()))
    });
}
