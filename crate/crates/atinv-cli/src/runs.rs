//! Command implementations shared by the binary and its tests.

use atinv_core::engine::{self, CertifiedValue, WitnessRule};
use atinv_core::families::FamilySpec;
use atinv_core::massloss::{self, MassLossValue, MasslossOptions, ProbeRule};
use atinv_core::serialize::{FamilyDef, RatioDef};
use atinv_core::verify;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub version: u32,
    pub command: &'static str,
    pub config: RunConfig,
    pub result: CertifiedValue,
    pub precision_met: bool,
}

fn resolve(cfg: &RunConfig) -> Result<(FamilySpec, WitnessRule), String> {
    let def = cfg.spec.as_ref().ok_or("config needs a `spec`")?;
    let spec = def.to_spec().map_err(|e| e.to_string())?;
    let witness = cfg.witness.to_rule().map_err(|e| e.to_string())?;
    Ok((spec, witness))
}

pub fn run_invariant(cfg: &RunConfig) -> Result<InvariantReport, String> {
    let (spec, witness) = resolve(cfg)?;
    let result =
        engine::invariant(&spec, &witness, &cfg.engine_options()).map_err(|e| e.to_string())?;
    let precision_met = result.width() <= cfg.tolerances.target_width;
    Ok(InvariantReport {
        version: cfg.version,
        command: "invariant",
        config: cfg.clone(),
        result,
        precision_met,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    #[serde(skip)]
    pub csv: String,
    #[serde(skip)]
    pub svg: Option<String>,
}

fn with_parameter(def: &FamilyDef, r: RatioDef) -> Result<FamilySpec, String> {
    let new_def = match def {
        FamilyDef::Divisible { gen, scale, .. } =>
            FamilyDef::Divisible { gen: gen.clone(), scale: scale.clone(), r },
        FamilyDef::Rational { gen, scale, .. } =>
            FamilyDef::Rational { gen: gen.clone(), scale: scale.clone(), r },
        _ => return Err("sweeps need a family with an r parameter".into()),
    };
    new_def.to_spec().map_err(|e| e.to_string())
}

pub fn run_sweep(cfg: &RunConfig, with_svg: bool) -> Result<SweepOutput, String> {
    let def = cfg.spec.as_ref().ok_or("config needs a `spec`")?;
    let sweep = cfg.sweep.as_ref().ok_or("sweep needs a nonempty `sweep.r_grid`")?;
    let witness = cfg.witness.to_rule().map_err(|e| e.to_string())?;
    let opts = cfg.engine_options();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| e.to_string())?;
    let rows: Vec<SweepRow> = pool.install(|| {
        sweep
            .r_grid
            .par_iter()
            .map(|ratio| {
                let rf = ratio.num as f64 / ratio.den as f64;
                match with_parameter(def, *ratio)
                    .and_then(|spec| engine::invariant(&spec, &witness, &opts).map_err(|e| e.to_string()))
                {
                    Ok(cv) => {
                        let status = if cv.is_exact_zero() {
                            "exact_zero"
                        } else if cv.meta.flags.iter().any(|f| {
                            matches!(f, engine::Flag::NoTailCertificate | engine::Flag::NonTerminating)
                        }) {
                            "uncertified"
                        } else {
                            "ok"
                        };
                        SweepRow {
                            r: rf,
                            value: Some(cv.value),
                            lower: Some(cv.lower),
                            upper: Some(cv.upper),
                            status: status.into(),
                        }
                    }
                    Err(e) => SweepRow {
                        r: rf,
                        value: None,
                        lower: None,
                        upper: None,
                        status: format!("error: {e}"),
                    },
                }
            })
            .collect()
    });

    let mut csv = String::from("r,value,lower,upper,status\n");
    for row in &rows {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.r,
            fmt(row.value),
            fmt(row.lower),
            fmt(row.upper),
            row.status
        ));
    }
    let svg = with_svg.then(|| crate::svg::sweep_chart(&rows));
    Ok(SweepOutput { rows, csv, svg })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeComparison {
    pub probe: String,
    pub value_a: MassLossValue,
    pub value_b: MassLossValue,
    pub disjoint: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DistinguishReport {
    pub version: u32,
    pub command: &'static str,
    pub eval_a: CertifiedValue,
    pub eval_b: CertifiedValue,
    pub eval_disjoint: bool,
    pub mass_loss: Vec<ProbeComparison>,
    /// "distinguished" only when certified brackets are disjoint; otherwise
    /// "inconclusive" — never a claim of isomorphism.
    pub verdict: &'static str,
}

fn mass_values_disjoint(a: &MassLossValue, b: &MassLossValue) -> bool {
    match (&a.exact_value, &b.exact_value) {
        (Some(x), Some(y)) => x != y,
        _ => {
            a.certified.upper < b.certified.lower || b.certified.upper < a.certified.lower
        }
    }
}

pub fn run_distinguish(cfg: &RunConfig) -> Result<DistinguishReport, String> {
    let (spec_a, witness) = resolve(cfg)?;
    let def_b = cfg.spec_b.as_ref().ok_or("distinguish needs a `spec_b`")?;
    let spec_b = def_b.to_spec().map_err(|e| e.to_string())?;
    let opts = cfg.engine_options();

    let eval_a = engine::invariant(&spec_a, &witness, &opts).map_err(|e| e.to_string())?;
    let eval_b = engine::invariant(&spec_b, &witness, &opts).map_err(|e| e.to_string())?;
    let eval_disjoint = eval_a.upper < eval_b.lower || eval_b.upper < eval_a.lower;

    // Mass-loss comparison under shared probe sequences, where both
    // families have exact ratio terms.
    let mut mass_loss = Vec::new();
    let mopts = MasslossOptions::default();
    let mut params: Vec<BigRational> = Vec::new();
    for spec in [&spec_a, &spec_b] {
        if let FamilySpec::Rational { r, .. } = spec {
            if !params.contains(r) {
                params.push(r.clone());
            }
        }
    }
    for a in params {
        let probe = ProbeRule::SignedPairWith { a: a.clone() };
        let va = massloss::mass_loss_invariant(&probe, &spec_a, &mopts);
        let vb = massloss::mass_loss_invariant(&probe, &spec_b, &mopts);
        if let (Ok(va), Ok(vb)) = (va, vb) {
            let disjoint = mass_values_disjoint(&va, &vb);
            let label = format!(
                "signed pair, parameter {}/{}",
                a.numer(),
                a.denom()
            );
            mass_loss.push(ProbeComparison { probe: label, value_a: va, value_b: vb, disjoint });
        }
    }

    let distinguished = eval_disjoint || mass_loss.iter().any(|p| p.disjoint);
    Ok(DistinguishReport {
        version: cfg.version,
        command: "distinguish",
        eval_a,
        eval_b,
        eval_disjoint,
        mass_loss,
        verdict: if distinguished { "distinguished" } else { "inconclusive" },
    })
}

/// Names accepted by the verify subcommand.
pub const VERIFY_SUITES: &[&str] = &[
    "variance",
    "sin-cos",
    "modulus",
    "tensor-gap",
    "ratio-monotonicity",
    "growing-scale",
    "dyadic-slices",
    "probe-norms",
    "all",
];

fn variance_suite(seed: u64) -> Value {
    use atinv_core::laurent::ExactPoly;
    let polys = verify::random_unit_polys(seed, 700, 10);
    let mut violations = Vec::new();
    for (i, p) in polys.iter().take(500).enumerate() {
        if p.variance() != p.variance_pairwise() {
            violations.push(format!("pairwise variance mismatch at sample {i}"));
        }
    }
    let pairs: Vec<(&ExactPoly, &ExactPoly)> =
        polys.iter().take(200).zip(polys.iter().skip(500).take(200)).collect();
    for (i, (f, g)) in pairs.iter().enumerate() {
        let sum = f.variance() + g.variance();
        if f.multiply(g).variance() != sum {
            violations.push(format!("variance additivity failed at pair {i}"));
        }
    }
    json!({
        "name": "variance",
        "points": 700,
        "violations": violations,
        "passed": violations.is_empty(),
    })
}

fn check_to_value(rep: &verify::CheckReport) -> Value {
    json!({
        "name": rep.name,
        "points": rep.points,
        "violations": rep.violations,
        "passed": rep.passed(),
    })
}

fn dyadic_slices_suite() -> Value {
    use atinv_core::laurent::rat;
    let mut violations = Vec::new();
    let mut points = 0u64;
    for r in [rat(1, 3), rat(1, 2), rat(2, 3), rat(2, 1)] {
        for d in 1..=20u32 {
            for u in 0..d {
                points += 1;
                if massloss::two_adic_slice_sum(&r, d, u) != massloss::two_adic_slice_closed(&r, d, u) {
                    violations.push(format!("slice identity failed at r={r} d={d} u={u}"));
                }
            }
        }
    }
    json!({
        "name": "dyadic-slices",
        "points": points,
        "violations": violations,
        "passed": violations.is_empty(),
    })
}

fn probe_norm_suite() -> Value {
    use atinv_core::laurent::rat;
    let mut entries = Vec::new();
    let mut violations: Vec<String> = Vec::new();
    for r in [rat(1, 3), rat(1, 2), rat(2, 3), rat(2, 1)] {
        for a in [r.clone(), r.recip()] {
            for d in [2u32, 4, 8, 12, 16, 20] {
                // Internal assertions cross-check the streaming, structural
                // and convolution routes.
                let (_, rep) = massloss::probe_norm_limit(&a, &r, d);
                entries.push(serde_json::to_value(&rep).unwrap());
            }
        }
    }
    // The documented deviation of the simplified display must reproduce.
    let (oracle, rep) = massloss::probe_norm_limit(&rat(1, 2), &rat(1, 2), 2);
    if oracle != rat(11, 8) || rep.simplified_display.as_deref() != Some("9/8") {
        violations.push("the 11/8 vs 9/8 display deviation did not reproduce".into());
    }
    json!({
        "name": "probe-norms",
        "points": entries.len(),
        "violations": violations,
        "passed": violations.is_empty(),
        "reports": entries,
    })
}

pub fn run_verify(suite: &str, seed: u64) -> Result<(Value, bool), String> {
    let run_one = |name: &str| -> Result<Value, String> {
        Ok(match name {
            "variance" => variance_suite(seed),
            "sin-cos" => check_to_value(&verify::check_sin_cos_bounds(&verify::default_theta_grid(), 4)),
            "modulus" => {
                let polys = verify::random_unit_polys(seed, 100, 8);
                let thetas: Vec<f64> = (1..=50).map(|i| i as f64 * 0.01).collect();
                check_to_value(&verify::check_modulus_bounds(&polys, &thetas))
            }
            "tensor-gap" => {
                let rep = verify::check_alternating_tensor_gap(0.25, 64);
                json!({
                    "name": "tensor-gap",
                    "passed": rep.passed(),
                    "violations": rep.violations,
                    "value_first": rep.value_first,
                    "value_second": rep.value_second,
                    "value_tensor": rep.value_tensor,
                    "interleaving_gap": rep.interleaving_gap,
                    "multiplicativity_gap": rep.multiplicativity_gap,
                })
            }
            "ratio-monotonicity" => {
                let grid: Vec<f64> = (1..=8).map(|i| i as f64 / 8.0).collect();
                let a = verify::check_ratio_monotonicity(&grid, 3, 64);
                let b = verify::check_ratio_monotonicity(&grid, 2, 64);
                let violations: Vec<String> =
                    a.violations.iter().chain(b.violations.iter()).cloned().collect();
                json!({
                    "name": "ratio-monotonicity",
                    "points": a.points + b.points,
                    "violations": violations,
                    "passed": a.passed() && b.passed(),
                })
            }
            "growing-scale" => {
                check_to_value(&verify::check_growing_scale_limit(2, &[5, 10, 15, 20], &[0.5, 1.0, 3.0]))
            }
            "dyadic-slices" => dyadic_slices_suite(),
            "probe-norms" => probe_norm_suite(),
            other => return Err(format!("unknown verification suite `{other}`")),
        })
    };

    if suite == "all" {
        let mut reports = Vec::new();
        let mut all = true;
        for name in VERIFY_SUITES.iter().filter(|s| **s != "all") {
            let rep = run_one(name)?;
            all &= rep["passed"].as_bool().unwrap_or(false);
            reports.push(rep);
        }
        Ok((Value::Array(reports), all))
    } else {
        let rep = run_one(suite)?;
        let ok = rep["passed"].as_bool().unwrap_or(false);
        Ok((rep, ok))
    }
}

/// Floating summary of a mass-loss value for quick inspection.
pub fn mass_value_f64(v: &MassLossValue) -> f64 {
    v.exact_value.as_ref().and_then(|q| q.to_f64()).unwrap_or(v.certified.value)
}
