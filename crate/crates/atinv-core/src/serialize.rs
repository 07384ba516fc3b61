//! Canonical JSON forms for family specs and witness rules.
//!
//! Rationals travel as `{"num": p, "den": q}` pairs, polynomials as sorted
//! `[exponent, ratio]` lists, so specs round-trip losslessly through the
//! files the command-line driver reads and writes.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::engine::WitnessRule;
use crate::error::{Error, Result};
use crate::families::{FamilySpec, GeneratorRule, ScaleRule};
use crate::laurent::{ExactPoly, RationalAngle};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RatioDef {
    pub num: i64,
    pub den: i64,
}

impl RatioDef {
    pub fn to_rational(self) -> Result<BigRational> {
        if self.den == 0 {
            return Err(Error::InvalidRule("rational with zero denominator".into()));
        }
        Ok(BigRational::new(BigInt::from(self.num), BigInt::from(self.den)))
    }

    pub fn from_rational(r: &BigRational) -> Result<Self> {
        let num = r.numer().to_i64();
        let den = r.denom().to_i64();
        match (num, den) {
            (Some(num), Some(den)) => Ok(Self { num, den }),
            _ => Err(Error::InvalidRule("rational exceeds the serializable range".into())),
        }
    }
}

pub type PolyDef = Vec<(i64, RatioDef)>;

fn poly_to_def(p: &ExactPoly) -> Result<PolyDef> {
    p.iter().map(|(e, c)| Ok((*e, RatioDef::from_rational(c)?))).collect()
}

fn poly_from_def(def: &PolyDef) -> Result<ExactPoly> {
    let mut pairs = Vec::with_capacity(def.len());
    for (e, c) in def {
        pairs.push((*e, c.to_rational()?));
    }
    Ok(ExactPoly::from_pairs(pairs))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleDef {
    #[serde(default)]
    pub prefix: Vec<u64>,
    #[serde(default)]
    pub slope: u64,
    pub offset: u64,
}

impl ScaleDef {
    pub fn to_rule(&self) -> Result<ScaleRule> {
        ScaleRule::with_prefix(self.prefix.clone(), self.slope, self.offset)
    }

    pub fn from_rule(rule: &ScaleRule) -> Self {
        Self { prefix: rule.prefix().to_vec(), slope: rule.slope(), offset: rule.offset() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorDef {
    #[serde(default)]
    pub prefix: Vec<PolyDef>,
    pub tail: PolyDef,
}

impl GeneratorDef {
    pub fn to_rule(&self) -> Result<GeneratorRule> {
        let mut prefix = Vec::with_capacity(self.prefix.len());
        for p in &self.prefix {
            prefix.push(poly_from_def(p)?);
        }
        GeneratorRule::with_prefix(prefix, poly_from_def(&self.tail)?)
    }

    pub fn from_rule(rule: &GeneratorRule) -> Result<Self> {
        let mut prefix = Vec::with_capacity(rule.prefix().len());
        for p in rule.prefix() {
            prefix.push(poly_to_def(p)?);
        }
        Ok(Self { prefix, tail: poly_to_def(rule.tail())? })
    }
}

/// Canonical JSON form of a family spec (versioned through the config that
/// carries it).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyDef {
    Divisible { gen: GeneratorDef, scale: ScaleDef, r: RatioDef },
    Rational { gen: GeneratorDef, scale: ScaleDef, r: RatioDef },
    Explicit { gens: Vec<PolyDef>, scale: ScaleDef },
    Tensor { left: Box<FamilyDef>, right: Box<FamilyDef> },
    Telescoped { inner: Box<FamilyDef>, stride: u64, offset: i64 },
}

impl FamilyDef {
    pub fn to_spec(&self) -> Result<FamilySpec> {
        match self {
            Self::Divisible { gen, scale, r } => {
                FamilySpec::divisible(gen.to_rule()?, scale.to_rule()?, r.to_rational()?)
            }
            Self::Rational { gen, scale, r } => {
                FamilySpec::rational(gen.to_rule()?, scale.to_rule()?, r.to_rational()?)
            }
            Self::Explicit { gens, scale } => {
                let mut polys = Vec::with_capacity(gens.len());
                for g in gens {
                    polys.push(poly_from_def(g)?);
                }
                FamilySpec::explicit(polys, scale.to_rule()?)
            }
            Self::Tensor { left, right } => Ok(FamilySpec::tensor(left.to_spec()?, right.to_spec()?)),
            Self::Telescoped { inner, stride, offset } => {
                FamilySpec::telescope(inner.to_spec()?, *stride, *offset)
            }
        }
    }

    pub fn from_spec(spec: &FamilySpec) -> Result<Self> {
        Ok(match spec {
            FamilySpec::Divisible { gen, scale, r } => Self::Divisible {
                gen: GeneratorDef::from_rule(gen)?,
                scale: ScaleDef::from_rule(scale),
                r: RatioDef::from_rational(r)?,
            },
            FamilySpec::Rational { gen, scale, r } => Self::Rational {
                gen: GeneratorDef::from_rule(gen)?,
                scale: ScaleDef::from_rule(scale),
                r: RatioDef::from_rational(r)?,
            },
            FamilySpec::Explicit { gens, scale } => Self::Explicit {
                gens: gens.iter().map(poly_to_def).collect::<Result<_>>()?,
                scale: ScaleDef::from_rule(scale),
            },
            FamilySpec::Tensor { left, right } => Self::Tensor {
                left: Box::new(Self::from_spec(left)?),
                right: Box::new(Self::from_spec(right)?),
            },
            FamilySpec::Telescoped { inner, stride, offset } => Self::Telescoped {
                inner: Box::new(Self::from_spec(inner)?),
                stride: *stride,
                offset: *offset,
            },
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum WitnessDef {
    Canonical,
    Scaled { j: u64 },
    NextScale,
    Explicit { angles: Vec<RatioDef> },
}

impl Default for WitnessDef {
    fn default() -> Self {
        Self::Canonical
    }
}

impl WitnessDef {
    pub fn to_rule(&self) -> Result<WitnessRule> {
        Ok(match self {
            Self::Canonical => WitnessRule::Canonical,
            Self::Scaled { j } => {
                if *j == 0 {
                    return Err(Error::InvalidRule("witness multiplier must be positive".into()));
                }
                WitnessRule::Scaled { j: *j }
            }
            Self::NextScale => WitnessRule::NextScale,
            Self::Explicit { angles } => {
                let mut out = Vec::with_capacity(angles.len());
                for a in angles {
                    if a.den == 0 {
                        return Err(Error::InvalidRule("witness angle with zero denominator".into()));
                    }
                    out.push(RationalAngle::new(a.num, a.den));
                }
                WitnessRule::Explicit(out)
            }
        })
    }
}
