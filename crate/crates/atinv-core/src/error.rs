use thiserror::Error;

/// Errors surfaced by family construction and the invariant engines.
///
/// Contract violations by callers (negative coefficients where forbidden,
/// non-normalized inputs, out-of-range orders) panic instead; these variants
/// cover data-dependent conditions a driver is expected to handle.
#[derive(Debug, Error)]
pub enum Error {
    #[error("scale product overflows the exponent range at index {index}")]
    ScaleOverflow { index: u32 },

    #[error("witness angle denominator is not representable at k = {k}")]
    WitnessOverflow { k: u32 },

    #[error("witness list has no entry for k = {k}")]
    WitnessMissing { k: u32 },

    #[error("support size {support} exceeds the materialization cap {cap}")]
    MaterializationCap { support: usize, cap: usize },

    #[error("invalid rule: {0}")]
    InvalidRule(String),

    #[error("operation needs a single shared scale rule across tensor factors")]
    MixedScale,

    #[error("mass-loss computation needs exactly materializable ratio-form terms")]
    ExactTermsUnavailable,

    #[error("inverse distinguishing needs a constant scale rule")]
    NonConstantScale,

    #[error("unsupported family for this operation: {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
