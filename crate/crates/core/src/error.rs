use thiserror::Error;

/// Errors raised by the model, analysis and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),
    #[error("|f| = {0} exceeds 1; relabel H and V instead of passing |f| > 1")]
    EntanglementOutOfRange(f64),
    #[error("invalid polarizer transmissions: eps_par = {eps_par}, eps_perp = {eps_perp} (need 0 <= eps_perp <= eps_par <= 1)")]
    InvalidTransmission { eps_par: f64, eps_perp: f64 },
    #[error("polarizer is absent; use pass_absent_probability")]
    PolarizerAbsent,
    #[error("visibility curve is identically zero")]
    DegenerateCurve,
    #[error("invalid efficiency model: {0}")]
    InvalidEfficiency(&'static str),
    #[error("missing count record for setting {0}")]
    MissingSetting(&'static str),
    #[error("duplicate count record for setting {0}")]
    DuplicateSetting(&'static str),
    #[error("count record for setting {0} has non-positive duration")]
    ZeroDuration(&'static str),
    #[error("no CH violation at unit efficiency")]
    NoViolationAtUnitEfficiency,
    #[error("invalid geometry: {0} must be strictly positive and finite")]
    InvalidGeometry(&'static str),
    #[error("detection rate must be strictly positive, got {0}")]
    NonPositiveRate(f64),
    #[error("event stream for channel {0} is not sorted")]
    UnsortedStream(u8),
    #[error("invalid detector model: {0}")]
    InvalidDetector(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
