use thiserror::Error;

/// Every failure the estimators can report.
///
/// Each variant maps to a stable machine-readable code via [`CalibError::code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("degenerate circular mean (resultant length {0:e})")]
    DegenerateMean(f64),
    #[error("vectors are antiparallel")]
    Antiparallel,
    #[error("too few samples: need {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("timestamps not strictly increasing at index {0}")]
    DuplicateTimestamp(usize),
    #[error("vehicle at standstill at t={0}")]
    Standstill(f64),
    #[error("t={t} outside spline domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("no valid data: {0}")]
    NoValidData(&'static str),
    #[error("vanishing point behind the camera")]
    BehindCamera,
    #[error("arcsin argument out of domain")]
    ArcsinDomain,
    #[error("all line-pair hypotheses are degenerate")]
    DegenerateHypothesis,
    #[error("plane is not a ground plane (normal z-component {0})")]
    NotGroundPlane(f64),
    #[error("rank-deficient point set")]
    RankDeficient,
    #[error("collinear configuration")]
    Collinear,
    #[error("no yaw candidate has consensus")]
    NoConsensus,
    #[error("yaw is unobservable from the given points")]
    Unobservable,
    #[error("static test indeterminate: no informative point pairs")]
    Indeterminate,
    #[error("no straight segments in the route")]
    NoStraightSegments,
    #[error("no static objects found")]
    NoStaticObjects,
    #[error("total confidence is zero")]
    ZeroConfidence,
    #[error("route plan is discontinuous at primitive {0}")]
    DiscontinuousPlan(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CalibError {
    /// Stable identifier used in machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            CalibError::InvalidInput(_) => "invalid_input",
            CalibError::EmptyInput(_) => "empty_input",
            CalibError::DegenerateMean(_) => "degenerate_mean",
            CalibError::Antiparallel => "antiparallel",
            CalibError::TooFewSamples { .. } => "too_few_samples",
            CalibError::DuplicateTimestamp(_) => "duplicate_timestamp",
            CalibError::Standstill(_) => "standstill",
            CalibError::OutOfDomain { .. } => "out_of_domain",
            CalibError::NoValidData(_) => "no_valid_data",
            CalibError::BehindCamera => "behind_camera",
            CalibError::ArcsinDomain => "arcsin_domain",
            CalibError::DegenerateHypothesis => "degenerate_hypothesis",
            CalibError::NotGroundPlane(_) => "not_ground_plane",
            CalibError::RankDeficient => "rank_deficient",
            CalibError::Collinear => "collinear",
            CalibError::NoConsensus => "no_consensus",
            CalibError::Unobservable => "unobservable",
            CalibError::Indeterminate => "indeterminate",
            CalibError::NoStraightSegments => "no_straight_segments",
            CalibError::NoStaticObjects => "no_static_objects",
            CalibError::ZeroConfidence => "zero_confidence",
            CalibError::DiscontinuousPlan(_) => "discontinuous_plan",
            CalibError::Parse(_) => "parse",
            CalibError::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for CalibError {
    fn from(e: std::io::Error) -> Self {
        CalibError::Io(e.to_string())
    }
}

impl From<csv::Error> for CalibError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CalibError::Io(e.to_string())
        } else {
            CalibError::Parse(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, CalibError>;
