use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A hole in the sample stream wider than the interpolation limit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Gap {
    /// Timestamp of the last sample before the hole (s).
    pub start: f64,
    /// Timestamp of the first sample after the hole (s).
    pub end: f64,
}

impl fmt::Display for Gap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("line {line}: {message}")]
    Row { line: usize, message: String },

    #[error("time does not strictly increase at line {line} ({prev} -> {t})")]
    NonMonotoneTime { line: usize, prev: f64, t: f64 },

    #[error("{} gap(s) exceed max_gap {max_gap} s: {}", gaps.len(), fmt_gaps(gaps))]
    GapTooLarge { max_gap: f64, gaps: Vec<Gap> },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("recorded leader ends at t={leader_end} s but the horizon needs t={needed} s")]
    LeaderTooShort { leader_end: f64, needed: f64 },

    #[error("virtual collision at t={t} s (spacing {spacing} m)")]
    Collision { t: f64, spacing: f64 },

    #[error("segment `{id}`: {source}")]
    Segment {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_gaps(gaps: &[Gap]) -> String {
    gaps.iter().map(Gap::to_string).collect::<Vec<_>>().join(", ")
}

impl Error {
    /// Stable, machine-readable error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "schema",
            Error::Row { .. } => "row",
            Error::NonMonotoneTime { .. } => "structure",
            Error::GapTooLarge { .. } => "gap",
            Error::InvalidInput(_) => "invalid_input",
            Error::Data(_) => "data",
            Error::LeaderTooShort { .. } => "leader_too_short",
            Error::Collision { .. } => "collision",
            Error::Segment { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn in_segment(self, id: &str) -> Self {
        match self {
            e @ Error::Segment { .. } => e,
            e => Error::Segment { id: id.to_string(), source: Box::new(e) },
        }
    }
}
