use thiserror::Error;

/// Errors produced by the scheduling library.
#[derive(Debug, Error)]
pub enum Error {
    /// A trajectory file is structurally unusable (e.g. truncated header).
    #[error("parse error in {path}: {reason}")]
    Parse { path: String, reason: String },

    /// The fitted bounding box has zero width or height.
    #[error("degenerate bounding box: all points collapse on at least one axis")]
    DegenerateBox,

    /// Not enough observations to compute the requested quantity.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A task references a region outside the configured grid.
    #[error("task {task} has invalid location {region} (grid has {regions} regions)")]
    InvalidTask {
        task: u32,
        region: u32,
        regions: u32,
    },

    /// A task whose deadline already passed was handed to the scheduler.
    #[error("task {task} expired: deadline {deadline} is before slot {now}")]
    ExpiredTask { task: u32, deadline: u32, now: u32 },

    /// Configuration rejected before any work started.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
