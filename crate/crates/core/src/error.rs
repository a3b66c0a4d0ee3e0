use std::path::PathBuf;

use crate::mesh::{Axis, Side};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{file}: line {line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("element {element} references vertex {vertex}, but the mesh has {count} vertices")]
    VertexOutOfRange {
        element: usize,
        vertex: i64,
        count: usize,
    },

    #[error("element {0} has (near) zero area")]
    DegenerateElement(usize),

    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonConforming(usize, usize),

    #[error("mesh has no triangles")]
    EmptyMesh,

    #[error("point ({x}, {y}) is not inside the mesh")]
    PointOutsideMesh { x: f64, y: f64 },

    #[error("{side:?} trace along {axis:?} from ({x}, {y}) stalled at coordinate {at} inside the domain")]
    TraceGap {
        x: f64,
        y: f64,
        axis: Axis,
        side: Side,
        at: f64,
    },

    #[error("polynomial degree {0} is not supported (1..=8)")]
    UnsupportedDegree(usize),

    #[error("reference point ({r}, {s}) lies outside the reference triangle")]
    OutsideReference { r: f64, s: f64 },

    #[error("Gauss-Jacobi rule needs at least one point")]
    EmptyRule,

    #[error("Jacobi weight exponents ({0}, {1}) must both exceed -1")]
    InvalidJacobiExponents(f64, f64),

    #[error("fractional integral order {0} outside (0, 1]")]
    InvalidGamma(f64),

    #[error("fractional order {0} outside (1, 2]")]
    InvalidAlpha(f64),

    #[error("interval [{lo}, {hi}] is not contained in element {element}")]
    IntervalOutsideElement { element: usize, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no {side:?} fractional matrix assembled for direction {axis:?}")]
    MissingMatrix { axis: Axis, side: Side },

    #[error("non-finite state after step ending at t = {t} (dt = {dt})")]
    Unstable { t: f64, dt: f64 },

    #[error("invalid time stepping parameters: {0}")]
    InvalidTimeSpec(String),

    #[error("invalid case configuration: {0}")]
    InvalidConfig(String),

    #[error("mesh sweep is not refining: h_max {next} follows {prev}")]
    NonMonotoneSweep { prev: f64, next: f64 },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
