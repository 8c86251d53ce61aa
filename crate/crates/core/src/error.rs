use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {0} is outside the closed domain of the chart")]
    OutsideDomain(Complex64),
    #[error("point {0} coincides with a marked point of the chart")]
    PoleAtMarkedPoint(Complex64),
    #[error("map derivative vanishes at {0}")]
    DegenerateMap(Complex64),
    #[error("jet carries {have} derivatives, {need} required")]
    InsufficientJet { have: usize, need: usize },
    #[error("point {0} coincides with the driving point")]
    PoleAtDriving(Complex64),
    #[error("coincident insertion points {0} and {1}")]
    DiagonalSingularity(Complex64, Complex64),
    #[error("point {0} lies on the branch cut of the chiral field")]
    BranchCutCrossing(Complex64),
    #[error("point {0} coincides with the boundary-condition-changing insertion")]
    InsertionSingularity(Complex64),
    #[error("contour of radius {radius} around {center} reaches a singularity")]
    ContourCollision { center: Complex64, radius: f64 },
    #[error("driving point {0} is too close to a marked point")]
    NearMarkedPoint(f64),
    #[error("invalid time step {0}")]
    BadStep(f64),
    #[error("curve tip could not be recovered at step {0}")]
    TraceInstability(usize),
    #[error("observable stopped: a tracked point was swallowed")]
    Stopped,
    #[error("linear solver failed: {0}")]
    SolverFailure(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
