use thiserror::Error;

/// One of the three fundamental cycles of the torus, running along a
/// coordinate axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cycle {
    X1,
    X2,
    X3,
}

impl Cycle {
    pub fn from_axis(axis: usize) -> Self {
        match axis {
            0 => Cycle::X1,
            1 => Cycle::X2,
            _ => Cycle::X3,
        }
    }

    pub fn axis(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Cycle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "x{}", self.axis() + 1)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("symbol is not elliptic: smallest metric eigenvalue {min_eigenvalue:.3e}")]
    NotElliptic { min_eigenvalue: f64 },
    #[error("topological charge formulas disagree or leave ±1 (worst deviation {deviation:.3e})")]
    ChargeInconsistent { deviation: f64 },
    #[error("frames induce different metrics (max deviation {deviation:.3e})")]
    MetricMismatch { deviation: f64 },
    #[error("frames have opposite topological charge; no SU(2) gauge relates them")]
    ChargeMismatch,
    #[error("spin structures differ: SU(2) lift changes sign around the {cycle} cycle")]
    SpinStructureMismatch { cycle: Cycle },
    #[error("SO(3)→SU(2) lift is ill-conditioned at node {node}: {reason}")]
    LiftIllConditioned { node: usize, reason: String },
    #[error("spinor vanishes (min norm {min_norm:.3e})")]
    VanishingSpinor { min_norm: f64 },
    #[error("coefficient frequency {frequency} exceeds 2M = {limit}")]
    TruncationTooSmall { frequency: i32, limit: i32 },
    #[error("weight is not positive (min {min:.3e})")]
    NonpositiveWeight { min: f64 },
    #[error("eigensolver failed: {0}")]
    ConvergenceFailure(String),
    #[error("invalid problem: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
