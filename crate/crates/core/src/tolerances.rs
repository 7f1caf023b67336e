//! Default thresholds. All quantities are computed spectrally, so these sit
//! well above rounding and well below any modelling error.

/// Smallest admissible metric eigenvalue.
pub const ELLIPTICITY: f64 = 1e-8;
/// `g_{αβ} g^{βγ} = δ` residual.
pub const METRIC_INVERSE: f64 = 1e-9;
/// Frame orthonormality and metric agreement between frames.
pub const FRAME: f64 = 1e-9;
/// Distance of the topological charge from ±1.
pub const CHARGE: f64 = 1e-6;
/// Orthogonality of SO(3) / unitarity of SU(2) samples.
pub const ORTHOGONALITY: f64 = 1e-9;
/// `½ tr(s_j R s^k R*) = O_j^k` after lifting.
pub const LIFT: f64 = 1e-9;
/// Smallest admissible spinor norm.
pub const MIN_SPINOR_NORM: f64 = 1e-8;
/// Pauli anticommutation relation.
pub const PAULI: f64 = 1e-10;
/// Christoffel symmetry and metric compatibility.
pub const CHRISTOFFEL: f64 = 1e-8;
/// Relative threshold for dropping Fourier coefficients when a grid field
/// is re-expanded as a trigonometric polynomial.
pub const REEXPANSION_DROP: f64 = 1e-16;
/// Default grid size per axis.
pub const DEFAULT_GRID: usize = 32;
/// Trust-window fraction of the Galerkin cutoff.
pub const TRUST_FRACTION: f64 = 0.5;
/// Eigenvalue multiplicity clustering.
pub const CLUSTER: f64 = 1e-7;
