//! Experiments checking the regularity results on sampled and exact
//! second-moment quantities.

pub mod checks;
pub mod dims;
pub mod modulus;
pub mod planar_cell;
pub mod slnd;
pub mod stats;

pub use checks::{scaling_check, truncation_study, ScalingReport, TruncationReport};
pub use dims::{dimensions, DimensionReport, LevelSetStatus};
pub use modulus::{estimate_grid_moduli, estimate_lil, estimate_umc, BandSplit, ModulusReport, Normalizer};
pub use planar_cell::{alpha_argmin, alpha_theta, planar_cell_curves, planar_cell_directional_modulus, Curve, Family};
pub use slnd::{slnd_random, slnd_ratio, slnd_scaling, SlndReport};
