//! Numerics for the kicked Harper family `F_{α,β} = H_α ∘ V_β` of
//! area-preserving torus maps, where `H_α(x,y) = (x + α sin 2πy, y)` and
//! `V_β(x,y) = (x, y + β sin 2πx)`.
//!
//! The map arithmetic, orbit engine, non-twist map and flow field are
//! generic over [`Real`] (`f32` or `f64`). Rotation-set, diffusion,
//! certification and integrator code works in `f64`.

pub mod certify;
pub mod diffusion;
pub mod error;
pub mod flows;
pub mod map;
pub mod nontwist;
pub mod orbits;
pub mod point;
pub mod rotset;
pub mod scalar;
pub mod seeds;

pub use error::{Error, Result};
pub use map::{
    apply_symmetry, fixed_points, FixedPointKind, FixedPointReport, Jacobian2, Params, Symmetry,
};
pub use orbits::{
    detect_half_line_crossing, iterate_stats, mean_rotation_vector, periodic_construction,
    OrbitStats, RationalRotation,
};
pub use point::Point;
pub use rotset::ConvexPolygon;
pub use scalar::Real;

pub type Params64 = Params<f64>;
pub type Params32 = Params<f32>;
pub type Point64 = Point<f64>;
pub type Point32 = Point<f32>;
pub type Jacobian64 = Jacobian2<f64>;
