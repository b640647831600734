//! Diffeomorphic deformation machinery on 2D pixel grids.
//!
//! A stationary velocity field is smoothed with a Gaussian filter and
//! exponentiated by scaling and squaring into a deformation field
//! phi(x) = x + u(x) whose Jacobian determinant stays positive. Warping
//! samples images at phi(x) with bilinear (or nearest, for label masks)
//! interpolation.
//!
//! Conventions: vector component 0 displaces along axis 0 (rows), component
//! 1 along axis 1 (columns); smoothing uses reflect padding; sampling clamps
//! out-of-domain coordinates to the border pixel; fields store displacements
//! so the identity map is the zero field.

mod exp;
mod field;
mod jacobian;
mod smooth;
mod warp;

pub use exp::{compose, exp_svf};
pub use field::{DeformField, Frame, FrameSeq, VelocityField};
pub use jacobian::jacobian_det;
pub use smooth::gaussian_smooth;
pub use warp::{warp, WarpMode};
