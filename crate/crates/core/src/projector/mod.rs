//! Synthetic phantoms, cone-beam forward projection and FDK reconstruction
//! for arbitrary projection-matrix trajectories.

mod fdk;
mod forward;
mod phantom;
mod volume;

pub use fdk::{backproject, backproject_onto, fdk_reconstruct, weight_and_filter, BackprojectionWeight};
pub(crate) use fdk::ViewKernel;
pub use forward::forward_project;
pub use phantom::{render_phantom, Ellipsoid, PhantomSpec, HEAD_SCALE_MM};
pub use volume::{raw_paths, Grid, Sinogram, Volume};
