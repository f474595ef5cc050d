//! Cube-to-RGB registration.

mod homography;
mod warp;

pub use homography::{
    estimate_homography, load_correspondences, parse_correspondences, Correspondence, Homography,
    HomographyEstimate, CONDITION_THRESHOLD, MIN_ABS_DET,
};
pub use warp::{register_cube_to_rgb, warp_cube, warp_rgb};
