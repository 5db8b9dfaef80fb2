//! Reading scene inputs: COLMAP models, PNG images, PFM depth maps and the
//! scene-parameter file.

mod colmap;
mod params;
mod pfm;

use std::path::Path;

pub use colmap::{
    compute_origin, default_outer_radius, navigation_diameter, parse_colmap, write_colmap, ColmapModel,
    SparsePointCloud, ViewSkeleton,
};
pub use params::{Provenance, SceneParams};
pub use pfm::{decode as decode_pfm, encode as encode_pfm, load_depth, read_pfm, write_pfm, DepthMap, MIN_DEPTH};

use crate::error::{Error, Result};
use crate::model::Image;

/// Loads an 8-bit image as RGB in `[0, 1]`.
pub fn load_image(path: &Path) -> Result<Image> {
    let img = image::open(path)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Image(other),
        })?
        .to_rgb8();
    Ok(Image::from_rgb8(&img))
}

pub fn save_image(image: &Image, path: &Path) -> Result<()> {
    image.to_rgb8().save(path)?;
    Ok(())
}
