//! Visualizations of cluster labelings.

use crate::error::{Error, Result};
use crate::metrics::boundary_pixels;
use crate::raster::Image;

/// Stable color for a cluster id.
pub fn palette(cluster: u32) -> [u8; 3] {
    // splitmix64 finalizer
    let mut z = (cluster as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    // keep colors away from black so boundaries stay visible
    [(z & 0xff) as u8 | 0x30, ((z >> 8) & 0xff) as u8 | 0x30, ((z >> 16) & 0xff) as u8 | 0x30]
}

fn check(image: &Image, labels: &[u32]) -> Result<()> {
    if labels.len() != image.width() * image.height() {
        return Err(Error::Dimension(format!(
            "{} labels for a {}x{} image",
            labels.len(),
            image.width(),
            image.height()
        )));
    }
    Ok(())
}

/// Every pixel painted with its cluster color.
pub fn color_fill(width: usize, height: usize, labels: &[u32]) -> Result<Image> {
    if labels.len() != width * height {
        return Err(Error::Dimension("label count does not match grid".into()));
    }
    let data = labels.iter().flat_map(|&l| palette(l)).collect();
    Image::new(width, height, data)
}

/// The image with cluster boundaries drawn in white.
pub fn boundary_overlay(image: &Image, labels: &[u32]) -> Result<Image> {
    check(image, labels)?;
    let boundary = boundary_pixels(image.width(), image.height(), labels)?;
    let mut out = image.clone();
    for y in 0..image.height() {
        for x in 0..image.width() {
            if boundary.contains(x, y) {
                out.set_pixel(x, y, [255, 255, 255]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_is_stable() {
        assert_eq!(palette(3), palette(3));
        assert_ne!(palette(3), palette(4));
    }

    #[test]
    fn overlay_marks_boundaries_only() {
        let img = Image::filled(4, 1, [0, 0, 0]).unwrap();
        let out = boundary_overlay(&img, &[0, 0, 1, 1]).unwrap();
        assert_eq!(out.pixel(0, 0), [0, 0, 0]);
        assert_eq!(out.pixel(1, 0), [255, 255, 255]);
        assert_eq!(out.pixel(2, 0), [255, 255, 255]);
    }
}
