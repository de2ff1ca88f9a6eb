//! First-person and top-down rendering.

mod first_person;
mod raycast;
mod top_down;

pub use first_person::{render_into, slice_height, Renderer, BORDER_PX, OBJECT_RADIUS};
pub use raycast::{cast_ray, visible_cells, HitSide, RayHit};
pub use top_down::{render_layout_top_down, render_top_down, TopDownStyle};

use std::path::Path;

use image::RgbImage;

pub const FRAME_SIZE: usize = 64;
pub const FRAME_BYTES: usize = FRAME_SIZE * FRAME_SIZE * 3;

pub const CEILING_RGB: [u8; 3] = [70, 74, 92];
pub const FLOOR_RGB: [u8; 3] = [92, 80, 64];
/// Wall faces crossed on an x boundary (facing east/west).
pub const WALL_X_RGB: [u8; 3] = [168, 168, 168];
/// Wall faces crossed on a y boundary (facing north/south).
pub const WALL_Y_RGB: [u8; 3] = [120, 120, 120];

/// 64x64 RGB observation, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    pixels: Box<[u8; FRAME_BYTES]>,
}

impl Default for Frame {
    fn default() -> Self {
        Frame { pixels: Box::new([0; FRAME_BYTES]) }
    }
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Frame(64x64x3)")
    }
}

impl Frame {
    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels[..]
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * FRAME_SIZE + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub(crate) fn put(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = (row * FRAME_SIZE + col) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn to_image(&self) -> RgbImage {
        RgbImage::from_raw(FRAME_SIZE as u32, FRAME_SIZE as u32, self.pixels.to_vec()).expect("frame buffer size")
    }

    pub fn save_png(&self, path: &Path) -> image::ImageResult<()> {
        self.to_image().save(path)
    }
}
