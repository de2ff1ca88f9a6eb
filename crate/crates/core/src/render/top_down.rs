use image::{Rgb, RgbImage};

use crate::mazegen::MazeLayout;
use crate::sim::EnvState;

#[derive(Clone, Debug)]
pub struct TopDownStyle {
    pub wall: [u8; 3],
    pub floor: [u8; 3],
    pub agent: [u8; 3],
    pub arrow: [u8; 3],
}

impl Default for TopDownStyle {
    fn default() -> Self {
        TopDownStyle { wall: [40, 40, 48], floor: [200, 200, 190], agent: [255, 255, 255], arrow: [0, 0, 0] }
    }
}

/// Walls, floor and object cells; `scale` pixels per cell.
pub fn render_layout_top_down(layout: &MazeLayout, scale: u32, style: &TopDownStyle) -> RgbImage {
    let n = layout.walls.size() as u32;
    let mut img = RgbImage::new(n * scale, n * scale);
    for (r, row) in layout.walls.rows().enumerate() {
        for (c, &wall) in row.iter().enumerate() {
            fill_cell(&mut img, r as u32, c as u32, scale, if wall { style.wall } else { style.floor });
        }
    }
    for (cell, &rgb) in layout.object_cells.iter().zip(&layout.object_colors) {
        fill_cell(&mut img, cell.row as u32, cell.col as u32, scale, rgb);
    }
    img
}

/// Layout plus the agent: a disc at `position * scale` and a heading arrow.
pub fn render_top_down(state: &EnvState, scale: u32) -> RgbImage {
    let style = TopDownStyle::default();
    let mut img = render_layout_top_down(state.layout(), scale, &style);
    let pose = state.pose();
    let s = scale as f64;
    let (cx, cy) = (pose.position[0] * s, pose.position[1] * s);
    let radius = (state.params().agent_radius * s).max(1.5);

    let len = 0.5 * s;
    let steps = (len * 2.0).ceil() as usize;
    for i in 0..=steps {
        let t = len * i as f64 / steps as f64;
        put(&mut img, cx + pose.heading[0] * t, cy + pose.heading[1] * t, style.arrow);
    }
    let (w, h) = img.dimensions();
    let x0 = (cx - radius).floor().max(0.0) as u32;
    let x1 = ((cx + radius).ceil() as u32).min(w);
    let y0 = (cy - radius).floor().max(0.0) as u32;
    let y1 = ((cy + radius).ceil() as u32).min(h);
    for y in y0..y1 {
        for x in x0..x1 {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            if dx * dx + dy * dy <= radius * radius {
                img.put_pixel(x, y, Rgb(style.agent));
            }
        }
    }
    img
}

fn fill_cell(img: &mut RgbImage, row: u32, col: u32, scale: u32, rgb: [u8; 3]) {
    for y in row * scale..(row + 1) * scale {
        for x in col * scale..(col + 1) * scale {
            img.put_pixel(x, y, Rgb(rgb));
        }
    }
}

fn put(img: &mut RgbImage, x: f64, y: f64, rgb: [u8; 3]) {
    let (w, h) = img.dimensions();
    if x >= 0.0 && y >= 0.0 && (x as u32) < w && (y as u32) < h {
        img.put_pixel(x as u32, y as u32, Rgb(rgb));
    }
}
