use super::raycast::{cast_ray, HitSide};
use super::{Frame, CEILING_RGB, FLOOR_RGB, FRAME_SIZE, WALL_X_RGB, WALL_Y_RGB};
use crate::config::CameraParams;
use crate::mazegen::PALETTE;
use crate::sim::{AgentPose, EnvState};

/// Width of the target-color prompt frame.
pub const BORDER_PX: usize = 2;
/// World radius of object billboards; objects rest on the floor.
pub const OBJECT_RADIUS: f64 = 0.25;

const MAX_OBJECTS: usize = PALETTE.len();

/// Projected wall slice height in pixels for a perpendicular distance,
/// clamped to the frame height.
pub fn slice_height(camera: &CameraParams, perp_distance: f64) -> f64 {
    let h = FRAME_SIZE as f64 * camera.wall_height / (perp_distance * 2.0 * camera.half_fov_tan());
    h.clamp(0.0, FRAME_SIZE as f64)
}

/// Raycasting renderer. Owns its frame and depth buffers, so steady-state
/// rendering does not allocate.
#[derive(Clone, Debug)]
pub struct Renderer {
    camera: CameraParams,
    frame: Frame,
    depth: [f64; FRAME_SIZE],
}

impl Default for Renderer {
    fn default() -> Self {
        Renderer::new(CameraParams::default())
    }
}

impl Renderer {
    pub fn new(camera: CameraParams) -> Self {
        assert!(
            camera.horizontal_fov_deg > 0.0 && camera.horizontal_fov_deg < 180.0,
            "fov must lie in (0, 180) degrees"
        );
        Renderer { camera, frame: Frame::default(), depth: [0.0; FRAME_SIZE] }
    }

    pub fn camera(&self) -> &CameraParams {
        &self.camera
    }

    pub fn render(&mut self, state: &EnvState) -> &Frame {
        render_into(&self.camera, state, &mut self.frame, &mut self.depth);
        &self.frame
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// Perpendicular wall distance per column from the last render.
    pub fn depth(&self) -> &[f64; FRAME_SIZE] {
        &self.depth
    }
}

/// Reentrant variant: renders into caller-owned buffers.
pub fn render_into(camera: &CameraParams, state: &EnvState, frame: &mut Frame, depth: &mut [f64; FRAME_SIZE]) {
    let pose = state.pose();
    let walls = &state.layout().walls;
    let tan = camera.half_fov_tan();
    let right = pose.right();
    let size = FRAME_SIZE as f64;
    let horizon = size / 2.0;

    for col in 0..FRAME_SIZE {
        let k = (2.0 * (col as f64 + 0.5) / size - 1.0) * tan;
        let dir = [pose.heading[0] + right[0] * k, pose.heading[1] + right[1] * k];
        let hit = cast_ray(walls, pose.position, dir).expect("nonzero camera ray");
        let d = hit.t.max(camera.near_clip);
        depth[col] = d;
        let scale = size / (d * 2.0 * tan);
        let top = horizon - (camera.wall_height - camera.eye_height) * scale;
        let bottom = horizon + camera.eye_height * scale;
        let wall_rgb = match hit.side {
            HitSide::X => WALL_X_RGB,
            HitSide::Y => WALL_Y_RGB,
        };
        for row in 0..FRAME_SIZE {
            let y = row as f64 + 0.5;
            let rgb = if y < top {
                CEILING_RGB
            } else if y < bottom {
                wall_rgb
            } else {
                FLOOR_RGB
            };
            frame.put(row, col, rgb);
        }
    }

    draw_objects(camera, state, pose, frame, depth);

    let border = state.target_color();
    for row in 0..FRAME_SIZE {
        for col in 0..FRAME_SIZE {
            let edge = row < BORDER_PX || col < BORDER_PX || row >= FRAME_SIZE - BORDER_PX || col >= FRAME_SIZE - BORDER_PX;
            if edge {
                frame.put(row, col, border);
            }
        }
    }
}

fn draw_objects(camera: &CameraParams, state: &EnvState, pose: &AgentPose, frame: &mut Frame, depth: &[f64; FRAME_SIZE]) {
    let layout = state.layout();
    let n = layout.n_objects().min(MAX_OBJECTS);
    let mut order = [(0.0f64, 0usize); MAX_OBJECTS];
    let mut visible = 0;
    for i in 0..n {
        let [ahead, _] = pose.to_agent_frame(state.object_center(i));
        if ahead > camera.near_clip {
            order[visible] = (ahead, i);
            visible += 1;
        }
    }
    let order = &mut order[..visible];
    // Far to near, so nearer billboards paint over farther ones.
    order.sort_by(|a, b| b.0.total_cmp(&a.0));

    let size = FRAME_SIZE as f64;
    let tan = camera.half_fov_tan();
    for &(ahead, i) in order.iter() {
        let [_, lateral] = pose.to_agent_frame(state.object_center(i));
        let scale = size / (ahead * 2.0 * tan);
        let cx = size / 2.0 + lateral * scale;
        let cy = size / 2.0 + (camera.eye_height - OBJECT_RADIUS) * scale;
        let r = OBJECT_RADIUS * scale;
        let rgb = layout.object_colors[i];
        let c0 = (cx - r).floor().max(0.0) as usize;
        let c1 = ((cx + r).ceil().min(size)) as usize;
        let r0 = (cy - r).floor().max(0.0) as usize;
        let r1 = ((cy + r).ceil().min(size)) as usize;
        for col in c0..c1 {
            if ahead >= depth[col] {
                continue;
            }
            let dx = col as f64 + 0.5 - cx;
            for row in r0..r1 {
                let dy = row as f64 + 0.5 - cy;
                if dx * dx + dy * dy <= r * r {
                    frame.put(row, col, rgb);
                }
            }
        }
    }
}
