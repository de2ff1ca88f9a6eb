//! Independent reference implementations shared by the integration tests
//! and the acceptance suite. None of these call into the code they check.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use memmaze::grid::{Cell, WallGrid};
use memmaze::probe::Mlp;

/// Unit-cost Dijkstra over 4-connected floor cells.
pub fn dijkstra(walls: &WallGrid, start: Cell) -> Vec<Option<u32>> {
    let n = walls.size() as i32;
    let idx = |c: Cell| (c.row * n + c.col) as usize;
    let mut dist = vec![None; (n * n) as usize];
    if !walls.is_floor(start) {
        return dist;
    }
    let mut heap = BinaryHeap::from([Reverse((0u32, start.row, start.col))]);
    while let Some(Reverse((d, r, c))) = heap.pop() {
        let cell = Cell::new(r, c);
        if dist[idx(cell)].is_some() {
            continue;
        }
        dist[idx(cell)] = Some(d);
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let next = Cell::new(r + dr, c + dc);
            if next.row >= 0 && next.col >= 0 && next.row < n && next.col < n && walls.is_floor(next) && dist[idx(next)].is_none() {
                heap.push(Reverse((d + 1, next.row, next.col)));
            }
        }
    }
    dist
}

/// First wall cell along `origin + t * dir`, by intersecting the ray with
/// every wall square (slab method) and keeping the smallest entry `t`.
pub fn analytic_ray(walls: &WallGrid, origin: [f64; 2], dir: [f64; 2]) -> (Cell, f64) {
    let mut best: Option<(f64, Cell)> = None;
    for cell in all_cells(walls).filter(|&c| walls.is_wall(c)) {
        let lo = [cell.col as f64, cell.row as f64];
        let mut enter = f64::NEG_INFINITY;
        let mut exit = f64::INFINITY;
        for k in 0..2 {
            if dir[k] == 0.0 {
                if origin[k] < lo[k] || origin[k] >= lo[k] + 1.0 {
                    enter = f64::INFINITY;
                }
                continue;
            }
            let a = (lo[k] - origin[k]) / dir[k];
            let b = (lo[k] + 1.0 - origin[k]) / dir[k];
            enter = enter.max(a.min(b));
            exit = exit.min(a.max(b));
        }
        if enter <= exit && exit > 0.0 {
            let t = enter.max(0.0);
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, cell));
            }
        }
    }
    let (t, cell) = best.expect("the border ring stops every ray");
    (cell, t)
}

pub fn all_cells(walls: &WallGrid) -> impl Iterator<Item = Cell> {
    let n = walls.size() as i32;
    (0..n).flat_map(move |r| (0..n).map(move |c| Cell::new(r, c)))
}

/// `point` in the frame of an agent at `position` facing `angle`:
/// x ahead, y to the right, via an explicit rotation by `-angle`.
pub fn rigid_transform(position: [f64; 2], angle: f64, point: [f64; 2]) -> [f64; 2] {
    let (s, c) = (-angle).sin_cos();
    let d = [point[0] - position[0], point[1] - position[1]];
    [c * d[0] - s * d[1], s * d[0] + c * d[1]]
}

/// Scalar loop forward pass of the probe MLP, row by row.
pub fn reference_forward(m: &Mlp<f64>, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            let mut h = row.clone();
            for layer in &m.hidden {
                let width = layer.b.len();
                let mut z = vec![0.0; width];
                for (j, zj) in z.iter_mut().enumerate() {
                    *zj = layer.b[j] + h.iter().enumerate().map(|(i, &hi)| hi * layer.w[[i, j]]).sum::<f64>();
                }
                let mean = z.iter().sum::<f64>() / width as f64;
                let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
                let sd = (var + m.ln_eps).sqrt();
                h = (0..width)
                    .map(|j| {
                        let y = (z[j] - mean) / sd * layer.gamma[j] + layer.beta[j];
                        if y > 0.0 {
                            y
                        } else {
                            y.exp() - 1.0
                        }
                    })
                    .collect();
            }
            (0..m.head_b.len()).map(|k| m.head_b[k] + h.iter().enumerate().map(|(i, &hi)| hi * m.head_w[[i, k]]).sum::<f64>()).collect()
        })
        .collect()
}

/// Mean of `-y log sigmoid(x) - (1 - y) log(1 - sigmoid(x))`.
pub fn reference_bce(logits: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for (lr, tr) in logits.iter().zip(targets) {
        for (&x, &y) in lr.iter().zip(tr) {
            let p = 1.0 / (1.0 + (-x).exp());
            total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            count += 1.0;
        }
    }
    total / count
}

/// Squared distance between predicted and true 2D points, averaged over points.
pub fn reference_point_mse(pred: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut points = 0.0;
    for (pr, tr) in pred.iter().zip(targets) {
        for (p, t) in pr.chunks(2).zip(tr.chunks(2)) {
            total += (p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2);
            points += 1.0;
        }
    }
    total / points
}

/// Which loss a gradient check exercises.
#[derive(Clone, Copy, Debug)]
pub enum CheckLoss {
    Bce,
    PointMse,
}

/// Compares `Mlp::backward` with central finite differences of the
/// reference forward pass and loss on `samples` parameters spread over every
/// parameter tensor. Returns the largest relative error.
pub fn gradient_check(loss: CheckLoss, width: usize, samples: usize, seed: u64) -> f64 {
    use memmaze::probe::mlp::{bce_with_logits, point_mse};
    use ndarray::Array2;

    let (input, output, rows) = (6, 4, 5);
    let mut model = Mlp::<f64>::new(input, width, 4, output, 1e-3, seed, false);
    // Non-trivial affine LN parameters so their gradients are exercised.
    let mut k = seed;
    let mut next = || {
        k = memmaze::rng::mix64(k);
        (k >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for layer in &mut model.hidden {
        layer.gamma.mapv_inplace(|_| 1.0 + 0.5 * next());
        layer.beta.mapv_inplace(|_| 0.5 * next());
    }
    model.head_b.mapv_inplace(|_| 0.1 * next());
    let x: Vec<Vec<f64>> = (0..rows).map(|_| (0..input).map(|_| 2.0 * next()).collect()).collect();
    let y: Vec<Vec<f64>> = match loss {
        CheckLoss::Bce => (0..rows).map(|_| (0..output).map(|_| if next() > 0.0 { 1.0 } else { 0.0 }).collect()).collect(),
        CheckLoss::PointMse => (0..rows).map(|_| (0..output).map(|_| next()).collect()).collect(),
    };
    let reference_loss = |m: &Mlp<f64>| {
        let out = reference_forward(m, &x);
        match loss {
            CheckLoss::Bce => reference_bce(&out, &y),
            CheckLoss::PointMse => reference_point_mse(&out, &y),
        }
    };

    let xa = Array2::from_shape_fn((rows, input), |(r, c)| x[r][c]);
    let ya = Array2::from_shape_fn((rows, output), |(r, c)| y[r][c]);
    let (out, trace) = model.forward_trace(xa.view());
    let (_, d_out) = match loss {
        CheckLoss::Bce => bce_with_logits(out.view(), ya.view()),
        CheckLoss::PointMse => point_mse(out.view(), ya.view()),
    };
    let mut grads = model.zeros_like();
    model.backward(&trace, d_out.view(), &mut grads);
    let analytic: Vec<Vec<f64>> = grads.params().iter().map(|p| p.to_vec()).collect();

    let tensors = analytic.len();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for s in 0..samples {
        let t = s % tensors;
        let len = analytic[t].len();
        let i = (memmaze::rng::mix64(seed ^ (s as u64 * 0x9E37)) as usize) % len;
        let orig = model.params()[t][i];
        model.params_mut()[t][i] = orig + h;
        let up = reference_loss(&model);
        model.params_mut()[t][i] = orig - h;
        let down = reference_loss(&model);
        model.params_mut()[t][i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[t][i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// Expected `(key, dtype, shape)` of a trajectory with `t` actions, an
/// `n x n` layout and `k` objects.
pub fn expected_schema(t: usize, n: usize, k: usize) -> Vec<(&'static str, &'static str, Vec<u64>)> {
    let t = t as u64 + 1;
    let (n, k) = (n as u64, k as u64);
    vec![
        ("image", "|u1", vec![t, 64, 64, 3]),
        ("action", "|u1", vec![t, 6]),
        ("reward", "<f4", vec![t]),
        ("maze_layout", "|u1", vec![n, n]),
        ("agent_pos", "<f4", vec![t, 2]),
        ("agent_dir", "<f4", vec![t, 2]),
        ("targets_pos", "<f4", vec![t, k, 2]),
        ("targets_vec", "<f4", vec![t, k, 2]),
        ("target_pos", "<f4", vec![t, 2]),
        ("target_vec", "<f4", vec![t, 2]),
        ("target_color", "<f4", vec![t, 3]),
    ]
}

/// Reads a trajectory file with the `zip` and `npyz` crates only and checks
/// the schema plus the value invariants that need no simulator.
pub fn check_npz_independently(path: &std::path::Path, t: usize, n: usize, k: usize) -> Result<(), String> {
    use std::io::Read;
    let file = std::fs::File::open(path).map_err(|e| e.to_string())?;
    let mut zip = zip::ZipArchive::new(file).map_err(|e| e.to_string())?;
    let schema = expected_schema(t, n, k);
    if zip.len() != schema.len() {
        return Err(format!("{} entries, expected {}", zip.len(), schema.len()));
    }
    for (key, dtype, shape) in schema {
        let mut bytes = Vec::new();
        let mut entry = zip.by_name(&format!("{key}.npy")).map_err(|e| format!("{key}: {e}"))?;
        if entry.compression() != zip::CompressionMethod::Stored {
            return Err(format!("{key}: compressed entry"));
        }
        entry.read_to_end(&mut bytes).map_err(|e| e.to_string())?;
        if !bytes.starts_with(b"\x93NUMPY\x01\x00") {
            return Err(format!("{key}: not NPY 1.0"));
        }
        let npy = npyz::NpyFile::new(&bytes[..]).map_err(|e| format!("{key}: {e}"))?;
        let got = match npy.dtype() {
            npyz::DType::Plain(ts) => ts.to_string(),
            other => return Err(format!("{key}: dtype {other:?}")),
        };
        if got != dtype || npy.shape() != shape.as_slice() || npy.order() != npyz::Order::C {
            return Err(format!("{key}: {got} {:?}, expected {dtype} {shape:?}", npy.shape()));
        }
        match key {
            "action" => {
                let v: Vec<u8> = npy.into_vec().map_err(|e| e.to_string())?;
                let rows: Vec<&[u8]> = v.chunks(6).collect();
                if rows[0].iter().any(|&x| x != 0) {
                    return Err("action[0] is not all zero".into());
                }
                if rows[1..].iter().any(|r| r.iter().filter(|&&x| x == 1).count() != 1 || r.iter().any(|&x| x > 1)) {
                    return Err("action row is not one-hot".into());
                }
            }
            "reward" => {
                let v: Vec<f32> = npy.into_vec().map_err(|e| e.to_string())?;
                if v[0] != 0.0 || v.iter().any(|&r| r != 0.0 && r != 1.0) {
                    return Err("reward values outside {0, 1} or reward[0] != 0".into());
                }
            }
            "maze_layout" => {
                let v: Vec<u8> = npy.into_vec().map_err(|e| e.to_string())?;
                if v.iter().any(|&x| x > 1) {
                    return Err("maze_layout is not binary".into());
                }
            }
            "agent_dir" => {
                let v: Vec<f32> = npy.into_vec().map_err(|e| e.to_string())?;
                if v.chunks(2).any(|d| ((d[0] as f64).hypot(d[1] as f64) - 1.0).abs() > 1e-5) {
                    return Err("agent_dir row off the unit circle".into());
                }
            }
            "image" => {
                let v: Vec<u8> = npy.into_vec().map_err(|e| e.to_string())?;
                if v.len() as u64 != shape.iter().product::<u64>() {
                    return Err("image length".into());
                }
            }
            _ => {
                let v: Vec<f32> = npy.into_vec().map_err(|e| e.to_string())?;
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(format!("{key}: non-finite value"));
                }
            }
        }
    }
    Ok(())
}
