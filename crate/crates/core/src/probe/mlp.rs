//! Probe network: `layers` x (affine -> layer norm -> ELU), then an affine
//! head. Forward and reverse passes are written out by hand over batches.

use ndarray::{Array1, Array2, ArrayView2, Axis, NdFloat, Zip};
use num_traits::NumCast;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::rng_from_seed;

pub fn cast<F: NdFloat>(x: f64) -> F {
    <F as NumCast>::from(x).expect("float cast")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hidden<F> {
    /// `(fan_in, width)`.
    pub w: Array2<F>,
    pub b: Array1<F>,
    pub gamma: Array1<F>,
    pub beta: Array1<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<F> {
    pub hidden: Vec<Hidden<F>>,
    pub head_w: Array2<F>,
    pub head_b: Array1<F>,
    pub ln_eps: F,
}

/// Per-layer values kept by the forward pass for the reverse pass.
pub struct Trace<F> {
    pub inputs: Vec<Array2<F>>,
    /// Normalized pre-activations, before gamma and beta.
    pub xhat: Vec<Array2<F>>,
    pub inv_std: Vec<Array1<F>>,
    /// ELU outputs.
    pub acts: Vec<Array2<F>>,
}

/// Standard normal truncated to two standard deviations, rescaled to unit
/// variance.
fn truncated_normal<R: Rng>(rng: &mut R) -> f64 {
    const STD_OF_TRUNCATED: f64 = 0.879_625_661_034_239_8;
    loop {
        let x: f64 = StandardNormal.sample(rng);
        if x.abs() <= 2.0 {
            return x / STD_OF_TRUNCATED;
        }
    }
}

fn fan_in_matrix<F: NdFloat, R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Array2<F> {
    let scale = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || cast(truncated_normal(rng) * scale))
}

fn elu<F: NdFloat>(x: F) -> F {
    if x > F::zero() {
        x
    } else {
        x.exp_m1()
    }
}

impl<F: NdFloat> Mlp<F> {
    /// Weights drawn from a truncated normal with fan-in variance scaling;
    /// biases and betas zero, gammas one. `zero_head` zeroes the output layer.
    pub fn new(input: usize, width: usize, layers: usize, output: usize, ln_eps: f64, seed: u64, zero_head: bool) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut fan_in = input;
        let mut hidden = Vec::with_capacity(layers);
        for _ in 0..layers {
            hidden.push(Hidden {
                w: fan_in_matrix(&mut rng, fan_in, width),
                b: Array1::zeros(width),
                gamma: Array1::ones(width),
                beta: Array1::zeros(width),
            });
            fan_in = width;
        }
        let head_w = if zero_head { Array2::zeros((fan_in, output)) } else { fan_in_matrix(&mut rng, fan_in, output) };
        Mlp { hidden, head_w, head_b: Array1::zeros(output), ln_eps: cast(ln_eps) }
    }

    pub fn input_width(&self) -> usize {
        self.hidden.first().map_or(self.head_w.nrows(), |h| h.w.nrows())
    }

    pub fn output_width(&self) -> usize {
        self.head_w.ncols()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.hidden.iter().map(|h| h.w.ncols()).collect()
    }

    /// Same architecture, every parameter zero.
    pub fn zeros_like(&self) -> Self {
        Mlp {
            hidden: self
                .hidden
                .iter()
                .map(|h| Hidden {
                    w: Array2::zeros(h.w.raw_dim()),
                    b: Array1::zeros(h.b.len()),
                    gamma: Array1::zeros(h.gamma.len()),
                    beta: Array1::zeros(h.beta.len()),
                })
                .collect(),
            head_w: Array2::zeros(self.head_w.raw_dim()),
            head_b: Array1::zeros(self.head_b.len()),
            ln_eps: self.ln_eps,
        }
    }

    /// Every parameter tensor, flattened, in a fixed order.
    pub fn params(&self) -> Vec<&[F]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for h in &self.hidden {
            for p in [h.w.as_slice(), h.b.as_slice(), h.gamma.as_slice(), h.beta.as_slice()] {
                out.push(p.expect("standard layout"));
            }
        }
        out.push(self.head_w.as_slice().expect("standard layout"));
        out.push(self.head_b.as_slice().expect("standard layout"));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for h in &mut self.hidden {
            out.push(h.w.as_slice_mut().expect("standard layout"));
            out.push(h.b.as_slice_mut().expect("standard layout"));
            out.push(h.gamma.as_slice_mut().expect("standard layout"));
            out.push(h.beta.as_slice_mut().expect("standard layout"));
        }
        out.push(self.head_w.as_slice_mut().expect("standard layout"));
        out.push(self.head_b.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Outputs for a batch of rows.
    pub fn forward(&self, x: ArrayView2<F>) -> Array2<F> {
        let mut h = x.to_owned();
        for layer in &self.hidden {
            let (_, y, _) = self.hidden_forward(layer, h.view());
            h = y.mapv_into(elu);
        }
        h.dot(&self.head_w) + &self.head_b
    }

    /// Returns the normalized pre-activation, the post-affine-LN value and
    /// the per-row inverse standard deviation.
    fn hidden_forward(&self, layer: &Hidden<F>, x: ArrayView2<F>) -> (Array2<F>, Array2<F>, Array1<F>) {
        let mut z = x.dot(&layer.w);
        z += &layer.b;
        let width = cast::<F>(z.ncols() as f64);
        let mut inv_std = Array1::zeros(z.nrows());
        for (mut row, s) in z.outer_iter_mut().zip(inv_std.iter_mut()) {
            let mean = row.sum() / width;
            row -= mean;
            let var = row.iter().fold(F::zero(), |acc, &v| acc + v * v) / width;
            *s = F::one() / (var + self.ln_eps).sqrt();
            row *= *s;
        }
        let y = &z * &layer.gamma + &layer.beta;
        (z, y, inv_std)
    }

    /// Forward pass that keeps what [`Mlp::backward`] needs.
    pub fn forward_trace(&self, x: ArrayView2<F>) -> (Array2<F>, Trace<F>) {
        let n = self.hidden.len();
        let mut trace = Trace { inputs: Vec::with_capacity(n + 1), xhat: Vec::with_capacity(n), inv_std: Vec::with_capacity(n), acts: Vec::with_capacity(n) };
        let mut h = x.to_owned();
        for layer in &self.hidden {
            let (xhat, y, inv_std) = self.hidden_forward(layer, h.view());
            let a = y.mapv_into(elu);
            trace.inputs.push(std::mem::replace(&mut h, a.clone()));
            trace.xhat.push(xhat);
            trace.inv_std.push(inv_std);
            trace.acts.push(a);
        }
        let out = h.dot(&self.head_w) + &self.head_b;
        trace.inputs.push(h);
        (out, trace)
    }

    /// Gradients of a loss with respect to every parameter, given the
    /// gradient `d_out` of that loss with respect to the outputs.
    pub fn backward(&self, trace: &Trace<F>, d_out: ArrayView2<F>, grads: &mut Mlp<F>) {
        let n = self.hidden.len();
        grads.head_w = trace.inputs[n].t().dot(&d_out);
        grads.head_b = d_out.sum_axis(Axis(0));
        let mut d_h = d_out.dot(&self.head_w.t());
        for i in (0..n).rev() {
            let layer = &self.hidden[i];
            // ELU'(y) = 1 for y > 0, otherwise exp(y) = elu(y) + 1.
            Zip::from(&mut d_h).and(&trace.acts[i]).for_each(|d, &a| {
                if a <= F::zero() {
                    *d *= a + F::one();
                }
            });
            let xhat = &trace.xhat[i];
            let g = &mut grads.hidden[i];
            g.gamma = (&d_h * xhat).sum_axis(Axis(0));
            g.beta = d_h.sum_axis(Axis(0));
            // Through the normalization, row by row:
            // dz = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)).
            let mut dz = d_h * &layer.gamma;
            let width = cast::<F>(dz.ncols() as f64);
            for ((mut row, xrow), &s) in dz.outer_iter_mut().zip(xhat.outer_iter()).zip(trace.inv_std[i].iter()) {
                let mean_d = row.sum() / width;
                let mean_dx = row.iter().zip(xrow.iter()).fold(F::zero(), |acc, (&d, &x)| acc + d * x) / width;
                Zip::from(&mut row).and(&xrow).for_each(|d, &x| *d = s * (*d - mean_d - x * mean_dx));
            }
            g.w = trace.inputs[i].t().dot(&dz);
            g.b = dz.sum_axis(Axis(0));
            if i > 0 {
                d_h = dz.dot(&layer.w.t());
            } else {
                break;
            }
        }
    }
}

/// Mean binary cross-entropy of logits against 0/1 targets, and its gradient.
pub fn bce_with_logits<F: NdFloat>(logits: ArrayView2<F>, targets: ArrayView2<F>) -> (F, Array2<F>) {
    let count = cast::<F>(logits.len() as f64);
    let mut loss = F::zero();
    let mut grad = Array2::zeros(logits.raw_dim());
    Zip::from(&mut grad).and(&logits).and(&targets).for_each(|g, &x, &y| {
        // softplus(x) - y x, computed without overflow.
        let softplus = x.max(F::zero()) + (-x.abs()).exp().ln_1p();
        loss += softplus - y * x;
        let sig = F::one() / (F::one() + (-x).exp());
        *g = (sig - y) / count;
    });
    (loss / count, grad)
}

/// Squared Euclidean error per 2D point, averaged over points and rows, and
/// its gradient. Columns are consecutive `(x, y)` pairs.
pub fn point_mse<F: NdFloat>(pred: ArrayView2<F>, targets: ArrayView2<F>) -> (F, Array2<F>) {
    let points = cast::<F>((pred.len() / 2) as f64);
    let diff = &pred - &targets;
    let loss = diff.iter().fold(F::zero(), |acc, &d| acc + d * d) / points;
    let two = cast::<F>(2.0);
    (loss, diff.mapv_into(|d| two * d / points))
}

/// Adam with bias correction.
pub struct Adam<F> {
    pub learning_rate: F,
    pub eps: F,
    pub beta1: F,
    pub beta2: F,
    m: Mlp<F>,
    v: Mlp<F>,
    t: i32,
}

impl<F: NdFloat> Adam<F> {
    pub fn new(model: &Mlp<F>, learning_rate: f64, eps: f64) -> Self {
        Adam {
            learning_rate: cast(learning_rate),
            eps: cast(eps),
            beta1: cast(0.9),
            beta2: cast(0.999),
            m: model.zeros_like(),
            v: model.zeros_like(),
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, model: &mut Mlp<F>, grads: &Mlp<F>) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = F::one() - b1.powi(self.t);
        let c2 = F::one() - b2.powi(self.t);
        let lr = self.learning_rate;
        let eps = self.eps;
        for (((p, g), m), v) in model.params_mut().into_iter().zip(grads.params()).zip(self.m.params_mut()).zip(self.v.params_mut()) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (F::one() - b1) * g[i];
                v[i] = b2 * v[i] + (F::one() - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}
