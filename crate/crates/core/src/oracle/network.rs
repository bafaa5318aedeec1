//! Two-layer GRU over a permutation's feature rows with warm-started states
//! and a small tanh head, plus its manual reverse pass.
//!
//! Gates follow the usual `r, z, n` layout:
//!
//! ```text
//! r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//! z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//! n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//! h' = (1 - z) * n + z * h
//! ```
//!
//! Layer `l` starts from `mean_t tanh(P_l x_t + c_l)`. Both layers read the
//! raw rows for their warm start; layer 1 consumes layer 0's outputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Hidden sizes of the head after the `2d` embedding.
const HEAD: [usize; 2] = [32, 16];
const CLASSES: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Features per operation.
    pub features: usize,
    /// GRU state size.
    pub hidden: usize,
    /// Drop probability for the warm-start projections and between layers.
    pub dropout: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { features: crate::features::N_FEATURES, hidden: 32, dropout: 0.3 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.features == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig("oracle sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// A named slice of the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Copy, Debug)]
struct Dense {
    w: usize,
    b: usize,
    rows: usize,
    cols: usize,
}

#[derive(Clone, Copy, Debug)]
struct GruLayer {
    w_ih: usize,
    w_hh: usize,
    b_ih: usize,
    b_hh: usize,
    input: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Layout {
    proj: [Dense; 2],
    gru: [GruLayer; 2],
    head: [Dense; 3],
    tensors: Vec<TensorInfo>,
    len: usize,
}

impl Layout {
    fn new(cfg: &OracleConfig) -> Self {
        let (g, d) = (cfg.features, cfg.hidden);
        let mut tensors = Vec::new();
        let mut at = 0;
        let mut alloc = |name: String, shape: Vec<usize>| {
            let info = TensorInfo { name, shape, offset: at };
            at += info.len();
            let offset = info.offset;
            tensors.push(info);
            offset
        };
        let mut dense = |name: &str, rows: usize, cols: usize| Dense {
            w: alloc(format!("{name}.weight"), vec![rows, cols]),
            b: alloc(format!("{name}.bias"), vec![rows]),
            rows,
            cols,
        };
        let proj = [dense("proj0", d, g), dense("proj1", d, g)];
        let mut gru = |l: usize, input: usize| GruLayer {
            w_ih: alloc(format!("gru{l}.weight_ih"), vec![3 * d, input]),
            w_hh: alloc(format!("gru{l}.weight_hh"), vec![3 * d, d]),
            b_ih: alloc(format!("gru{l}.bias_ih"), vec![3 * d]),
            b_hh: alloc(format!("gru{l}.bias_hh"), vec![3 * d]),
            input,
        };
        let gru = [gru(0, g), gru(1, d)];
        let mut dense = |name: &str, rows: usize, cols: usize| Dense {
            w: alloc(format!("{name}.weight"), vec![rows, cols]),
            b: alloc(format!("{name}.bias"), vec![rows]),
            rows,
            cols,
        };
        let head = [dense("fc0", HEAD[0], 2 * d), dense("fc1", HEAD[1], HEAD[0]), dense("fc2", CLASSES, HEAD[1])];
        Self { proj, gru, head, tensors, len: at }
    }
}

/// Two logits and their softmax; index 0 is the "good permutation" class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub logits: [f64; 2],
    pub probs: [f64; 2],
}

impl Prediction {
    pub fn from_logits(logits: [f64; 2]) -> Self {
        let m = logits[0].max(logits[1]);
        let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
        let s = e[0] + e[1];
        Self { logits, probs: [e[0] / s, e[1] / s] }
    }

    /// Predicted quality.
    pub fn y_hat(&self) -> f64 {
        self.probs[0]
    }

    /// Argmax class: true when the positive unit wins (ties count as positive).
    pub fn positive(&self) -> bool {
        self.logits[0] >= self.logits[1]
    }
}

/// Fixed per-feature standardization applied to every input row before the
/// network sees it. It is fitted once on training data and never trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InputScaling {
    pub fn identity(features: usize) -> Self {
        Self { mean: vec![0.0; features], std: vec![1.0; features] }
    }

    /// Column means and population standard deviations over all rows of
    /// `inputs`. Constant columns keep a unit scale.
    pub fn fit<'a>(features: usize, inputs: impl IntoIterator<Item = &'a Matrix>) -> Result<Self> {
        let mut sum = vec![0.0; features];
        let mut sq = vec![0.0; features];
        let mut n = 0usize;
        for x in inputs {
            if x.cols() != features {
                return Err(Error::ShapeMismatch { expected: format!("{features} columns"), found: x.cols().to_string() });
            }
            for row in x.iter_rows() {
                n += 1;
                for (k, &v) in row.iter().enumerate() {
                    sum[k] += v;
                    sq[k] += v * v;
                }
            }
        }
        if n == 0 {
            return Err(Error::EmptyInput("input scaling rows"));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n as f64 - m * m).max(0.0);
                if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, std })
    }

    fn validate(&self, features: usize) -> Result<()> {
        if self.mean.len() != features || self.std.len() != features {
            return Err(Error::ShapeMismatch {
                expected: format!("{features} scaling entries"),
                found: format!("{} / {}", self.mean.len(), self.std.len()),
            });
        }
        if self.mean.iter().any(|m| !m.is_finite()) || self.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidConfig("input scaling must be finite with positive scales".into()));
        }
        Ok(())
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct OracleModel {
    cfg: OracleConfig,
    layout: Layout,
    params: Vec<f64>,
    scaling: InputScaling,
}

/// Everything the reverse pass needs from one forward pass.
#[derive(Clone, Debug, Default)]
pub(crate) struct Tape {
    x: Vec<Vec<f64>>,
    /// tanh(P x_t + c) per layer and step.
    proj: [Vec<Vec<f64>>; 2],
    /// Scaled keep masks for the pooled warm starts.
    pool_mask: [Vec<f64>; 2],
    steps: [Vec<StepCache>; 2],
    /// Scaled keep masks on layer 0 outputs feeding layer 1.
    between_mask: Vec<Vec<f64>>,
    head_in: [Vec<f64>; 3],
    head_out: [Vec<f64>; 2],
    pub(crate) prediction: Option<Prediction>,
}

#[derive(Clone, Debug)]
struct StepCache {
    input: Vec<f64>,
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    /// W_hn h + b_hn, before the reset gate.
    hn: Vec<f64>,
}

fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

/// `out = W x + b` with `W` row-major `rows x cols`.
fn affine(p: &[f64], d: Dense, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(&p[d.b..d.b + d.rows]);
    let w = &p[d.w..d.w + d.rows * d.cols];
    for (o, row) in out.iter_mut().zip(w.chunks_exact(d.cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out = W x` for a raw `rows x cols` block.
fn matvec(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// `gw += dy x^T`, and `dx += W^T dy` when `dx` is given.
fn outer_and_back(w: &[f64], gw: &mut [f64], cols: usize, dy: &[f64], x: &[f64], dx: Option<&mut [f64]>) {
    for (g_row, &d) in gw.chunks_exact_mut(cols).zip(dy) {
        if d != 0.0 {
            g_row.iter_mut().zip(x).for_each(|(g, &xi)| *g += d * xi);
        }
    }
    if let Some(dx) = dx {
        for (row, &d) in w.chunks_exact(cols).zip(dy) {
            if d != 0.0 {
                dx.iter_mut().zip(row).for_each(|(o, &wv)| *o += d * wv);
            }
        }
    }
}

fn keep_mask<R: Rng + ?Sized>(rng: Option<&mut R>, len: usize, p: f64) -> Vec<f64> {
    match rng {
        Some(rng) if p > 0.0 => {
            let scale = 1.0 / (1.0 - p);
            (0..len).map(|_| if rng.gen::<f64>() < p { 0.0 } else { scale }).collect()
        }
        _ => vec![1.0; len],
    }
}

impl OracleModel {
    /// Uniform initialization in `[-1/sqrt(d), 1/sqrt(d)]`.
    pub fn new<R: Rng + ?Sized>(cfg: OracleConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        let k = 1.0 / (cfg.hidden as f64).sqrt();
        let params = (0..layout.len).map(|_| rng.gen_range(-k..=k)).collect();
        Ok(Self { cfg, layout, params, scaling: InputScaling::identity(cfg.features) })
    }

    pub fn from_parts(cfg: OracleConfig, params: Vec<f64>, scaling: InputScaling) -> Result<Self> {
        cfg.validate()?;
        scaling.validate(cfg.features)?;
        let layout = Layout::new(&cfg);
        if params.len() != layout.len {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", layout.len),
                found: params.len().to_string(),
            });
        }
        Ok(Self { cfg, layout, params, scaling })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    pub fn scaling(&self) -> &InputScaling {
        &self.scaling
    }

    pub fn set_scaling(&mut self, scaling: InputScaling) -> Result<()> {
        scaling.validate(self.cfg.features)?;
        self.scaling = scaling;
        Ok(())
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.layout.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout.tensors.iter().find(|t| t.name == name).map(|t| &self.params[t.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.layout.tensors.iter().find(|t| t.name == name)?.range();
        Some(&mut self.params[range])
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.cfg.features || x.rows() == 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("(n >= 1, {})", self.cfg.features),
                found: format!("{:?}", x.shape()),
            });
        }
        Ok(())
    }

    /// Evaluation-mode inference.
    pub fn forward(&self, x: &Matrix) -> Result<Prediction> {
        self.check_input(x)?;
        let tape = self.run(x, None::<&mut rand_chacha::ChaCha8Rng>);
        Ok(tape.prediction.expect("forward sets the prediction"))
    }

    /// Initial state of `layer`: the mean over rows of `tanh(P x_t + c)`,
    /// taken after input scaling.
    pub fn warm_start(&self, x: &Matrix, layer: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let (_, pooled) = self.pool(&self.scaling.apply(x), layer);
        Ok(pooled)
    }

    fn pool(&self, x: &Matrix, layer: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let d = self.cfg.hidden;
        let mut acts = Vec::with_capacity(x.rows());
        let mut pooled = vec![0.0; d];
        let mut buf = Vec::with_capacity(d);
        for row in x.iter_rows() {
            affine(&self.params, self.layout.proj[layer], row, &mut buf);
            buf.iter_mut().for_each(|a| *a = a.tanh());
            for (s, a) in pooled.iter_mut().zip(&buf) {
                *s += a;
            }
            acts.push(buf.clone());
        }
        let inv = 1.0 / x.rows() as f64;
        pooled.iter_mut().for_each(|s| *s *= inv);
        (acts, pooled)
    }

    /// Forward pass recording a tape; dropout is active when `rng` is given.
    pub(crate) fn run<R: Rng + ?Sized>(&self, x: &Matrix, mut rng: Option<&mut R>) -> Tape {
        let d = self.cfg.hidden;
        let p = self.cfg.dropout;
        let x = &self.scaling.apply(x);
        let mut tape = Tape { x: x.iter_rows().map(<[f64]>::to_vec).collect(), ..Tape::default() };

        let mut inputs: Vec<Vec<f64>> = tape.x.clone();
        let mut last = [Vec::new(), Vec::new()];
        for layer in 0..2 {
            let (acts, pooled) = self.pool(x, layer);
            let mask = keep_mask(rng.as_deref_mut(), d, p);
            let mut h: Vec<f64> = pooled.iter().zip(&mask).map(|(a, m)| a * m).collect();
            tape.proj[layer] = acts;
            tape.pool_mask[layer] = mask;

            let gl = self.layout.gru[layer];
            let w_ih = &self.params[gl.w_ih..gl.w_ih + 3 * d * gl.input];
            let w_hh = &self.params[gl.w_hh..gl.w_hh + 3 * d * d];
            let b_ih = &self.params[gl.b_ih..gl.b_ih + 3 * d];
            let b_hh = &self.params[gl.b_hh..gl.b_hh + 3 * d];
            let mut gi = vec![0.0; 3 * d];
            let mut gh = vec![0.0; 3 * d];
            let mut outputs = Vec::with_capacity(inputs.len());
            for input in &inputs {
                matvec(w_ih, gl.input, input, &mut gi);
                matvec(w_hh, d, &h, &mut gh);
                let mut step = StepCache {
                    input: input.clone(),
                    h_prev: h.clone(),
                    r: vec![0.0; d],
                    z: vec![0.0; d],
                    n: vec![0.0; d],
                    hn: vec![0.0; d],
                };
                for k in 0..d {
                    let r = sigmoid(gi[k] + b_ih[k] + gh[k] + b_hh[k]);
                    let z = sigmoid(gi[d + k] + b_ih[d + k] + gh[d + k] + b_hh[d + k]);
                    let hn = gh[2 * d + k] + b_hh[2 * d + k];
                    let n = (gi[2 * d + k] + b_ih[2 * d + k] + r * hn).tanh();
                    h[k] = (1.0 - z) * n + z * h[k];
                    step.r[k] = r;
                    step.z[k] = z;
                    step.n[k] = n;
                    step.hn[k] = hn;
                }
                tape.steps[layer].push(step);
                outputs.push(h.clone());
            }
            last[layer] = h;
            if layer == 0 {
                tape.between_mask = (0..outputs.len()).map(|_| keep_mask(rng.as_deref_mut(), d, p)).collect();
                inputs = outputs
                    .iter()
                    .zip(&tape.between_mask)
                    .map(|(o, m)| o.iter().zip(m).map(|(a, b)| a * b).collect())
                    .collect();
            }
        }

        let mut a: Vec<f64> = last[0].iter().chain(&last[1]).copied().collect();
        let mut out = Vec::new();
        for (k, dense) in self.layout.head.iter().enumerate() {
            tape.head_in[k] = a.clone();
            affine(&self.params, *dense, &a, &mut out);
            if k < 2 {
                out.iter_mut().for_each(|v| *v = v.tanh());
                tape.head_out[k] = out.clone();
            }
            std::mem::swap(&mut a, &mut out);
        }
        tape.prediction = Some(Prediction::from_logits([a[0], a[1]]));
        tape
    }

    /// Accumulates into `grad` the gradient of a loss whose derivative with
    /// respect to the logits is `dlogits`.
    pub(crate) fn backward(&self, tape: &Tape, dlogits: [f64; 2], grad: &mut [f64]) {
        let d = self.cfg.hidden;
        let p = &self.params;

        // Head.
        let mut dy = dlogits.to_vec();
        for k in (0..3).rev() {
            let dense = self.layout.head[k];
            let mut dx = vec![0.0; dense.cols];
            let (w, gw) = (&p[dense.w..dense.w + dense.rows * dense.cols], dense.w);
            outer_and_back(w, &mut grad[gw..gw + dense.rows * dense.cols], dense.cols, &dy, &tape.head_in[k], Some(&mut dx));
            for (g, v) in grad[dense.b..dense.b + dense.rows].iter_mut().zip(&dy) {
                *g += v;
            }
            if k > 0 {
                for (v, o) in dx.iter_mut().zip(&tape.head_out[k - 1]) {
                    *v *= 1.0 - o * o;
                }
            }
            dy = dx;
        }
        let (d_last0, d_last1) = dy.split_at(d);

        // Layer 1, then layer 0 with the gradients flowing back from layer 1's inputs.
        let steps = tape.steps[0].len();
        let mut d_out0 = vec![vec![0.0; d]; steps];
        let (dh0_1, dx1) = self.gru_backward(1, &tape.steps[1], d_last1, None, grad);
        for (t, dx) in dx1.iter().enumerate() {
            for ((o, g), m) in d_out0[t].iter_mut().zip(dx).zip(&tape.between_mask[t]) {
                *o += g * m;
            }
        }
        d_out0[steps - 1].iter_mut().zip(d_last0).for_each(|(o, g)| *o += g);
        let (dh0_0, _) = self.gru_backward(0, &tape.steps[0], &vec![0.0; d], Some(&d_out0), grad);

        for (layer, dh0) in [(0, dh0_0), (1, dh0_1)] {
            let dense = self.layout.proj[layer];
            let inv = 1.0 / steps as f64;
            let dpool: Vec<f64> = dh0.iter().zip(&tape.pool_mask[layer]).map(|(g, m)| g * m * inv).collect();
            for (t, act) in tape.proj[layer].iter().enumerate() {
                let da: Vec<f64> = dpool.iter().zip(act).map(|(g, a)| g * (1.0 - a * a)).collect();
                let w = &p[dense.w..dense.w + dense.rows * dense.cols];
                outer_and_back(w, &mut grad[dense.w..dense.w + dense.rows * dense.cols], dense.cols, &da, &tape.x[t], None);
                for (g, v) in grad[dense.b..dense.b + dense.rows].iter_mut().zip(&da) {
                    *g += v;
                }
            }
        }
    }

    /// Backpropagation through time for one layer. `d_final` is the gradient
    /// on the last state; `d_outputs[t]`, if given, is added to the gradient
    /// of the state after step `t`. Returns the gradient on the initial state
    /// and on every step's input.
    fn gru_backward(
        &self,
        layer: usize,
        steps: &[StepCache],
        d_final: &[f64],
        d_outputs: Option<&Vec<Vec<f64>>>,
        grad: &mut [f64],
    ) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.cfg.hidden;
        let gl = self.layout.gru[layer];
        let p = &self.params;
        let w_ih = &p[gl.w_ih..gl.w_ih + 3 * d * gl.input];
        let w_hh = &p[gl.w_hh..gl.w_hh + 3 * d * d];
        let mut dh = d_final.to_vec();
        let mut d_inputs = vec![Vec::new(); steps.len()];
        let mut g_i = vec![0.0; 3 * d];
        let mut g_h = vec![0.0; 3 * d];
        for (t, s) in steps.iter().enumerate().rev() {
            if let Some(extra) = d_outputs {
                dh.iter_mut().zip(&extra[t]).for_each(|(a, b)| *a += b);
            }
            let mut dh_prev = vec![0.0; d];
            for k in 0..d {
                let (r, z, n) = (s.r[k], s.z[k], s.n[k]);
                let dn = dh[k] * (1.0 - z);
                let dz = dh[k] * (s.h_prev[k] - n);
                dh_prev[k] = dh[k] * z;
                let da_n = dn * (1.0 - n * n);
                let dr = da_n * s.hn[k];
                g_i[k] = dr * r * (1.0 - r);
                g_i[d + k] = dz * z * (1.0 - z);
                g_i[2 * d + k] = da_n;
                g_h[k] = g_i[k];
                g_h[d + k] = g_i[d + k];
                g_h[2 * d + k] = da_n * r;
            }
            let mut dx = vec![0.0; gl.input];
            outer_and_back(w_ih, &mut grad[gl.w_ih..gl.w_ih + 3 * d * gl.input], gl.input, &g_i, &s.input, Some(&mut dx));
            outer_and_back(w_hh, &mut grad[gl.w_hh..gl.w_hh + 3 * d * d], d, &g_h, &s.h_prev, Some(&mut dh_prev));
            for (g, v) in grad[gl.b_ih..gl.b_ih + 3 * d].iter_mut().zip(&g_i) {
                *g += v;
            }
            for (g, v) in grad[gl.b_hh..gl.b_hh + 3 * d].iter_mut().zip(&g_h) {
                *g += v;
            }
            d_inputs[t] = dx;
            dh = dh_prev;
        }
        (dh, d_inputs)
    }
}
