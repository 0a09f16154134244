//! Tanh MLP baseline with Taylor-jet time derivatives.
//!
//! Jets carry truncated Taylor coefficients `c_0..c_d` of a signal around the
//! evaluation time, so the n-th time derivative is `n! * c_n`. Affine layers act
//! on each coefficient independently; tanh uses the recurrence driven by
//! `y' = s z'`, `s = 1 - y^2`. Gradients come from a hand-written reverse pass
//! over the same recurrences, batched with points as matrix columns.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{LinearOde, SourceWaveform};
use crate::error::{Error, Result};
use crate::fourier::CheckpointMeta;
use crate::loss::{loss_from_stacks, DerivativeModel, LossBreakdown, LossConfig};

pub const HIDDEN_WIDTH: usize = 50;
pub const MAX_HIDDEN_LAYERS: usize = 5;
pub const MAX_JET_DEGREE: usize = 4;
pub const CHECKPOINT_VERSION: u32 = 1;

const FACTORIAL: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `fan_out x fan_in`
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// `H` hidden tanh layers of width 50, scalar input and output.
pub fn mlp_init(hidden: usize, seed: u64) -> Result<Mlp> {
    if !(1..=MAX_HIDDEN_LAYERS).contains(&hidden) {
        return Err(Error::InvalidArgument(format!(
            "hidden layers must be in 1..={MAX_HIDDEN_LAYERS}, got {hidden}"
        )));
    }
    let mut sizes = vec![1];
    sizes.extend(std::iter::repeat_n(HIDDEN_WIDTH, hidden));
    sizes.push(1);
    Mlp::glorot(&sizes, seed)
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn glorot(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer sizes {sizes:?}")));
        }
        if sizes[0] != 1 || *sizes.last().unwrap() != 1 {
            return Err(Error::InvalidArgument("input and output must be scalar".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|p| {
                let (fan_in, fan_out) = (p[0], p[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                // row-major draw order so the stream does not depend on storage
                let vals: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect();
                Layer { w: DMatrix::from_row_slice(fan_out, fan_in, &vals), b: DVector::zeros(fan_out) }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("no layers".into()));
        }
        let mut fan_in = 1;
        for l in &layers {
            if l.w.ncols() != fan_in || l.b.len() != l.w.nrows() {
                return Err(Error::InvalidArgument("inconsistent layer shapes".into()));
            }
            fan_in = l.w.nrows();
        }
        if fan_in != 1 {
            return Err(Error::InvalidArgument("output must be scalar".into()));
        }
        Ok(Self { layers })
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.ncols()];
        s.extend(self.layers.iter().map(|l| l.w.nrows()));
        s
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn count_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut x = DVector::from_element(1, t);
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            x = &l.w * x + &l.b;
            if i < last {
                x.apply(|v| *v = v.tanh());
            }
        }
        x[0]
    }

    /// Parameters as `[W_1 row-major, b_1, W_2, b_2, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.count_params());
        for l in &self.layers {
            for r in 0..l.w.nrows() {
                out.extend(l.w.row(r).iter());
            }
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.count_params() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.count_params(),
                flat.len()
            )));
        }
        let mut k = 0;
        for l in &mut self.layers {
            for r in 0..l.w.nrows() {
                for c in 0..l.w.ncols() {
                    l.w[(r, c)] = flat[k];
                    k += 1;
                }
            }
            for v in l.b.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
        Ok(())
    }

    fn forward(&self, ts: &[f64], degree: usize, keep: bool) -> Result<(Vec<DMatrix<f64>>, Vec<Tape>)> {
        if degree > MAX_JET_DEGREE {
            return Err(Error::DerivativeOrder { order: degree, max: MAX_JET_DEGREE });
        }
        let n = ts.len();
        let mut x: Vec<DMatrix<f64>> = (0..=degree)
            .map(|k| match k {
                0 => DMatrix::from_row_slice(1, n, ts),
                1 => DMatrix::from_element(1, n, 1.0),
                _ => DMatrix::zeros(1, n),
            })
            .collect();
        let mut tapes = Vec::new();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z: Vec<DMatrix<f64>> = x.iter().map(|xk| &l.w * xk).collect();
            for mut col in z[0].column_iter_mut() {
                col += &l.b;
            }
            if i == last {
                if keep {
                    tapes.push(Tape { x, z: vec![], y: vec![], s: vec![] });
                }
                x = z;
                break;
            }
            let (y, s) = tanh_jet(&z);
            let next = y.clone();
            if keep {
                tapes.push(Tape { x, z, y, s });
            }
            x = next;
        }
        if x[0].iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("non-finite network output".into()));
        }
        Ok((x, tapes))
    }

    /// Derivatives `0..=degree` at every time, one row per time.
    pub fn jet_batch(&self, ts: &[f64], degree: usize) -> Result<Vec<Vec<f64>>> {
        let (out, _) = self.forward(ts, degree, false)?;
        Ok((0..ts.len())
            .map(|j| (0..=degree).map(|k| FACTORIAL[k] * out[k][(0, j)]).collect())
            .collect())
    }

    /// Gradient of a scalar loss of jets at `ts`.
    ///
    /// `loss` receives per-point Taylor coefficients and returns the loss and
    /// its adjoint with respect to every coefficient.
    pub fn loss_gradient<F>(&self, ts: &[f64], degree: usize, loss: F) -> Result<(f64, Vec<f64>)>
    where
        F: FnOnce(&[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)>,
    {
        let (out, tapes) = self.forward(ts, degree, true)?;
        let n = ts.len();
        let coeffs: Vec<Vec<f64>> = (0..n).map(|j| (0..=degree).map(|k| out[k][(0, j)]).collect()).collect();
        let (value, adj) = loss(&coeffs)?;
        if adj.len() != n {
            return Err(Error::InvalidArgument("adjoint count does not match batch".into()));
        }
        let mut g: Vec<DMatrix<f64>> = (0..=degree)
            .map(|k| DMatrix::from_fn(1, n, |_, j| adj[j].get(k).copied().unwrap_or(0.0)))
            .collect();

        let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(self.layers.len());
        for (i, (layer, tape)) in self.layers.iter().zip(&tapes).enumerate().rev() {
            let gz = if i == self.layers.len() - 1 { g } else { tanh_jet_backward(tape, g) };
            let mut gw = DMatrix::zeros(layer.w.nrows(), layer.w.ncols());
            for (gzk, xk) in gz.iter().zip(&tape.x) {
                gw.gemm(1.0, gzk, &xk.transpose(), 1.0);
            }
            let gb = gz[0].column_sum();
            g = if i > 0 { gz.iter().map(|gzk| layer.w.tr_mul(gzk)).collect() } else { vec![] };
            grads.push((gw, gb));
        }
        grads.reverse();
        let mut flat: Vec<f64> = Vec::with_capacity(self.count_params());
        for (gw, gb) in grads {
            for r in 0..gw.nrows() {
                flat.extend(gw.row(r).iter());
            }
            flat.extend(gb.iter());
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        Ok((value, flat))
    }
}

struct Tape {
    x: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    y: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
}

fn tanh_jet(z: &[DMatrix<f64>]) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let d = z.len() - 1;
    let y0 = z[0].map(f64::tanh);
    let s0 = y0.map(|v| 1.0 - v * v);
    let mut y = vec![y0];
    let mut s = vec![s0];
    for k in 1..=d {
        let mut yk = DMatrix::zeros(z[0].nrows(), z[0].ncols());
        for j in 1..=k {
            yk += z[j].component_mul(&s[k - j]) * (j as f64 / k as f64);
        }
        y.push(yk);
        let mut sk = DMatrix::zeros(z[0].nrows(), z[0].ncols());
        for i in 0..=k {
            sk -= y[i].component_mul(&y[k - i]);
        }
        s.push(sk);
    }
    (y, s)
}

fn tanh_jet_backward(tape: &Tape, mut gy: Vec<DMatrix<f64>>) -> Vec<DMatrix<f64>> {
    let d = tape.z.len() - 1;
    let shape = (tape.z[0].nrows(), tape.z[0].ncols());
    let mut gz: Vec<DMatrix<f64>> = (0..=d).map(|_| DMatrix::zeros(shape.0, shape.1)).collect();
    let mut gs: Vec<DMatrix<f64>> = (0..=d).map(|_| DMatrix::zeros(shape.0, shape.1)).collect();
    for k in (1..=d).rev() {
        // s_k = -sum_i y_i y_{k-i}
        for m in 0..=k {
            let t = gs[k].component_mul(&tape.y[k - m]) * -2.0;
            gy[m] += t;
        }
        // y_k = (1/k) sum_j j z_j s_{k-j}
        for j in 1..=k {
            let c = j as f64 / k as f64;
            gz[j] += gy[k].component_mul(&tape.s[k - j]) * c;
            let t = gy[k].component_mul(&tape.z[j]) * c;
            gs[k - j] += t;
        }
    }
    // s_0 = 1 - y_0^2, y_0 = tanh z_0
    let t = gs[0].component_mul(&tape.y[0]) * -2.0;
    gy[0] += t;
    gz[0] += gy[0].component_mul(&tape.s[0]);
    gz
}

/// Truncated Taylor expansion of the network output around a time point.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorJet {
    pub coeffs: Vec<f64>,
}

impl TaylorJet {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn derivative(&self, n: usize) -> Option<f64> {
        self.coeffs.get(n).map(|c| FACTORIAL[n] * c)
    }
}

pub fn jet_eval(mlp: &Mlp, t: f64, degree: usize) -> Result<TaylorJet> {
    let (out, _) = mlp.forward(&[t], degree, false)?;
    Ok(TaylorJet { coeffs: out.iter().map(|m| m[(0, 0)]).collect() })
}

impl DerivativeModel for Mlp {
    fn max_derivative(&self) -> usize {
        MAX_JET_DEGREE
    }

    fn derivative_stack(&self, order: usize, t: f64) -> Result<Vec<f64>> {
        Ok(self.jet_batch(&[t], order)?.remove(0))
    }

    fn derivative_stacks(&self, order: usize, ts: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.jet_batch(ts, order)
    }
}

/// Physics-informed loss and its gradient for the baseline.
///
/// Collocation, data and initial-condition points share one batched pass;
/// data times identical to the collocation set reuse the collocation jets.
pub fn loss_gradient_mlp(
    mlp: &Mlp,
    config: &LossConfig,
    ode: &LinearOde,
    source: &SourceWaveform,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let order = ode.order();
    if order > MAX_JET_DEGREE {
        return Err(Error::DerivativeOrder { order, max: MAX_JET_DEGREE });
    }
    let nc = config.collocation.len();
    let shared = config.data().is_none_or(|d| d.times == config.collocation);
    let mut ts = config.collocation.clone();
    let data_offset = if shared {
        0
    } else {
        ts.extend(&config.data().unwrap().times);
        nc
    };
    let ic_index = ts.len();
    ts.push(config.ic.t0);

    let mut breakdown = LossBreakdown::default();
    let (_, grad) = mlp.loss_gradient(&ts, order, |coeffs| {
        let deriv = |c: &[f64]| -> Vec<f64> { c.iter().enumerate().map(|(k, v)| FACTORIAL[k] * v).collect() };
        let colloc: Vec<Vec<f64>> = coeffs[..nc].iter().map(|c| deriv(c)).collect();
        let nd = config.data().map_or(0, |d| d.times.len());
        let data_out: Vec<f64> = (0..nd).map(|i| coeffs[data_offset + i][0]).collect();
        let ic = deriv(&coeffs[ic_index]);
        let (b, adj) = loss_from_stacks(config, ode, source, &colloc, &data_out, &ic, true)?;
        breakdown = b;
        let mut out = vec![vec![0.0; order + 1]; coeffs.len()];
        for (o, a) in out.iter_mut().zip(&adj.collocation) {
            for k in 0..=order {
                o[k] += FACTORIAL[k] * a[k];
            }
        }
        for (i, a) in adj.data.iter().enumerate() {
            out[data_offset + i][0] += a;
        }
        for (k, a) in adj.ic.iter().enumerate() {
            out[ic_index][k] += FACTORIAL[k] * a;
        }
        Ok((b.total, out))
    })?;
    Ok((breakdown, grad))
}

#[derive(Serialize, Deserialize)]
struct MlpCheckpoint {
    version: u32,
    layer_sizes: Vec<usize>,
    /// Row-major per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    meta: CheckpointMeta,
}

pub fn save_checkpoint(mlp: &Mlp, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let ck = MlpCheckpoint {
        version: CHECKPOINT_VERSION,
        layer_sizes: mlp.layer_sizes(),
        weights: mlp
            .layers
            .iter()
            .map(|l| (0..l.w.nrows()).flat_map(|r| l.w.row(r).iter().copied().collect::<Vec<_>>()).collect())
            .collect(),
        biases: mlp.layers.iter().map(|l| l.b.iter().copied().collect()).collect(),
        meta: meta.clone(),
    };
    fs::write(path, serde_json::to_string(&ck)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Mlp, CheckpointMeta)> {
    let text = fs::read_to_string(path)?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("corrupt file {}: {e}", path.display())))?;
    match raw.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == CHECKPOINT_VERSION as u64 => {}
        other => {
            return Err(Error::Checkpoint(format!(
                "unsupported version {other:?}, expected {CHECKPOINT_VERSION}"
            )))
        }
    }
    let ck: MlpCheckpoint =
        serde_json::from_value(raw).map_err(|e| Error::Checkpoint(format!("corrupt file {}: {e}", path.display())))?;
    let sizes = &ck.layer_sizes;
    if sizes.len() < 2 || ck.weights.len() != sizes.len() - 1 || ck.biases.len() != sizes.len() - 1 {
        return Err(Error::Checkpoint("layer count mismatch".into()));
    }
    let mut layers = Vec::new();
    for (i, p) in sizes.windows(2).enumerate() {
        if ck.weights[i].len() != p[0] * p[1] || ck.biases[i].len() != p[1] {
            return Err(Error::Checkpoint(format!("layer {i} has the wrong number of values")));
        }
        layers.push(Layer {
            w: DMatrix::from_row_slice(p[1], p[0], &ck.weights[i]),
            b: DVector::from_vec(ck.biases[i].clone()),
        });
    }
    let mlp = Mlp::from_layers(layers).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok((mlp, ck.meta))
}
