//! Shallow Fourier network with cosine activation.
//!
//! The output is the finite cosine series
//! `I(t) = alpha0 + sum_k lambda_k cos(W_k t + b_k)`, so every time derivative
//! is available in closed form and so is its Jacobian with respect to the
//! parameters. No autodiff is involved anywhere in this module.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitClass, CircuitParams};
use crate::error::{Error, Result};
use crate::optimizer::Schedule;

/// Highest time derivative supported (the class-3 ODE is fourth order).
pub const MAX_DERIVATIVE: usize = 4;

/// Variance of the input-to-hidden frequencies at initialisation.
pub const FREQ_INIT_VARIANCE: f64 = 5.0;

/// Output weights are drawn with variance `AMP_INIT_GAIN / N`.
pub const AMP_INIT_GAIN: f64 = 0.9703;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierNet {
    /// Frequencies (rad/s).
    pub w: Vec<f64>,
    /// Phases (rad).
    pub b: Vec<f64>,
    /// Amplitudes (A).
    pub lambda: Vec<f64>,
    /// Offset (A).
    pub alpha0: f64,
}

/// `d^n/dphi^n cos(phi)` expressed through `(cos phi, sin phi)`.
#[inline]
fn cos_cycle(n: usize, c: f64, s: f64) -> f64 {
    match n % 4 {
        0 => c,
        1 => -s,
        2 => -c,
        _ => s,
    }
}

impl FourierNet {
    pub fn new(w: Vec<f64>, b: Vec<f64>, lambda: Vec<f64>, alpha0: f64) -> Result<Self> {
        let n = w.len();
        if n == 0 || b.len() != n || lambda.len() != n {
            return Err(Error::InvalidArgument(format!(
                "inconsistent sizes: W {}, b {}, lambda {}",
                n,
                b.len(),
                lambda.len()
            )));
        }
        Ok(Self { w, b, lambda, alpha0 })
    }

    /// Seeded initialisation: zero phases and offset, `W ~ N(0, 5)`,
    /// `lambda ~ N(0, 0.9703 / N)`. Draws come from ChaCha8 seeded with `seed`,
    /// all frequencies first, then all amplitudes.
    pub fn init(neurons: usize, seed: u64) -> Result<Self> {
        if neurons == 0 {
            return Err(Error::InvalidArgument("a Fourier network needs at least one neuron".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wd = Normal::new(0.0, FREQ_INIT_VARIANCE.sqrt()).expect("valid normal");
        let ld = Normal::new(0.0, (AMP_INIT_GAIN / neurons as f64).sqrt()).expect("valid normal");
        let w = (0..neurons).map(|_| wd.sample(&mut rng)).collect();
        let lambda = (0..neurons).map(|_| ld.sample(&mut rng)).collect();
        Ok(Self { w, b: vec![0.0; neurons], lambda, alpha0: 0.0 })
    }

    pub fn neurons(&self) -> usize {
        self.w.len()
    }

    /// `3N + 1`.
    pub fn count_params(&self) -> usize {
        3 * self.neurons() + 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.alpha0
            + self
                .w
                .iter()
                .zip(&self.b)
                .zip(&self.lambda)
                .map(|((w, b), l)| l * (w * t + b).cos())
                .sum::<f64>()
    }

    fn check_order(n: usize) -> Result<()> {
        if n > MAX_DERIVATIVE {
            return Err(Error::DerivativeOrder { order: n, max: MAX_DERIVATIVE });
        }
        Ok(())
    }

    /// n-th time derivative in closed form.
    pub fn eval_derivative(&self, n: usize, t: f64) -> Result<f64> {
        Self::check_order(n)?;
        if n == 0 {
            return Ok(self.eval(t));
        }
        let sum = self
            .w
            .iter()
            .zip(&self.b)
            .zip(&self.lambda)
            .map(|((&w, &b), &l)| {
                let (s, c) = (w * t + b).sin_cos();
                l * w.powi(n as i32) * cos_cycle(n, c, s)
            })
            .sum();
        Ok(sum)
    }

    /// Derivatives of orders `0..=max_order` at `t`.
    pub fn derivative_stack(&self, max_order: usize, t: f64) -> Result<Vec<f64>> {
        Self::check_order(max_order)?;
        let mut out = vec![0.0; max_order + 1];
        out[0] = self.alpha0;
        for ((&w, &b), &l) in self.w.iter().zip(&self.b).zip(&self.lambda) {
            let (s, c) = (w * t + b).sin_cos();
            let mut wn = 1.0;
            for (n, o) in out.iter_mut().enumerate() {
                *o += l * wn * cos_cycle(n, c, s);
                wn *= w;
            }
        }
        Ok(out)
    }

    /// Gradient of `d^n I/dt^n (t)` with respect to every parameter, in
    /// network layout (the `alpha0` slot holds the offset partial).
    pub fn param_jacobian(&self, n: usize, t: f64) -> Result<FourierNet> {
        Self::check_order(n)?;
        let mut jac = FourierNet::zeros(self.neurons());
        for k in 0..self.neurons() {
            let (w, l) = (self.w[k], self.lambda[k]);
            let (s, c) = (w * t + self.b[k]).sin_cos();
            let wn = w.powi(n as i32);
            let h = cos_cycle(n, c, s);
            let h1 = cos_cycle(n + 1, c, s);
            let dwn = if n == 0 { 0.0 } else { n as f64 * w.powi(n as i32 - 1) };
            jac.lambda[k] = wn * h;
            jac.b[k] = l * wn * h1;
            jac.w[k] = l * (dwn * h + wn * t * h1);
        }
        jac.alpha0 = if n == 0 { 1.0 } else { 0.0 };
        Ok(jac)
    }

    /// Accumulate `scale * d/dtheta [sum_n coeffs[n] * d^n I/dt^n (t)]` into
    /// `grad` (flat layout) and return `sum_n coeffs[n] * d^n I/dt^n (t)`.
    pub(crate) fn combo_value_and_grad(&self, coeffs: &[f64], t: f64, scale: f64, grad: Option<&mut [f64]>) -> f64 {
        let nn = self.neurons();
        let mut value = coeffs[0] * self.alpha0;
        let mut grad = grad;
        for k in 0..nn {
            let (w, l) = (self.w[k], self.lambda[k]);
            let (s, c) = (w * t + self.b[k]).sin_cos();
            // p = sum a_n w^n h_n, q = sum a_n w^n h_{n+1}, pw = sum a_n n w^(n-1) h_n
            let (mut p, mut q, mut pw) = (0.0, 0.0, 0.0);
            let mut wn = 1.0;
            let mut wn1 = 0.0;
            for (n, &a) in coeffs.iter().enumerate() {
                if a != 0.0 {
                    let h = cos_cycle(n, c, s);
                    p += a * wn * h;
                    q += a * wn * cos_cycle(n + 1, c, s);
                    pw += a * n as f64 * wn1 * h;
                }
                wn1 = wn;
                wn *= w;
            }
            value += l * p;
            if let Some(g) = grad.as_deref_mut() {
                g[k] += scale * l * (pw + t * q);
                g[nn + k] += scale * l * q;
                g[2 * nn + k] += scale * p;
            }
        }
        if let Some(g) = grad {
            g[3 * nn] += scale * coeffs[0];
        }
        value
    }

    pub fn zeros(neurons: usize) -> FourierNet {
        FourierNet { w: vec![0.0; neurons], b: vec![0.0; neurons], lambda: vec![0.0; neurons], alpha0: 0.0 }
    }

    /// Flat parameter vector `[W..., b..., lambda..., alpha0]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.count_params());
        v.extend_from_slice(&self.w);
        v.extend_from_slice(&self.b);
        v.extend_from_slice(&self.lambda);
        v.push(self.alpha0);
        v
    }

    pub fn from_flat(neurons: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != 3 * neurons + 1 || neurons == 0 {
            return Err(Error::ArchitectureMismatch(format!(
                "{} values cannot hold a {neurons}-neuron network",
                flat.len()
            )));
        }
        Ok(Self {
            w: flat[..neurons].to_vec(),
            b: flat[neurons..2 * neurons].to_vec(),
            lambda: flat[2 * neurons..3 * neurons].to_vec(),
            alpha0: flat[3 * neurons],
        })
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let n = self.neurons();
        self.w.copy_from_slice(&flat[..n]);
        self.b.copy_from_slice(&flat[n..2 * n]);
        self.lambda.copy_from_slice(&flat[2 * n..3 * n]);
        self.alpha0 = flat[3 * n];
    }
}

/// Provenance stored with every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CheckpointMeta {
    pub class: Option<CircuitClass>,
    pub phi: Option<CircuitParams>,
    pub seed: u64,
    pub schedule: Option<Schedule>,
    /// SHA-256 of the serialised training configuration.
    #[serde(default)]
    pub config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct FourierCheckpoint {
    version: u32,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "W")]
    w: Vec<f64>,
    b: Vec<f64>,
    lambda: Vec<f64>,
    alpha0: f64,
    meta: CheckpointMeta,
}

pub fn save_checkpoint(net: &FourierNet, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let ck = FourierCheckpoint {
        version: CHECKPOINT_VERSION,
        n: net.neurons(),
        w: net.w.clone(),
        b: net.b.clone(),
        lambda: net.lambda.clone(),
        alpha0: net.alpha0,
        meta: meta.clone(),
    };
    fs::write(path, serde_json::to_string_pretty(&ck)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(FourierNet, CheckpointMeta)> {
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
    let ck: FourierCheckpoint =
        serde_json::from_value(raw).map_err(|e| Error::Checkpoint(format!("corrupt file {}: {e}", path.display())))?;
    let net = FourierNet::new(ck.w, ck.b, ck.lambda, ck.alpha0)?;
    if net.neurons() != ck.n {
        return Err(Error::Checkpoint(format!("declared N = {} but {} neurons stored", ck.n, net.neurons())));
    }
    Ok((net, ck.meta))
}
