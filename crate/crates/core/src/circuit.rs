//! Circuit parameters, the three circuit-class ODEs and the sinusoidal source.
//!
//! Every ODE is linear with constant coefficients in the load current `I`:
//!
//! ```text
//! sum_k lhs[k] * d^k I/dt^k  =  sum_k forcing[k] * d^k V_S/dt^k
//! ```
//!
//! with `V_S(t) = Vmax * sin(omega * t)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical circuit parameters, all in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "Vmax")]
    pub vmax: f64,
    pub f: f64,
}

impl CircuitParams {
    pub fn new(r: f64, l: f64, c: f64, vmax: f64, f: f64) -> Result<Self> {
        let p = Self { r, l, c, vmax, f };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("R", self.r), ("L", self.l), ("C", self.c), ("Vmax", self.vmax), ("f", self.f)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn source(&self) -> SourceWaveform {
        SourceWaveform { vmax: self.vmax, omega: 2.0 * PI * self.f }
    }

    pub fn get(&self, p: PhysParam) -> f64 {
        match p {
            PhysParam::R => self.r,
            PhysParam::L => self.l,
            PhysParam::C => self.c,
        }
    }

    pub fn set(&mut self, p: PhysParam, value: f64) {
        match p {
            PhysParam::R => self.r = value,
            PhysParam::L => self.l = value,
            PhysParam::C => self.c = value,
        }
    }
}

/// The physical parameters that inverse mode may treat as unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhysParam {
    R,
    L,
    C,
}

impl PhysParam {
    pub fn name(self) -> &'static str {
        match self {
            PhysParam::R => "R",
            PhysParam::L => "L",
            PhysParam::C => "C",
        }
    }
}

impl FromStr for PhysParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "R" | "r" => Ok(PhysParam::R),
            "L" | "l" => Ok(PhysParam::L),
            "C" | "c" => Ok(PhysParam::C),
            other => Err(Error::InvalidArgument(format!("unknown physical parameter '{other}'"))),
        }
    }
}

/// `V(t) = vmax * sin(omega * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceWaveform {
    pub vmax: f64,
    /// Angular frequency in rad/s.
    pub omega: f64,
}

impl SourceWaveform {
    pub fn new(vmax: f64, omega: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) || !vmax.is_finite() {
            return Err(Error::InvalidParams(format!("bad source: vmax={vmax}, omega={omega}")));
        }
        Ok(Self { vmax, omega })
    }

    pub fn from_hz(vmax: f64, f: f64) -> Result<Self> {
        Self::new(vmax, 2.0 * PI * f)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.vmax * (self.omega * t).sin()
    }

    /// k-th time derivative of the source at `t`.
    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        let phase = self.omega * t;
        let amp = self.vmax * self.omega.powi(k as i32);
        let shape = match k % 4 {
            0 => phase.sin(),
            1 => phase.cos(),
            2 => -phase.sin(),
            _ => -phase.cos(),
        };
        amp * shape
    }
}

/// Free-function form of [`SourceWaveform::derivative`].
pub fn source_derivative(wave: &SourceWaveform, k: usize, t: f64) -> f64 {
    wave.derivative(k, t)
}

/// Linear constant-coefficient ODE in the load current.
///
/// `lhs[k]` multiplies the k-th derivative of the current; `forcing[k]`
/// multiplies the k-th derivative of the source voltage. Both are dense,
/// zeros included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OdeRepr", into = "OdeRepr")]
pub struct LinearOde {
    lhs: Vec<f64>,
    forcing: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct OdeRepr {
    order: usize,
    lhs: Vec<f64>,
    forcing: Vec<f64>,
}

impl TryFrom<OdeRepr> for LinearOde {
    type Error = Error;

    fn try_from(r: OdeRepr) -> Result<Self> {
        let ode = LinearOde::new(r.lhs, r.forcing)?;
        if ode.order() != r.order {
            return Err(Error::InvalidOde(format!(
                "declared order {} but lhs implies {}",
                r.order,
                ode.order()
            )));
        }
        Ok(ode)
    }
}

impl From<LinearOde> for OdeRepr {
    fn from(o: LinearOde) -> Self {
        OdeRepr { order: o.order(), lhs: o.lhs, forcing: o.forcing }
    }
}

impl LinearOde {
    pub fn new(lhs: Vec<f64>, forcing: Vec<f64>) -> Result<Self> {
        if lhs.len() < 2 {
            return Err(Error::InvalidOde("order must be at least 1".into()));
        }
        if lhs.iter().chain(forcing.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidOde("non-finite coefficient".into()));
        }
        if *lhs.last().unwrap() == 0.0 {
            return Err(Error::InvalidOde("leading coefficient is zero".into()));
        }
        Ok(Self { lhs, forcing })
    }

    pub fn order(&self) -> usize {
        self.lhs.len() - 1
    }

    pub fn lhs(&self) -> &[f64] {
        &self.lhs
    }

    pub fn forcing(&self) -> &[f64] {
        &self.forcing
    }

    pub fn leading(&self) -> f64 {
        self.lhs[self.order()]
    }

    /// Highest source derivative used by the forcing side.
    pub fn forcing_order(&self) -> usize {
        self.forcing.len().saturating_sub(1)
    }

    /// `sum_k forcing[k] * V^(k)(t)`.
    pub fn forcing_at(&self, source: &SourceWaveform, t: f64) -> f64 {
        self.forcing
            .iter()
            .enumerate()
            .filter(|(_, g)| **g != 0.0)
            .map(|(k, g)| g * source.derivative(k, t))
            .sum()
    }

    /// `sum_k lhs[k] * derivs[k]`; `derivs` must hold at least `order + 1` entries.
    pub fn apply_lhs(&self, derivs: &[f64]) -> f64 {
        self.lhs.iter().zip(derivs).map(|(a, d)| a * d).sum()
    }

    fn poly_at(coeffs: &[f64], s: Complex64) -> Complex64 {
        coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// Transfer function `forcing(s) / lhs(s)` at `s = j*omega`.
    pub fn frequency_response(&self, omega: f64) -> Complex64 {
        let s = Complex64::new(0.0, omega);
        Self::poly_at(&self.forcing, s) / Self::poly_at(&self.lhs, s)
    }

    /// Periodic particular solution for `V = vmax sin(omega t)`: returns
    /// `(amplitude, phase)` with `I_p(t) = amplitude * sin(omega t + phase)`.
    pub fn steady_state(&self, source: &SourceWaveform) -> (f64, f64) {
        let g = self.frequency_response(source.omega);
        (source.vmax * g.norm(), g.arg())
    }

    /// k-th derivative of the periodic particular solution at `t`.
    pub fn steady_state_derivative(&self, source: &SourceWaveform, k: usize, t: f64) -> f64 {
        let (amp, phase) = self.steady_state(source);
        let shifted = SourceWaveform { vmax: amp, omega: source.omega };
        shifted.derivative(k, t + phase / source.omega)
    }

    /// Routh–Hurwitz test: every characteristic root strictly in the left half plane.
    pub fn is_hurwitz_stable(&self) -> bool {
        // descending powers, normalised to a positive leading coefficient
        let sign = self.leading().signum();
        let desc: Vec<f64> = self.lhs.iter().rev().map(|c| c * sign).collect();
        if desc.iter().any(|&c| c <= 0.0) {
            return false;
        }
        let n = desc.len();
        let mut row0: Vec<f64> = desc.iter().step_by(2).copied().collect();
        let mut row1: Vec<f64> = desc.iter().skip(1).step_by(2).copied().collect();
        for _ in 0..n.saturating_sub(2) {
            let pivot = row1.first().copied().unwrap_or(0.0);
            if pivot <= 0.0 {
                return false;
            }
            let len = row0.len().saturating_sub(1);
            let next: Vec<f64> = (0..len)
                .map(|i| {
                    let a = row0.get(i + 1).copied().unwrap_or(0.0);
                    let b = row1.get(i + 1).copied().unwrap_or(0.0);
                    (pivot * a - row0[0] * b) / pivot
                })
                .collect();
            row0 = row1;
            row1 = next;
        }
        row1.first().is_none_or(|&v| v > 0.0) && row0.first().is_none_or(|&v| v > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CircuitClass {
    Class1,
    Class2,
    Class3,
}

impl CircuitClass {
    pub const ALL: [CircuitClass; 3] = [CircuitClass::Class1, CircuitClass::Class2, CircuitClass::Class3];

    pub fn index(self) -> u8 {
        match self {
            CircuitClass::Class1 => 1,
            CircuitClass::Class2 => 2,
            CircuitClass::Class3 => 3,
        }
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(CircuitClass::Class1),
            2 => Ok(CircuitClass::Class2),
            3 => Ok(CircuitClass::Class3),
            _ => Err(Error::InvalidArgument(format!("circuit class must be 1, 2 or 3, got {i}"))),
        }
    }

    pub fn ode_order(self) -> usize {
        match self {
            CircuitClass::Class1 => 2,
            CircuitClass::Class2 => 3,
            CircuitClass::Class3 => 4,
        }
    }

    /// Partial derivatives of the lhs coefficients with respect to one of R, L, C.
    /// Forcing coefficients do not depend on R, L or C for any class.
    pub fn lhs_partials(self, phi: &CircuitParams, wrt: PhysParam) -> Vec<f64> {
        let CircuitParams { r, l, c, .. } = *phi;
        use PhysParam::*;
        match (self, wrt) {
            (CircuitClass::Class1, R) => vec![0.0, 1.0, 0.0],
            (CircuitClass::Class1, L) => vec![0.0, 0.0, 1.0],
            (CircuitClass::Class1, C) => vec![-1.0 / (c * c), 0.0, 0.0],
            (CircuitClass::Class2, R) => vec![0.0, 2.0, 0.0, l * c],
            (CircuitClass::Class2, L) => vec![0.0, 0.0, 1.0, r * c],
            (CircuitClass::Class2, C) => vec![-1.0 / (c * c), 0.0, 0.0, r * l],
            (CircuitClass::Class3, R) => vec![1.0, 0.0, 0.0, 0.0, l * l * c * c],
            (CircuitClass::Class3, L) => vec![0.0, 2.0 * l * c + 2.0, 3.0 * c, 0.0, 2.0 * r * l * c * c],
            (CircuitClass::Class3, C) => vec![0.0, l * l, 3.0 * l, 0.0, 2.0 * r * l * l * c],
        }
    }
}

impl fmt::Display for CircuitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "class{}", self.index())
    }
}

impl FromStr for CircuitClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let digits = t.trim_start_matches("class");
        digits
            .parse::<u8>()
            .map_err(|_| Error::InvalidArgument(format!("bad circuit class '{s}'")))
            .and_then(CircuitClass::from_index)
    }
}

/// Governing ODE of a circuit class.
///
/// Class 3 is the fourth-order equation with the `(L^2 C + 2L)` first-order
/// coefficient and no third-order term; it is taken verbatim and is not
/// Hurwitz-stable for the tabulated parameter sets.
pub fn ode_for_class(class: CircuitClass, phi: &CircuitParams) -> LinearOde {
    let CircuitParams { r, l, c, .. } = *phi;
    let (lhs, forcing) = match class {
        CircuitClass::Class1 => (vec![1.0 / c, r, l], vec![0.0, 1.0]),
        CircuitClass::Class2 => (vec![1.0 / c, 2.0 * r, l, r * l * c], vec![0.0, 1.0]),
        CircuitClass::Class3 => (vec![r, l * l * c + 2.0 * l, 3.0 * l * c, 0.0, r * l * l * c * c], vec![1.0]),
    };
    LinearOde { lhs, forcing }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PresetKind {
    /// Source-training parameters.
    Initial,
    /// New parameters used for unsupervised analysis.
    Analysis,
}

impl FromStr for PresetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "initial" => Ok(PresetKind::Initial),
            "analysis" => Ok(PresetKind::Analysis),
            other => Err(Error::InvalidArgument(format!("unknown preset '{other}'"))),
        }
    }
}

pub fn preset(class: CircuitClass, which: PresetKind) -> CircuitParams {
    let (r, l, c, vmax, f) = match (class, which) {
        (CircuitClass::Class1, PresetKind::Initial) => (5.0, 0.005, 0.009, 10.0, 30.0),
        (CircuitClass::Class2, PresetKind::Initial) => (50.0, 0.001, 0.00009, 150.0, 30.0),
        (CircuitClass::Class3, PresetKind::Initial) => (50.0, 0.005, 0.00006, 20.0, 30.0),
        (CircuitClass::Class1, PresetKind::Analysis) => (10.0, 0.01, 0.0009, 15.0, 25.0),
        (CircuitClass::Class2, PresetKind::Analysis) => (10.0, 0.0009, 0.00006, 90.0, 40.0),
        (CircuitClass::Class3, PresetKind::Analysis) => (25.0, 0.009, 0.000065, 100.0, 60.0),
    };
    CircuitParams { r, l, c, vmax, f }
}
