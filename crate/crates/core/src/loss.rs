//! Physics-informed losses shared by both model families.
//!
//! `total = w_data * L_data + w_pde * L_pde + w_ic * L_ic`, each term a mean
//! squared error. Target (label-free) configurations carry no data block, so
//! their loss is physics plus initial conditions only.

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitClass, CircuitParams, LinearOde, PhysParam, SourceWaveform};
use crate::error::{Error, Result};
use crate::fourier::FourierNet;

/// Anything that can report its own time derivatives.
pub trait DerivativeModel {
    fn max_derivative(&self) -> usize;

    /// Derivatives of orders `0..=order` at `t`.
    fn derivative_stack(&self, order: usize, t: f64) -> Result<Vec<f64>>;

    fn derivative_stacks(&self, order: usize, ts: &[f64]) -> Result<Vec<Vec<f64>>> {
        ts.iter().map(|&t| self.derivative_stack(order, t)).collect()
    }

    fn predict(&self, ts: &[f64]) -> Result<Vec<f64>> {
        Ok(self.derivative_stacks(0, ts)?.into_iter().map(|s| s[0]).collect())
    }
}

impl DerivativeModel for FourierNet {
    fn max_derivative(&self) -> usize {
        crate::fourier::MAX_DERIVATIVE
    }

    fn derivative_stack(&self, order: usize, t: f64) -> Result<Vec<f64>> {
        FourierNet::derivative_stack(self, order, t)
    }

    fn predict(&self, ts: &[f64]) -> Result<Vec<f64>> {
        Ok(ts.iter().map(|&t| self.eval(t)).collect())
    }
}

/// Prescribed `I^(k)(t0)` for `k = 0..order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub t0: f64,
    pub values: Vec<f64>,
}

impl InitialConditions {
    pub fn at_rest(t0: f64, order: usize) -> Self {
        Self { t0, values: vec![0.0; order] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub data: f64,
    pub pde: f64,
    pub ic: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { data: 1.0, pde: 1.0, ic: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataBlock {
    pub times: Vec<f64>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub weights: LossWeights,
    pub collocation: Vec<f64>,
    data: Option<DataBlock>,
    pub ic: InitialConditions,
}

impl LossConfig {
    /// Supervised configuration: data, physics and initial conditions.
    pub fn source(collocation: Vec<f64>, data: DataBlock, ic: InitialConditions) -> Result<Self> {
        if data.times.len() != data.targets.len() {
            return Err(Error::InvalidArgument(format!(
                "{} data times but {} targets",
                data.times.len(),
                data.targets.len()
            )));
        }
        Self { weights: LossWeights::default(), collocation, data: Some(data), ic }.validated()
    }

    /// Label-free configuration: physics and initial conditions only.
    pub fn target(collocation: Vec<f64>, ic: InitialConditions) -> Result<Self> {
        Self { weights: LossWeights::default(), collocation, data: None, ic }.validated()
    }

    pub fn with_weights(mut self, weights: LossWeights) -> Result<Self> {
        self.weights = weights;
        self.validated()
    }

    pub fn data(&self) -> Option<&DataBlock> {
        self.data.as_ref()
    }

    pub fn is_target(&self) -> bool {
        self.data.is_none()
    }

    fn validated(self) -> Result<Self> {
        let w = self.weights;
        if [w.data, w.pde, w.ic].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("loss weights must be >= 0, got {w:?}")));
        }
        if self.collocation.is_empty() {
            return Err(Error::InvalidArgument("empty collocation set".into()));
        }
        Ok(self)
    }

    fn check_against(&self, ode: &LinearOde) -> Result<()> {
        if self.ic.values.len() != ode.order() {
            return Err(Error::InvalidArgument(format!(
                "{} initial conditions for an order-{} ODE",
                self.ic.values.len(),
                ode.order()
            )));
        }
        Ok(())
    }
}

/// Uniform grid of `n` points on `[t0, t1]`, endpoints included.
pub fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![t0],
        _ => (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub data: f64,
    pub pde: f64,
    pub ic: f64,
}

/// `sum_k a_k I^(k)(t) - sum_k g_k V^(k)(t)` for a model.
pub fn residual<M: DerivativeModel + ?Sized>(model: &M, ode: &LinearOde, source: &SourceWaveform, t: f64) -> Result<f64> {
    if model.max_derivative() < ode.order() {
        return Err(Error::DerivativeOrder { order: ode.order(), max: model.max_derivative() });
    }
    let d = model.derivative_stack(ode.order(), t)?;
    Ok(ode.apply_lhs(&d) - ode.forcing_at(source, t))
}

/// Adjoints of the loss with respect to every derivative it consumed.
#[derive(Debug, Clone, Default)]
pub struct StackAdjoints {
    /// Per collocation point, one entry per derivative order `0..=order`.
    pub collocation: Vec<Vec<f64>>,
    /// Per data point, with respect to the model output.
    pub data: Vec<f64>,
    /// With respect to `I^(k)(t0)`, `k = 0..order`.
    pub ic: Vec<f64>,
}

/// Loss from precomputed derivative stacks.
///
/// `colloc` holds stacks of length `order + 1` at the collocation points,
/// `data_out` the model outputs at the data times and `ic_stack` the
/// derivatives at `t0` (at least `order` entries).
pub fn loss_from_stacks(
    config: &LossConfig,
    ode: &LinearOde,
    source: &SourceWaveform,
    colloc: &[Vec<f64>],
    data_out: &[f64],
    ic_stack: &[f64],
    want_adjoints: bool,
) -> Result<(LossBreakdown, StackAdjoints)> {
    config.check_against(ode)?;
    let w = config.weights;
    let mut adj = StackAdjoints::default();

    let m = colloc.len() as f64;
    let mut pde = 0.0;
    for (t, stack) in config.collocation.iter().zip(colloc) {
        let r = ode.apply_lhs(stack) - ode.forcing_at(source, *t);
        pde += r * r;
        if want_adjoints {
            let s = w.pde * 2.0 * r / m;
            adj.collocation.push(ode.lhs().iter().map(|a| s * a).collect());
        }
    }
    pde /= m;

    let mut data = 0.0;
    if let Some(block) = config.data() {
        let nd = block.targets.len().max(1) as f64;
        for (y, p) in block.targets.iter().zip(data_out) {
            let e = p - y;
            data += e * e;
            if want_adjoints {
                adj.data.push(w.data * 2.0 * e / nd);
            }
        }
        data /= nd;
    }

    let k = config.ic.values.len() as f64;
    let mut ic = 0.0;
    for (d, v) in ic_stack.iter().zip(&config.ic.values) {
        let e = d - v;
        ic += e * e;
        if want_adjoints {
            adj.ic.push(w.ic * 2.0 * e / k);
        }
    }
    ic /= k;

    let total = w.data * data + w.pde * pde + w.ic * ic;
    Ok((LossBreakdown { total, data, pde, ic }, adj))
}

/// Loss breakdown for any model that exposes its derivatives.
pub fn total_loss<M: DerivativeModel + ?Sized>(
    model: &M,
    config: &LossConfig,
    ode: &LinearOde,
    source: &SourceWaveform,
) -> Result<LossBreakdown> {
    let order = ode.order();
    if model.max_derivative() < order {
        return Err(Error::DerivativeOrder { order, max: model.max_derivative() });
    }
    let colloc = model.derivative_stacks(order, &config.collocation)?;
    let data_out = match config.data() {
        Some(b) => model.predict(&b.times)?,
        None => vec![],
    };
    let ic_stack = model.derivative_stack(order, config.ic.t0)?;
    Ok(loss_from_stacks(config, ode, source, &colloc, &data_out, &ic_stack, false)?.0)
}

/// Exact gradient of [`total_loss`] for a Fourier network, flat layout
/// `[W..., b..., lambda..., alpha0]`.
pub fn loss_gradient_fourier(
    net: &FourierNet,
    config: &LossConfig,
    ode: &LinearOde,
    source: &SourceWaveform,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let (b, g, _) = fourier_pass(net, config, ode, source, None)?;
    Ok((b, g))
}

/// Inverse-mode gradient with respect to the free physical parameters.
///
/// Only the physics term depends on R, L and C, through the lhs coefficients
/// of the class ODE.
pub fn phi_gradient(
    net: &FourierNet,
    config: &LossConfig,
    class: CircuitClass,
    phi: &CircuitParams,
    free: &[PhysParam],
) -> Result<Vec<f64>> {
    if free.is_empty() {
        return Err(Error::InvalidArgument("no free physical parameters".into()));
    }
    let ode = crate::circuit::ode_for_class(class, phi);
    let (_, _, g) = fourier_pass(net, config, &ode, &phi.source(), Some((class, phi, free)))?;
    Ok(g)
}

/// Loss, theta-gradient and (optionally) phi-gradient in one sweep.
pub fn loss_gradient_fourier_inverse(
    net: &FourierNet,
    config: &LossConfig,
    class: CircuitClass,
    phi: &CircuitParams,
    free: &[PhysParam],
) -> Result<(LossBreakdown, Vec<f64>, Vec<f64>)> {
    let ode = crate::circuit::ode_for_class(class, phi);
    let phi_part = if free.is_empty() { None } else { Some((class, phi, free)) };
    fourier_pass(net, config, &ode, &phi.source(), phi_part)
}

type PhiPart<'a> = Option<(CircuitClass, &'a CircuitParams, &'a [PhysParam])>;

fn fourier_pass(
    net: &FourierNet,
    config: &LossConfig,
    ode: &LinearOde,
    source: &SourceWaveform,
    phi_part: PhiPart<'_>,
) -> Result<(LossBreakdown, Vec<f64>, Vec<f64>)> {
    config.check_against(ode)?;
    let order = ode.order();
    if order > crate::fourier::MAX_DERIVATIVE {
        return Err(Error::DerivativeOrder { order, max: crate::fourier::MAX_DERIVATIVE });
    }
    let w = config.weights;
    let mut grad = vec![0.0; net.count_params()];
    let partials: Vec<Vec<f64>> = match phi_part {
        Some((class, phi, free)) => free.iter().map(|p| class.lhs_partials(phi, *p)).collect(),
        None => vec![],
    };
    let mut phi_grad = vec![0.0; partials.len()];

    // physics: value pass, then gradient weighted by the residual
    let m = config.collocation.len() as f64;
    let mut pde = 0.0;
    for &t in &config.collocation {
        let lhs_val = net.combo_value_and_grad(ode.lhs(), t, 0.0, None);
        let r = lhs_val - ode.forcing_at(source, t);
        pde += r * r;
        let s = w.pde * 2.0 * r / m;
        if s != 0.0 {
            net.combo_value_and_grad(ode.lhs(), t, s, Some(&mut grad));
        }
        for (pg, da) in phi_grad.iter_mut().zip(&partials) {
            *pg += s * net.combo_value_and_grad(da, t, 0.0, None);
        }
    }
    pde /= m;

    let mut data = 0.0;
    if let Some(block) = config.data() {
        let nd = block.targets.len().max(1) as f64;
        for (&t, &y) in block.times.iter().zip(&block.targets) {
            let e = net.eval(t) - y;
            data += e * e;
            let s = w.data * 2.0 * e / nd;
            if s != 0.0 {
                net.combo_value_and_grad(&[1.0], t, s, Some(&mut grad));
            }
        }
        data /= nd;
    }

    let k = config.ic.values.len() as f64;
    let mut ic = 0.0;
    let mut unit = vec![0.0; order];
    for (n, &v) in config.ic.values.iter().enumerate() {
        unit.iter_mut().for_each(|u| *u = 0.0);
        unit[n] = 1.0;
        let e = net.combo_value_and_grad(&unit[..=n], config.ic.t0, 0.0, None) - v;
        ic += e * e;
        let s = w.ic * 2.0 * e / k;
        if s != 0.0 {
            net.combo_value_and_grad(&unit[..=n], config.ic.t0, s, Some(&mut grad));
        }
    }
    ic /= k;

    let total = w.data * data + w.pde * pde + w.ic * ic;
    if !total.is_finite() {
        return Err(Error::Divergence(format!("non-finite loss {total}")));
    }
    Ok((LossBreakdown { total, data, pde, ic }, grad, phi_grad))
}

/// Header of the per-epoch log.
pub const EPOCH_LOG_HEADER: &str = "epoch,lr,total,l_data,l_pde,l_ic";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss: LossBreakdown,
}

pub fn epoch_log_csv(records: &[EpochRecord]) -> String {
    let mut s = String::from(EPOCH_LOG_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch, r.lr, r.loss.total, r.loss.data, r.loss.pde, r.loss.ic
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{ode_for_class, preset, PresetKind};

    fn class1() -> (CircuitParams, LinearOde, SourceWaveform) {
        let phi = preset(CircuitClass::Class1, PresetKind::Initial);
        let ode = ode_for_class(CircuitClass::Class1, &phi);
        (phi, ode, phi.source())
    }

    /// One-neuron network equal to the periodic steady state of `ode`.
    fn phasor_net(ode: &LinearOde, src: &SourceWaveform) -> FourierNet {
        let (amp, phase) = ode.steady_state(src);
        // amp sin(wt + phase) = amp cos(wt + phase - pi/2)
        FourierNet::new(vec![src.omega], vec![phase - std::f64::consts::FRAC_PI_2], vec![amp], 0.0).unwrap()
    }

    #[test]
    fn zero_model_zero_source() {
        let (_, ode, _) = class1();
        let src = SourceWaveform::new(0.0, 100.0).unwrap();
        let net = FourierNet::new(vec![3.0, 4.0], vec![0.0; 2], vec![0.0; 2], 0.0).unwrap();
        for t in uniform_grid(0.0, 1.0, 11) {
            assert_eq!(residual(&net, &ode, &src, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn phasor_solution_has_tiny_residual() {
        let (phi, ode, src) = class1();
        let net = phasor_net(&ode, &src);
        for t in uniform_grid(0.0, 1.0, 101) {
            let r = residual(&net, &ode, &src, t).unwrap();
            assert!(r.abs() < 1e-8 * phi.vmax * src.omega, "t={t} r={r}");
        }
    }

    #[test]
    fn residual_is_dot_product() {
        let (_, ode, src) = class1();
        let net = FourierNet::init(6, 3).unwrap();
        let t = 0.417;
        let mut lhs = 0.0;
        for (k, a) in ode.lhs().iter().enumerate() {
            lhs += a * net.eval_derivative(k, t).unwrap();
        }
        let forcing = src.derivative(1, t);
        let r = residual(&net, &ode, &src, t).unwrap();
        assert!((r - (lhs - forcing)).abs() < 1e-12 * lhs.abs().max(forcing.abs()));
    }

    #[test]
    fn exact_model_gives_zero_loss() {
        let (_, ode, src) = class1();
        let net = phasor_net(&ode, &src);
        let ts = uniform_grid(0.0, 0.2, 50);
        let targets = ts.iter().map(|&t| net.eval(t)).collect();
        let ic = InitialConditions { t0: 0.0, values: vec![net.eval(0.0), net.eval_derivative(1, 0.0).unwrap()] };
        let cfg = LossConfig::source(ts.clone(), DataBlock { times: ts, targets }, ic).unwrap();
        let l = total_loss(&net, &cfg, &ode, &src).unwrap();
        assert!(l.data == 0.0 && l.ic == 0.0);
        assert!(l.pde < 1e-20 * (src.vmax * src.omega).powi(2));
    }

    #[test]
    fn target_mode_has_no_data_term() {
        let (_, ode, src) = class1();
        let net = FourierNet::init(4, 1).unwrap();
        let cfg = LossConfig::target(uniform_grid(0.0, 0.5, 40), InitialConditions::at_rest(0.0, 2)).unwrap();
        assert!(cfg.is_target());
        let l = total_loss(&net, &cfg, &ode, &src).unwrap();
        assert_eq!(l.data, 0.0);
        assert_eq!(l.total, l.pde + l.ic);
    }

    #[test]
    fn weights_are_linear() {
        let (_, ode, src) = class1();
        let net = FourierNet::init(4, 2).unwrap();
        let ts = uniform_grid(0.0, 1.0, 30);
        let targets = ts.iter().map(|t| t.sin()).collect();
        let cfg = LossConfig::source(ts.clone(), DataBlock { times: ts, targets }, InitialConditions::at_rest(0.0, 2)).unwrap();
        let a = total_loss(&net, &cfg, &ode, &src).unwrap();
        let cfg2 = cfg.with_weights(LossWeights { data: 1.0, pde: 2.0, ic: 1.0 }).unwrap();
        let b = total_loss(&net, &cfg2, &ode, &src).unwrap();
        assert_eq!((a.pde, a.data, a.ic), (b.pde, b.data, b.ic));
        assert!((b.total - (a.total + a.pde)).abs() < 1e-12 * b.total);
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::target(vec![], InitialConditions::at_rest(0.0, 2)).is_err());
        let cfg = LossConfig::target(vec![0.1], InitialConditions::at_rest(0.0, 2)).unwrap();
        assert!(cfg.clone().with_weights(LossWeights { data: -1.0, pde: 1.0, ic: 1.0 }).is_err());
        let (_, ode, src) = class1();
        let bad = LossConfig::target(vec![0.1], InitialConditions::at_rest(0.0, 3)).unwrap();
        assert!(total_loss(&FourierNet::init(2, 0).unwrap(), &bad, &ode, &src).is_err());
        assert!(LossConfig::source(vec![0.1], DataBlock { times: vec![0.1], targets: vec![] }, cfg.ic).is_err());
    }

    #[test]
    fn global_minimum_has_zero_gradient() {
        let (_, ode, _) = class1();
        let src = SourceWaveform::new(0.0, 188.0).unwrap();
        let net = FourierNet::new(vec![3.0, -7.0, 11.0], vec![0.1, 0.2, 0.3], vec![0.0; 3], 0.0).unwrap();
        let cfg = LossConfig::target(uniform_grid(0.0, 0.5, 64), InitialConditions::at_rest(0.0, 2)).unwrap();
        let (l, g) = loss_gradient_fourier(&net, &cfg, &ode, &src).unwrap();
        assert_eq!(l.total, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fourier_path_matches_stack_path() {
        for class in CircuitClass::ALL {
            let phi = preset(class, PresetKind::Initial);
            let ode = ode_for_class(class, &phi);
            let src = phi.source();
            let net = FourierNet::init(5, 17).unwrap();
            let ts = uniform_grid(0.0, 1.0, 33);
            let targets = ts.iter().map(|t| (3.0 * t).cos()).collect();
            let ic = InitialConditions { t0: 0.1, values: (0..ode.order()).map(|k| k as f64 * 0.5).collect() };
            let cfg = LossConfig::source(ts.clone(), DataBlock { times: ts, targets }, ic).unwrap();
            let a = total_loss(&net, &cfg, &ode, &src).unwrap();
            let (b, _) = loss_gradient_fourier(&net, &cfg, &ode, &src).unwrap();
            for (x, y) in [(a.total, b.total), (a.data, b.data), (a.pde, b.pde), (a.ic, b.ic)] {
                assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300), "{class}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn alpha0_gradient_sources() {
        // With a_0 = 0 in the ODE and no data, alpha0 only sees the order-0 IC term.
        let ode = LinearOde::new(vec![0.0, 1.0, 1.0], vec![0.0, 1.0]).unwrap();
        let src = SourceWaveform::from_hz(1.0, 5.0).unwrap();
        let net = FourierNet::init(3, 4).unwrap();
        let mut ic = InitialConditions::at_rest(0.0, 2);
        let cfg = LossConfig::target(uniform_grid(0.0, 0.5, 20), ic.clone()).unwrap();
        let (_, g) = loss_gradient_fourier(&net, &cfg, &ode, &src).unwrap();
        let e0 = net.eval(0.0);
        assert!((g[9] - 2.0 * e0 / 2.0).abs() < 1e-12);
        ic.values[0] = e0;
        let cfg = LossConfig::target(uniform_grid(0.0, 0.5, 20), ic).unwrap();
        let (_, g) = loss_gradient_fourier(&net, &cfg, &ode, &src).unwrap();
        assert_eq!(g[9], 0.0);
    }

    #[test]
    fn phi_gradient_zero_at_zero_residual() {
        let (phi, ode, src) = class1();
        let net = phasor_net(&ode, &src);
        let cfg = LossConfig::target(vec![0.0], InitialConditions::at_rest(0.0, 2)).unwrap();
        let g = phi_gradient(&net, &cfg, CircuitClass::Class1, &phi, &[PhysParam::R, PhysParam::L, PhysParam::C]).unwrap();
        let scale = (phi.vmax * src.omega).powi(2);
        assert!(g.iter().all(|v| v.abs() < 1e-12 * scale), "{g:?}");
        assert!(phi_gradient(&net, &cfg, CircuitClass::Class1, &phi, &[]).is_err());
    }

    #[test]
    fn phi_gradient_r_closed_form() {
        let (phi, ode, src) = class1();
        let net = FourierNet::init(4, 8).unwrap();
        let ts = uniform_grid(0.0, 1.0, 25);
        let cfg = LossConfig::target(ts.clone(), InitialConditions::at_rest(0.0, 2)).unwrap();
        let g = phi_gradient(&net, &cfg, CircuitClass::Class1, &phi, &[PhysParam::R]).unwrap();
        let m = ts.len() as f64;
        let expect: f64 = ts
            .iter()
            .map(|&t| 2.0 / m * residual(&net, &ode, &src, t).unwrap() * net.eval_derivative(1, t).unwrap())
            .sum();
        assert!((g[0] - expect).abs() < 1e-10 * expect.abs());
    }

    #[test]
    fn epoch_log_format() {
        let rec = EpochRecord { epoch: 3, lr: 0.1, loss: LossBreakdown { total: 3.0, data: 1.0, pde: 1.5, ic: 0.5 } };
        let s = epoch_log_csv(&[rec]);
        assert_eq!(s, "epoch,lr,total,l_data,l_pde,l_ic\n3,0.1,3,1,1.5,0.5\n");
    }

    proptest::proptest! {
        #[test]
        fn loss_nonnegative(seed in 0u64..1000, n in 1usize..6) {
            let (_, ode, src) = class1();
            let net = FourierNet::init(n, seed).unwrap();
            let cfg = LossConfig::target(uniform_grid(0.0, 1.0, 16), InitialConditions::at_rest(0.0, 2)).unwrap();
            let l = total_loss(&net, &cfg, &ode, &src).unwrap();
            proptest::prop_assert!(l.total >= 0.0 && l.pde >= 0.0 && l.ic >= 0.0);
        }

        #[test]
        fn residual_affine(s1 in 0u64..500, s2 in 500u64..1000, t in 0.0f64..1.0) {
            // r(a + b) = r(a) + r(b) + forcing
            let (_, ode, src) = class1();
            let a = FourierNet::init(3, s1).unwrap();
            let b = FourierNet::init(2, s2).unwrap();
            let mut sum = a.clone();
            sum.w.extend(&b.w);
            sum.b.extend(&b.b);
            sum.lambda.extend(&b.lambda);
            sum.alpha0 += b.alpha0;
            let lhs = residual(&sum, &ode, &src, t).unwrap();
            let rhs = residual(&a, &ode, &src, t).unwrap() + residual(&b, &ode, &src, t).unwrap() + ode.forcing_at(&src, t);
            proptest::prop_assert!((lhs - rhs).abs() < 1e-9 * (lhs.abs() + rhs.abs() + 1.0));
        }
    }
}
