//! Oracles shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use fourier_pinn::baseline::{loss_gradient_mlp, Mlp};
use fourier_pinn::circuit::{ode_for_class, preset, CircuitClass, CircuitParams, PhysParam, PresetKind};
use fourier_pinn::loss::{loss_gradient_fourier, phi_gradient, total_loss, DataBlock, InitialConditions, LossConfig, LossWeights};
use fourier_pinn::stats::wilcoxon_rank_sum;
use fourier_pinn::FourierNet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 5-point central difference of `f` at `x`.
pub fn central5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// `|a - b| / max(|b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

/// Normwise relative error between two gradient vectors.
pub fn grad_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = analytic.iter().zip(numeric).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Worst relative error of `eval_derivative(n)` against a 5-point difference
/// of `eval_derivative(n - 1)`, over `nets` random networks and n = 1..4.
///
/// The floor of the relative error is the derivative's magnitude bound
/// `sum |lambda_k| |W_k|^n`, so zero crossings do not blow up the ratio.
pub fn fourier_derivative_fd(nets: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..nets {
        let neurons = rng.gen_range(1..=20);
        let mut net = FourierNet::init(neurons, seed.wrapping_add(i as u64)).unwrap();
        for b in net.b.iter_mut() {
            *b = rng.gen_range(-3.0..3.0);
        }
        net.alpha0 = rng.gen_range(-1.0..1.0);
        let t: f64 = rng.gen_range(0.0..1.0);
        for n in 1..=4usize {
            let exact = net.eval_derivative(n, t).unwrap();
            let bound: f64 = net.lambda.iter().zip(&net.w).map(|(l, w)| l.abs() * w.abs().powi(n as i32)).sum();
            let fd = central5(|x| net.eval_derivative(n - 1, x).unwrap(), t, 1e-3);
            worst = worst.max(rel_err(exact, fd, bound.max(1e-300)));
        }
    }
    worst
}

/// A random loss setup around one of the preset circuits.
pub struct Setup {
    pub class: CircuitClass,
    pub phi: CircuitParams,
    pub config: LossConfig,
}

pub fn random_setup(rng: &mut ChaCha8Rng, target: bool) -> Setup {
    let class = CircuitClass::ALL[rng.gen_range(0..3)];
    let kind = if rng.gen_bool(0.5) { PresetKind::Initial } else { PresetKind::Analysis };
    let mut phi = preset(class, kind);
    phi.r *= rng.gen_range(0.5..2.0);
    phi.l *= rng.gen_range(0.5..2.0);
    phi.c *= rng.gen_range(0.5..2.0);
    let order = class.ode_order();
    let colloc: Vec<f64> = (0..rng.gen_range(3..15)).map(|_| rng.gen_range(0.0..1.0)).collect();
    let ic = InitialConditions { t0: 0.0, values: (0..order).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let config = if target {
        LossConfig::target(colloc, ic).unwrap()
    } else {
        let times: Vec<f64> = (0..rng.gen_range(2..10)).map(|_| rng.gen_range(0.0..1.0)).collect();
        let targets = times.iter().map(|_| rng.gen_range(-2.0..2.0)).collect();
        LossConfig::source(colloc, DataBlock { times, targets }, ic).unwrap()
    };
    let weights = LossWeights { data: rng.gen_range(0.1..2.0), pde: rng.gen_range(0.1..2.0), ic: rng.gen_range(0.1..2.0) };
    Setup { class, phi, config: config.with_weights(weights).unwrap() }
}

// Central differences of `f` along each coordinate; the perturbed copy lives
// in a cell because `central5` takes an immutable closure.
fn fd_gradient_cell(x: &[f64], f: impl Fn(&[f64]) -> f64, rel_step: f64) -> Vec<f64> {
    let p = std::cell::RefCell::new(x.to_vec());
    (0..x.len())
        .map(|i| {
            let h = rel_step * x[i].abs().max(1.0);
            let orig = x[i];
            central5(
                |v| {
                    p.borrow_mut()[i] = v;
                    let out = f(&p.borrow());
                    p.borrow_mut()[i] = orig;
                    out
                },
                orig,
                h,
            )
        })
        .collect()
}

/// Worst normwise relative error of the Fourier loss gradient (all 3N+1
/// parameters) over `configs` random setups.
pub fn fourier_gradient_fd(configs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..configs {
        let s = random_setup(&mut rng, i % 3 == 2);
        let ode = ode_for_class(s.class, &s.phi);
        let src = s.phi.source();
        let mut net = FourierNet::init(rng.gen_range(1..=6), seed ^ i as u64).unwrap();
        for b in net.b.iter_mut() {
            *b = rng.gen_range(-3.0..3.0);
        }
        net.alpha0 = rng.gen_range(-0.5..0.5);
        let n = net.neurons();
        let (_, g) = loss_gradient_fourier(&net, &s.config, &ode, &src).unwrap();
        let fd = fd_gradient_cell(
            &net.to_flat(),
            |p| total_loss(&FourierNet::from_flat(n, p).unwrap(), &s.config, &ode, &src).unwrap().total,
            1e-4,
        );
        worst = worst.max(grad_rel_err(&g, &fd));
    }
    worst
}

/// Worst normwise relative error of the physical-parameter gradient over
/// `configs` random setups and random nonempty subsets of {R, L, C}.
pub fn phi_gradient_fd(configs: usize, seed: u64) -> f64 {
    let all = [PhysParam::R, PhysParam::L, PhysParam::C];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..configs {
        let s = random_setup(&mut rng, false);
        let free: Vec<PhysParam> = loop {
            let f: Vec<PhysParam> = all.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            if !f.is_empty() {
                break f;
            }
        };
        let net = FourierNet::init(rng.gen_range(1..=6), seed ^ i as u64).unwrap();
        let g = phi_gradient(&net, &s.config, s.class, &s.phi, &free).unwrap();
        let at = |vals: &[f64]| {
            let mut phi = s.phi;
            for (p, v) in free.iter().zip(vals) {
                phi.set(*p, *v);
            }
            total_loss(&net, &s.config, &ode_for_class(s.class, &phi), &phi.source()).unwrap().total
        };
        let x: Vec<f64> = free.iter().map(|p| s.phi.get(*p)).collect();
        // step relative to each parameter's own magnitude (C is ~1e-5); the loss is
        // polynomial in R, L, C so truncation error is negligible next to roundoff
        let fd: Vec<f64> = (0..x.len())
            .map(|k| {
                let h = 1e-3 * x[k];
                central5(
                    |v| {
                        let mut y = x.clone();
                        y[k] = v;
                        at(&y)
                    },
                    x[k],
                    h,
                )
            })
            .collect();
        // compare on the relative scale so R, L and C are commensurate
        let ga: Vec<f64> = g.iter().zip(&x).map(|(g, x)| g * x).collect();
        let gn: Vec<f64> = fd.iter().zip(&x).map(|(g, x)| g * x).collect();
        worst = worst.max(grad_rel_err(&ga, &gn));
    }
    worst
}

/// Worst normwise relative error of the baseline gradient for a
/// one-hidden-layer, width-4 tanh network.
pub fn mlp_gradient_fd(configs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..configs {
        let s = random_setup(&mut rng, i % 3 == 2);
        let ode = ode_for_class(s.class, &s.phi);
        let src = s.phi.source();
        let mlp = Mlp::glorot(&[1, 4, 1], seed ^ (i as u64 + 1)).unwrap();
        let (_, g) = loss_gradient_mlp(&mlp, &s.config, &ode, &src).unwrap();
        let fd = fd_gradient_cell(
            &mlp.to_flat(),
            |p| {
                let mut m = mlp.clone();
                m.set_flat(p).unwrap();
                total_loss(&m, &s.config, &ode, &src).unwrap().total
            },
            1e-4,
        );
        worst = worst.max(grad_rel_err(&g, &fd));
    }
    worst
}

/// Worst relative error of jet derivatives `n! c_n` against 5-point
/// differences of the order below, for random small MLPs.
pub fn jet_fd(nets: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..nets {
        let hidden = rng.gen_range(1..=3);
        let mut sizes = vec![1];
        sizes.extend(std::iter::repeat_n(rng.gen_range(2..=8), hidden));
        sizes.push(1);
        let mlp = Mlp::glorot(&sizes, seed ^ i as u64).unwrap();
        let t: f64 = rng.gen_range(-1.0..1.0);
        let jet = mlp.jet_batch(&[t], 4).unwrap().remove(0);
        let scale = jet.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for n in 1..=4usize {
            let fd = central5(|x| mlp.jet_batch(&[x], n - 1).unwrap()[0][n - 1], t, 1e-3);
            worst = worst.max(rel_err(jet[n], fd, scale));
        }
    }
    worst
}

/// Null distribution of the rank sum of an untied sample of size `n` among
/// `n + m`: `counts[w]` is the number of rank subsets summing to `w`.
pub fn rank_sum_counts(n: usize, m: usize) -> Vec<u64> {
    let total = n + m;
    let max_sum = total * (total + 1) / 2;
    let mut counts = vec![vec![0u64; max_sum + 1]; n + 1];
    counts[0][0] = 1;
    for r in 1..=total {
        for k in (1..=n.min(r)).rev() {
            for w in (r..=max_sum).rev() {
                counts[k][w] += counts[k - 1][w - r];
            }
        }
    }
    counts.swap_remove(n)
}

/// Two-sided exact permutation p-value for an observed rank sum `w`.
pub fn exact_p(n: usize, m: usize, w: usize) -> f64 {
    let dist = rank_sum_counts(n, m);
    let mean = n as f64 * ((n + m) as f64 + 1.0) / 2.0;
    let d = (w as f64 - mean).abs();
    let all: u64 = dist.iter().sum();
    let tail: u64 = dist.iter().enumerate().filter(|(v, _)| (*v as f64 - mean).abs() >= d - 1e-9).map(|(_, c)| c).sum();
    tail as f64 / all as f64
}

/// Largest |p_normal - p_exact| over every attainable rank sum for sample
/// sizes `n` and `m`, with p_normal from the implementation under test.
pub fn wilcoxon_exact_gap(n: usize, m: usize) -> f64 {
    let total = n + m;
    let dist = rank_sum_counts(n, m);
    let mut worst = 0.0f64;
    for (w, &c) in dist.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let x = ranks_with_sum(n, total, w);
        let y: Vec<f64> = (1..=total).map(|r| r as f64).filter(|r| !x.contains(r)).collect();
        let approx = wilcoxon_rank_sum(&x, &y).unwrap().p;
        worst = worst.max((approx - exact_p(n, m, w)).abs());
    }
    worst
}

// Some n-subset of 1..=total with rank sum w (exists whenever the count is
// nonzero): greedy from the top.
fn ranks_with_sum(n: usize, total: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut remaining = w;
    let mut hi = total;
    for k in (1..=n).rev() {
        // smallest achievable with k values all <= hi is 1 + .. + k
        let min_rest = (k - 1) * k / 2;
        let v = hi.min(remaining - min_rest);
        out.push(v as f64);
        remaining -= v;
        hi = v - 1;
    }
    debug_assert_eq!(out.iter().sum::<f64>(), w as f64);
    out
}
