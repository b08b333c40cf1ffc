//! The kinetic averaging operator
//!
//! `K_G F(t, x) = int_0^t int (grad_x F)(s, x - (t - s) v) . G(t, s, x, v) dv ds`,
//!
//! evaluated in Fourier variables as
//!
//! `(K_G F)_l(t) = sum_k int_0^t F_k(s) i k . (F_{x,v} G)(t, s, l - k, k (t - s)) ds`.
//!
//! `F_x` uses the `(2 pi)^-d` torus convention, `F_v` is the unnormalised
//! transform `int e^{-i v . xi} G dv`. Time integrals are trapezoidal on a
//! uniform grid shared by input and output.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mixed Fourier evaluator of a vector-valued symbol `G(t, s, x, v)`.
pub trait AveragingSymbol: Sync {
    fn dim(&self) -> usize;

    /// Largest `t` the evaluator accepts.
    fn horizon(&self) -> f64;

    /// Modes `l` outside which `(F_{x,v} G)(t, s, l, .)` vanishes.
    fn x_support(&self) -> Vec<Vec<i64>>;

    /// `(F_{x,v} G)(t, s, l, xi)`, one entry per vector component.
    /// Defined for `0 <= s <= t <= horizon`.
    fn transform(&self, t: f64, s: f64, l: &[i64], xi: &[f64]) -> Result<Vec<Complex64>>;
}

fn check_domain(t: f64, s: f64, horizon: f64) -> Result<()> {
    let tol = 1e-12 * horizon.max(1.0);
    if !(s >= -tol && s <= t + tol && t <= horizon + tol) {
        return Err(Error::SymbolDomain(format!("(t, s) = ({t}, {s}) outside 0 <= s <= t <= {horizon}")));
    }
    Ok(())
}

/// `G = scale e^{-decay (t - s)} chi(x) exp(-|v - c|^2 / (2 w^2)) dir` with
/// `chi = sum_m c_m e^{i m . x}` a trigonometric polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSymbol {
    pub d: usize,
    pub horizon: f64,
    pub modes: Vec<(Vec<i64>, Complex64)>,
    pub center: Vec<f64>,
    pub width: f64,
    pub direction: Vec<f64>,
    pub decay: f64,
    pub scale: f64,
}

impl GaussianSymbol {
    /// x-independent unit Gaussian along the first axis.
    pub fn new(d: usize, horizon: f64) -> Self {
        let mut direction = vec![0.0; d];
        direction[0] = 1.0;
        Self {
            d,
            horizon,
            modes: vec![(vec![0; d], Complex64::new(1.0, 0.0))],
            center: vec![0.0; d],
            width: 1.0,
            direction,
            decay: 0.0,
            scale: 1.0,
        }
    }

    /// A fixed x-dependent Schwartz symbol used by the norm sweeps.
    pub fn reference(d: usize, horizon: f64) -> Self {
        let mut e = vec![0; d];
        let mut modes = vec![(vec![0; d], Complex64::new(1.0, 0.0))];
        e[0] = 1;
        modes.push((e.clone(), Complex64::new(0.3, 0.2)));
        modes.push((e.iter().map(|x| -x).collect(), Complex64::new(0.3, -0.2)));
        let mut center = vec![0.0; d];
        center[0] = 0.25;
        Self { modes, center, width: 0.8, decay: 0.5, ..Self::new(d, horizon) }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.scale *= c;
        self
    }

    fn time_factor(&self, t: f64, s: f64) -> f64 {
        self.scale * (-self.decay * (t - s)).exp()
    }

    fn amplitude(&self, l: &[i64]) -> Complex64 {
        self.modes.iter().filter(|(m, _)| m.as_slice() == l).map(|(_, c)| *c).sum()
    }

    /// `int e^{-i v . xi} exp(-|v - c|^2 / (2 w^2)) dv` over `R^d`.
    pub fn gaussian_transform(&self, xi: &[f64]) -> Complex64 {
        let w = self.width;
        let cx: f64 = self.center.iter().zip(xi).map(|(c, x)| c * x).sum();
        let x2: f64 = xi.iter().map(|x| x * x).sum();
        let norm = ((2.0 * PI).sqrt() * w).powi(self.d as i32);
        Complex64::from_polar(norm * (-0.5 * w * w * x2).exp(), -cx)
    }

    /// Real-space value `G(t, s, x, v)`.
    pub fn value(&self, t: f64, s: f64, x: &[f64], v: &[f64]) -> Vec<Complex64> {
        let chi: Complex64 = self
            .modes
            .iter()
            .map(|(m, c)| {
                let phase: f64 = m.iter().zip(x).map(|(&k, &y)| k as f64 * y).sum();
                c * Complex64::from_polar(1.0, phase)
            })
            .sum();
        let r2: f64 = v.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        let g = self.time_factor(t, s) * (-r2 / (2.0 * self.width * self.width)).exp();
        self.direction.iter().map(|e| chi * g * e).collect()
    }
}

impl AveragingSymbol for GaussianSymbol {
    fn dim(&self) -> usize {
        self.d
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn x_support(&self) -> Vec<Vec<i64>> {
        let mut out: Vec<Vec<i64>> = Vec::new();
        for (m, c) in &self.modes {
            if c.norm() > 0.0 && !out.contains(m) {
                out.push(m.clone());
            }
        }
        out
    }

    fn transform(&self, t: f64, s: f64, l: &[i64], xi: &[f64]) -> Result<Vec<Complex64>> {
        check_domain(t, s, self.horizon)?;
        let a = self.amplitude(l) * self.gaussian_transform(xi) * self.time_factor(t, s);
        Ok(self.direction.iter().map(|e| a * e).collect())
    }
}

/// Uniform time grid on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if n < 2 || !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("time grid needs T > 0 and >= 2 nodes, got T = {horizon}, n = {n}")));
        }
        let h = horizon / (n - 1) as f64;
        Ok(Self { horizon, nodes: (0..n).map(|i| i as f64 * h).collect() })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.horizon / (self.nodes.len() - 1) as f64
    }

    /// Trapezoid weights of `int_0^{t_i}` over nodes `0..=i`.
    pub fn partial_weights(&self, i: usize) -> Vec<f64> {
        let h = self.step();
        if i == 0 {
            return vec![0.0];
        }
        let mut w = vec![h; i + 1];
        w[0] = 0.5 * h;
        w[i] = 0.5 * h;
        w
    }

    /// Trapezoid weights of `int_0^T`.
    pub fn weights(&self) -> Vec<f64> {
        self.partial_weights(self.nodes.len() - 1)
    }
}

/// Time-indexed Fourier coefficients on a fixed list of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSeries {
    pub modes: Vec<Vec<i64>>,
    /// `data[i][n]` is the coefficient of `modes[n]` at time node `i`.
    pub data: Vec<Vec<Complex64>>,
}

impl ModeSeries {
    pub fn zeros(modes: Vec<Vec<i64>>, nt: usize) -> Self {
        let n = modes.len();
        Self { modes, data: vec![vec![Complex64::new(0.0, 0.0); n]; nt] }
    }

    pub fn coefficient(&self, i: usize, mode: &[i64]) -> Complex64 {
        self.modes
            .iter()
            .position(|m| m.as_slice() == mode)
            .map_or(Complex64::new(0.0, 0.0), |n| self.data[i][n])
    }

    /// `||F||_{L^2([0,T], H^alpha)}` with `(2 pi)^d sum (1 + |k|^alpha) |F_k|^2`;
    /// `alpha = 0` gives the plain `L^2 L^2` norm.
    pub fn norm(&self, grid: &TimeGrid, alpha: f64) -> f64 {
        let d = self.modes.first().map_or(1, Vec::len);
        let vol = (2.0 * PI).powi(d as i32);
        let weights = sobolev_weights(&self.modes, alpha);
        let sq: f64 = grid
            .weights()
            .iter()
            .zip(&self.data)
            .map(|(w, row)| w * row.iter().zip(&weights).map(|(c, m)| m * c.norm_sqr()).sum::<f64>())
            .sum();
        (vol * sq).sqrt()
    }

    fn dot(&self, other: &Self, weights: &[f64], time: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, w) in time.iter().enumerate() {
            for (n, m) in weights.iter().enumerate() {
                s += w * m * (self.data[i][n].conj() * other.data[i][n]).re;
            }
        }
        s
    }
}

fn sobolev_weights(modes: &[Vec<i64>], alpha: f64) -> Vec<f64> {
    if alpha == 0.0 {
        return vec![1.0; modes.len()];
    }
    modes
        .iter()
        .map(|k| 1.0 + k.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt().powf(alpha))
        .collect()
}

/// All `k` with `|k_i| <= kmax`, lexicographic.
pub fn lattice_cube(d: usize, kmax: i64) -> Vec<Vec<i64>> {
    let r: Vec<i64> = (-kmax..=kmax).collect();
    match d {
        1 => r.iter().map(|&k| vec![k]).collect(),
        2 => r.iter().flat_map(|&a| r.iter().map(move |&b| vec![a, b])).collect(),
        _ => panic!("lattice dimension must be 1 or 2"),
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    i: u32,
    j: u32,
    k: u32,
    l: u32,
    a: Complex64,
}

/// Precomputed discrete `K_G` between two mode sets on a time grid.
#[derive(Debug, Clone)]
pub struct KgPlan {
    pub grid: TimeGrid,
    pub input_modes: Vec<Vec<i64>>,
    pub output_modes: Vec<Vec<i64>>,
    entries: Vec<Entry>,
}

impl KgPlan {
    pub fn new(symbol: &dyn AveragingSymbol, input_modes: &[Vec<i64>], grid: &TimeGrid) -> Result<Self> {
        let d = symbol.dim();
        if input_modes.iter().any(|k| k.len() != d) {
            return Err(Error::InvalidArgument(format!("input modes must have dimension {d}")));
        }
        if grid.horizon > symbol.horizon() * (1.0 + 1e-12) {
            return Err(Error::SymbolDomain(format!(
                "time grid reaches {} beyond the symbol horizon {}",
                grid.horizon,
                symbol.horizon()
            )));
        }
        let support = symbol.x_support();
        let mut output_modes: Vec<Vec<i64>> = Vec::new();
        for k in input_modes {
            for m in &support {
                let l: Vec<i64> = k.iter().zip(m).map(|(a, b)| a + b).collect();
                if !output_modes.contains(&l) {
                    output_modes.push(l);
                }
            }
        }
        output_modes.sort();
        let l_index = |l: &[i64]| output_modes.binary_search_by(|m| m.as_slice().cmp(l)).expect("output mode");
        let entries: Vec<Vec<Entry>> = (0..grid.len())
            .into_par_iter()
            .map(|i| -> Result<Vec<Entry>> {
                let t = grid.nodes[i];
                let w = grid.partial_weights(i);
                let mut out = Vec::new();
                if i == 0 {
                    return Ok(out);
                }
                for (j, &wj) in w.iter().enumerate() {
                    let s = grid.nodes[j];
                    for (kn, k) in input_modes.iter().enumerate() {
                        if k.iter().all(|&x| x == 0) {
                            continue;
                        }
                        let xi: Vec<f64> = k.iter().map(|&x| x as f64 * (t - s)).collect();
                        for m in &support {
                            let g = symbol.transform(t, s, m, &xi)?;
                            let ikg: Complex64 =
                                k.iter().zip(&g).map(|(&kk, gg)| Complex64::new(0.0, kk as f64) * gg).sum();
                            if ikg == Complex64::new(0.0, 0.0) {
                                continue;
                            }
                            let l: Vec<i64> = k.iter().zip(m).map(|(a, b)| a + b).collect();
                            out.push(Entry { i: i as u32, j: j as u32, k: kn as u32, l: l_index(&l) as u32, a: wj * ikg });
                        }
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: grid.clone(),
            input_modes: input_modes.to_vec(),
            output_modes,
            entries: entries.into_iter().flatten().collect(),
        })
    }

    pub fn apply(&self, f: &ModeSeries) -> Result<ModeSeries> {
        if f.modes != self.input_modes || f.data.len() != self.grid.len() {
            return Err(Error::InvalidArgument("input series does not match the plan".into()));
        }
        let mut out = ModeSeries::zeros(self.output_modes.clone(), self.grid.len());
        for e in &self.entries {
            out.data[e.i as usize][e.l as usize] += e.a * f.data[e.j as usize][e.k as usize];
        }
        Ok(out)
    }

    /// Plain (unweighted) adjoint of the coefficient map.
    fn adjoint(&self, y: &ModeSeries) -> ModeSeries {
        let mut out = ModeSeries::zeros(self.input_modes.clone(), self.grid.len());
        for e in &self.entries {
            out.data[e.j as usize][e.k as usize] += e.a.conj() * y.data[e.i as usize][e.l as usize];
        }
        out
    }

    /// `M = W_in^{-1} K^* W_out K`, self-adjoint and nonnegative for the
    /// `L^2 H^alpha` inner product, so its top eigenvalue is the squared
    /// operator norm.
    fn normal(&self, f: &ModeSeries, alpha: f64) -> Result<ModeSeries> {
        let mut y = self.apply(f)?;
        let wt = self.grid.weights();
        for (i, row) in y.data.iter_mut().enumerate() {
            for c in row.iter_mut() {
                *c *= wt[i];
            }
        }
        let mut g = self.adjoint(&y);
        let win = sobolev_weights(&self.input_modes, alpha);
        for (i, row) in g.data.iter_mut().enumerate() {
            for (n, c) in row.iter_mut().enumerate() {
                // end nodes carry half weight in both norms
                *c /= if wt[i] > 0.0 { wt[i] * win[n] } else { 1.0 };
            }
        }
        Ok(g)
    }

    /// `||K_G F||_{L^2 L^2} / ||F||_{L^2 H^alpha}`.
    pub fn ratio(&self, f: &ModeSeries, alpha: f64) -> Result<f64> {
        let den = f.norm(&self.grid, alpha);
        if den == 0.0 {
            return Ok(0.0);
        }
        Ok(self.apply(f)?.norm(&self.grid, 0.0) / den)
    }
}

/// `K_G F` on the modes of `f`, with the time grid taken from the caller.
pub fn apply_kg(symbol: &dyn AveragingSymbol, f: &ModeSeries, grid: &TimeGrid) -> Result<ModeSeries> {
    KgPlan::new(symbol, &f.modes, grid)?.apply(f)
}

/// `||G||_{T, s1, s2}` sampled on `grid` and a geometric `xi` grid.
///
/// The supremum over `s` runs over grid nodes with `s <= t` (the evaluator's
/// domain) and over `xi` on `0` and both rays of every coordinate axis up to
/// `xi_max`. Finite sampling makes this a lower bound of the true norm.
pub fn symbol_norm(
    symbol: &dyn AveragingSymbol,
    s1: f64,
    s2: f64,
    grid: &TimeGrid,
    xi_max: f64,
    per_decade: usize,
) -> Result<f64> {
    let d = symbol.dim();
    if !(s1 > 1.0) {
        return Err(Error::InvalidArgument(format!("s1 = {s1} must exceed 1")));
    }
    if !(s2 > d as f64 / 2.0) {
        return Err(Error::InvalidArgument(format!("s2 = {s2} must exceed d/2 = {}", d as f64 / 2.0)));
    }
    let radii = xi_radii(xi_max, per_decade);
    let mut xis: Vec<Vec<f64>> = vec![vec![0.0; d]];
    for axis in 0..d {
        for sign in [1.0, -1.0] {
            for &r in &radii {
                let mut xi = vec![0.0; d];
                xi[axis] = sign * r;
                xis.push(xi);
            }
        }
    }
    let support = symbol.x_support();
    let mut best: f64 = 0.0;
    for (i, &t) in grid.nodes.iter().enumerate() {
        let mut sum = 0.0;
        for k in &support {
            let kn = k.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
            let mut sup: f64 = 0.0;
            for &s in &grid.nodes[..=i] {
                for xi in &xis {
                    let g = symbol.transform(t, s, k, xi)?;
                    let mag = g.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
                    let xn = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
                    sup = sup.max((1.0 + kn).powf(s2) * (1.0 + xn).powf(s1) * mag);
                }
            }
            sum += sup * sup;
        }
        best = best.max(sum.sqrt());
    }
    Ok(best)
}

fn xi_radii(xi_max: f64, per_decade: usize) -> Vec<f64> {
    let lo: f64 = 1e-3;
    let hi = xi_max.max(lo * 10.0);
    let n = ((hi / lo).log10() * per_decade.max(1) as f64).ceil() as usize;
    (0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect()
}

/// Options of the randomised operator-norm estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Input modes are `|k_i| <= kmax`.
    pub kmax: i64,
    /// Time nodes on `[0, T]`.
    pub nt: usize,
    /// Power-iteration steps applied to every random probe (0 = pure probing).
    pub refine_steps: usize,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { kmax: 63, nt: 32, refine_steps: 30, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    /// Largest trial ratio.
    pub estimate: f64,
    /// `||K_G F|| / ||F||` for every trial, in trial order.
    pub ratios: Vec<f64>,
}

/// Random input with an `H^alpha`-normalised spectrum and smooth envelopes.
pub fn random_input(modes: &[Vec<i64>], grid: &TimeGrid, alpha: f64, rng: &mut ChaCha8Rng) -> ModeSeries {
    const HARMONICS: usize = 4;
    let mut f = ModeSeries::zeros(modes.to_vec(), grid.len());
    let mut normal = || -> f64 { StandardNormal.sample(&mut *rng) };
    let weights = sobolev_weights(modes, alpha);
    for (n, w) in weights.iter().enumerate() {
        let amp = w.sqrt().recip();
        let coef: Vec<(Complex64, Complex64)> = (0..HARMONICS)
            .map(|_| (Complex64::new(normal(), normal()), Complex64::new(normal(), normal())))
            .collect();
        for (i, &t) in grid.nodes.iter().enumerate() {
            let theta = PI * t / grid.horizon;
            let env: Complex64 = coef
                .iter()
                .enumerate()
                .map(|(h, (a, b))| a * (h as f64 * theta).cos() + b * ((h + 1) as f64 * theta).sin())
                .sum();
            f.data[i][n] = amp * env;
        }
    }
    f
}

/// Largest `||K_G F||_{L^2([0,T], L^2)} / ||F||_{L^2([0,T], H^alpha)}` over
/// `trials` random inputs, each optionally pushed towards the top singular
/// vector by power iteration. Always a lower bound of the operator norm.
pub fn estimate_operator_norm(
    symbol: &dyn AveragingSymbol,
    horizon: f64,
    alpha: f64,
    trials: usize,
    options: ProbeOptions,
) -> Result<NormEstimate> {
    if trials < 16 {
        return Err(Error::InvalidArgument(format!("need at least 16 trials, got {trials}")));
    }
    let grid = TimeGrid::uniform(horizon, options.nt)?;
    let plan = KgPlan::new(symbol, &lattice_cube(symbol.dim(), options.kmax), &grid)?;
    estimate_with_plan(&plan, alpha, trials, options)
}

/// As [`estimate_operator_norm`] on a prebuilt plan.
pub fn estimate_with_plan(plan: &KgPlan, alpha: f64, trials: usize, options: ProbeOptions) -> Result<NormEstimate> {
    let wt = plan.grid.weights();
    let win = sobolev_weights(&plan.input_modes, alpha);
    let ratios = (0..trials)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(r as u64);
            let mut f = random_input(&plan.input_modes, &plan.grid, alpha, &mut rng);
            let mut best = plan.ratio(&f, alpha)?;
            for _ in 0..options.refine_steps {
                let g = plan.normal(&f, alpha)?;
                let n = g.dot(&g, &win, &wt).sqrt();
                if n == 0.0 || !n.is_finite() {
                    break;
                }
                f = g;
                for row in f.data.iter_mut() {
                    for c in row.iter_mut() {
                        *c /= n;
                    }
                }
                best = best.max(plan.ratio(&f, alpha)?);
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;
    let estimate = ratios.iter().copied().fold(0.0, f64::max);
    Ok(NormEstimate { estimate, ratios })
}

/// Least-squares slope and intercept of `log y` against `log x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// One row of a `T` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub horizon: f64,
    pub alpha: f64,
    pub estimate: f64,
    pub symbol_norm: f64,
    /// `estimate / (T^{alpha/2} ||G||)`.
    pub fitted_c: f64,
}

/// Default Sobolev indices of the symbol norm in dimension `d`.
pub fn default_indices(d: usize) -> (f64, f64) {
    (1.5, d as f64 / 2.0 + 0.5)
}

/// Operator-norm estimates of the reference symbol over a list of horizons.
pub fn kg_sweep(
    d: usize,
    alpha: f64,
    horizons: &[f64],
    trials: usize,
    options: ProbeOptions,
) -> Result<Vec<SweepRow>> {
    let (s1, s2) = default_indices(d);
    horizons
        .iter()
        .map(|&t| {
            let g = GaussianSymbol::reference(d, t);
            let estimate = estimate_operator_norm(&g, t, alpha, trials, options)?.estimate;
            let grid = TimeGrid::uniform(t, options.nt)?;
            let norm = symbol_norm(&g, s1, s2, &grid, 2.0 * options.kmax as f64 * t, 60)?;
            Ok(SweepRow { horizon: t, alpha, estimate, symbol_norm: norm, fitted_c: estimate / (t.powf(alpha / 2.0) * norm) })
        })
        .collect()
}
