//! The Penrose function
//!
//! `P(gamma, tau, eta, f) = 1 - int_0^inf e^{-(gamma + i tau) s} i eta / (1 + |eta|^2) . (F_v grad_v f)(eta s) ds`
//!
//! for an x-independent velocity profile, and a grid search for its infimum.
//!
//! The gradient is taken with the 6th-order stencil and transformed by a
//! direct sum over the velocity nodes, `sum_j e^{-i v_j . xi} grad f_j dv^d`.
//! That sum is almost periodic in `xi` with period `2 pi / dv`, so it is cut
//! off at the grid's Nyquist band `|xi|_inf <= pi / dv`, and the time
//! integral stops at the smaller of that cut and `s_max = ln(1e12) / gamma`.
//! Each node contributes a pure exponential in `s`, integrated exactly.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::FirstDerivative;
use crate::grid::GridGeometry;
use crate::kernel::KernelSpec;
use crate::phase_space::map_v_lines;

/// An x-independent profile on the velocity grid of `geometry` (its x data is unused).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
    gradient: Vec<Vec<f64>>,
}

impl VelocityProfile {
    pub fn new(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.v_len() {
            return Err(Error::InvalidArgument(format!(
                "profile has {} values, velocity grid has {}",
                values.len(),
                geometry.v_len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("profile has non-finite values".into()));
        }
        let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let edge = edge_max(&geometry, &values);
        if max > 0.0 && edge >= 1e-8 * max {
            return Err(Error::InvalidArgument(format!(
                "profile does not decay at the velocity box edge ({edge:e} vs max {max:e})"
            )));
        }
        let gradient = gradient(&geometry, &values)?;
        Ok(Self { geometry, values, gradient })
    }

    /// Profile sampled from `shape(v)`.
    pub fn from_fn(geometry: GridGeometry, shape: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..geometry.v_len()).map(|j| shape(geometry.velocity(j))).collect();
        Self::new(geometry, values)
    }

    /// Unit-mass Maxwellian of thermal speed `thermal`.
    pub fn maxwellian(geometry: GridGeometry, thermal: f64) -> Result<Self> {
        let d = geometry.d as i32;
        let norm = (2.0 * std::f64::consts::PI * thermal * thermal).powf(-0.5 * d as f64);
        Self::from_fn(geometry, |v| {
            let r2: f64 = v[..geometry.d].iter().map(|x| x * x).sum();
            norm * (-r2 / (2.0 * thermal * thermal)).exp()
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            geometry: self.geometry,
            values: self.values.iter().map(|v| c * v).collect(),
            gradient: self.gradient.iter().map(|g| g.iter().map(|v| c * v).collect()).collect(),
        }
    }

    /// `(F_v grad_v f)(xi)` by direct summation, one entry per axis.
    pub fn gradient_transform(&self, xi: &[f64]) -> Vec<Complex64> {
        let g = &self.geometry;
        let cell = g.v_cell();
        let mut out = vec![Complex64::new(0.0, 0.0); g.d];
        for j in 0..g.v_len() {
            let v = g.velocity(j);
            let phase: f64 = (0..g.d).map(|a| v[a] * xi[a]).sum();
            let e = Complex64::from_polar(cell, -phase);
            for (a, o) in out.iter_mut().enumerate() {
                *o += e * self.gradient[a][j];
            }
        }
        out
    }
}

fn edge_max(g: &GridGeometry, values: &[f64]) -> f64 {
    let nv = g.nv;
    (0..g.v_len())
        .filter(|&j| {
            let m = g.v_multi(j);
            m[..g.d].iter().any(|&i| i == 0 || i == nv - 1)
        })
        .fold(0.0f64, |m, j| m.max(values[j].abs()))
}

fn gradient(g: &GridGeometry, values: &[f64]) -> Result<Vec<Vec<f64>>> {
    let fd = FirstDerivative::new(g.nv, g.dv())
        .ok_or_else(|| Error::Grid(format!("nv = {} too small for the derivative stencil", g.nv)))?;
    // a single velocity block is one x node as far as the line walker is concerned
    Ok((0..g.d)
        .map(|axis| {
            let mut block = values.to_vec();
            map_v_lines(g, &mut block, axis, |_, input, output| fd.apply(input, output));
            block
        })
        .collect())
}

/// Kernel in front of the transform: the verbatim `eta / (1 + |eta|^2)`, or
/// `eta U(eta)` for an interaction multiplier (exploratory).
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PenroseKernel {
    #[default]
    Regularised,
    Multiplier(KernelSpec),
}

impl PenroseKernel {
    fn symbol(&self, eta: &[f64]) -> f64 {
        let e2: f64 = eta.iter().map(|x| x * x).sum();
        match self {
            PenroseKernel::Regularised => 1.0 / (1.0 + e2),
            PenroseKernel::Multiplier(k) => k.multiplier_sq(e2),
        }
    }
}

/// Time cut-off where `e^{-gamma s}` drops below `1e-12`.
pub fn s_max(gamma: f64) -> f64 {
    1e12f64.ln() / gamma
}

pub fn penrose_value(profile: &VelocityProfile, gamma: f64, tau: f64, eta: &[f64]) -> Result<Complex64> {
    penrose_value_with(profile, gamma, tau, eta, &PenroseKernel::Regularised)
}

pub fn penrose_value_with(
    profile: &VelocityProfile,
    gamma: f64,
    tau: f64,
    eta: &[f64],
    kernel: &PenroseKernel,
) -> Result<Complex64> {
    let g = &profile.geometry;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must be positive")));
    }
    if eta.len() != g.d {
        return Err(Error::InvalidArgument(format!("eta must have {} components", g.d)));
    }
    let eta_inf = eta.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if eta_inf == 0.0 {
        return Err(Error::InvalidArgument("eta must be nonzero".into()));
    }
    let horizon = s_max(gamma).min(std::f64::consts::PI / (g.dv() * eta_inf));
    let z0 = Complex64::new(gamma, tau);
    let cell = g.v_cell();
    let mut integral = Complex64::new(0.0, 0.0);
    for j in 0..g.v_len() {
        let v = g.velocity(j);
        let ev: f64 = (0..g.d).map(|a| eta[a] * v[a]).sum();
        let dot: f64 = (0..g.d).map(|a| eta[a] * profile.gradient[a][j]).sum();
        if dot == 0.0 {
            continue;
        }
        // int_0^S e^{-z s} ds with z = gamma + i (tau + eta . v_j)
        let z = z0 + Complex64::new(0.0, ev);
        let zs = z * horizon;
        let weight = if zs.norm() < 1e-8 { horizon * (1.0 - 0.5 * zs) } else { (1.0 - (-zs).exp()) / z };
        integral += weight * (cell * dot);
    }
    Ok(Complex64::new(1.0, 0.0) - Complex64::new(0.0, kernel.symbol(eta)) * integral)
}

/// Closed interval sampled at `n` points (geometric when `log`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    #[serde(default)]
    pub log: bool,
}

impl Axis {
    pub fn linear(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n, log: false }
    }

    pub fn geometric(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n, log: true }
    }

    fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|i| {
                let u = i as f64 / (self.n - 1) as f64;
                if self.log {
                    self.lo * (self.hi / self.lo).powf(u)
                } else {
                    self.lo + u * (self.hi - self.lo)
                }
            })
            .collect()
    }
}

/// Search box over `(gamma, tau, eta)`; every component of `eta` uses the
/// same axis and `eta = 0` is skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub gamma: Axis,
    pub tau: Axis,
    pub eta: Axis,
}

impl SearchBox {
    /// `gamma in [1e-2, 1]`, `tau in [-3, 3]`, `eta in [-4, 4]`.
    pub fn standard() -> Self {
        Self { gamma: Axis::geometric(1e-2, 1.0, 12), tau: Axis::linear(-3.0, 3.0, 25), eta: Axis::linear(-4.0, 4.0, 32) }
    }

    fn validate(&self) -> Result<()> {
        for (name, a) in [("gamma", self.gamma), ("tau", self.tau), ("eta", self.eta)] {
            if a.n == 0 || !(a.lo <= a.hi) || !a.lo.is_finite() || !a.hi.is_finite() {
                return Err(Error::InvalidArgument(format!("empty {name} range")));
            }
        }
        if !(self.gamma.lo > 0.0) {
            return Err(Error::InvalidArgument("gamma range must be bounded away from 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenroseSample {
    pub gamma: f64,
    pub tau: f64,
    pub eta: Vec<f64>,
    pub abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Infimum {
    /// Smallest `|P|` found; an upper bound of the true infimum.
    pub inf_abs: f64,
    pub argmin: PenroseSample,
    /// Every coarse-grid sample, in search order.
    pub samples: Vec<PenroseSample>,
}

/// Grid search of `|P|` followed by three zoom passes around the minimiser.
pub fn stability_infimum(profile: &VelocityProfile, search: &SearchBox) -> Result<Infimum> {
    search.validate()?;
    let d = profile.geometry.d;
    let etas: Vec<Vec<f64>> = {
        let p = search.eta.points();
        let all: Vec<Vec<f64>> = match d {
            1 => p.iter().map(|&e| vec![e]).collect(),
            _ => p.iter().flat_map(|&a| p.iter().map(move |&b| vec![a, b])).collect(),
        };
        all.into_iter().filter(|e| e.iter().any(|&x| x != 0.0)).collect()
    };
    if etas.is_empty() {
        return Err(Error::InvalidArgument("eta range contains only 0".into()));
    }
    let mut points = Vec::new();
    for &g in &search.gamma.points() {
        for &t in &search.tau.points() {
            for e in &etas {
                points.push((g, t, e.clone()));
            }
        }
    }
    let samples = evaluate(profile, &points)?;
    let mut best = samples
        .iter()
        .min_by(|a, b| a.abs.total_cmp(&b.abs))
        .cloned()
        .expect("nonempty grid");

    let step = |a: &Axis| if a.n > 1 { (a.hi - a.lo) / (a.n - 1) as f64 } else { 0.0 };
    let (mut hg, mut ht, mut he) = (
        if search.gamma.log && search.gamma.n > 1 { (search.gamma.hi / search.gamma.lo).ln() / (search.gamma.n - 1) as f64 } else { step(&search.gamma) },
        step(&search.tau),
        step(&search.eta),
    );
    for _ in 0..3 {
        let mut local = Vec::new();
        for a in -2..=2 {
            let g = if search.gamma.log { best.gamma * (a as f64 * hg / 2.0).exp() } else { best.gamma + a as f64 * hg / 2.0 };
            let g = g.clamp(search.gamma.lo, search.gamma.hi);
            for b in -2..=2 {
                let t = (best.tau + b as f64 * ht / 2.0).clamp(search.tau.lo, search.tau.hi);
                for c in 0..5usize.pow(d as u32) {
                    let mut e = best.eta.clone();
                    for (axis, x) in e.iter_mut().enumerate() {
                        let offset = (c / 5usize.pow(axis as u32)) % 5;
                        *x = (*x + (offset as f64 - 2.0) * he / 2.0).clamp(search.eta.lo, search.eta.hi);
                    }
                    if e.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    local.push((g, t, e));
                }
            }
        }
        for s in evaluate(profile, &local)? {
            if s.abs < best.abs {
                best = s;
            }
        }
        hg /= 2.0;
        ht /= 2.0;
        he /= 2.0;
    }
    Ok(Infimum { inf_abs: best.abs, argmin: best, samples })
}

fn evaluate(profile: &VelocityProfile, points: &[(f64, f64, Vec<f64>)]) -> Result<Vec<PenroseSample>> {
    points
        .par_iter()
        .map(|(g, t, e)| {
            let p = penrose_value(profile, *g, *t, e)?;
            Ok(PenroseSample { gamma: *g, tau: *t, eta: e.clone(), abs: p.norm() })
        })
        .collect()
}

/// CSV rows `gamma, tau, eta_1[, eta_2], abs_P` of the coarse search grid.
pub fn samples_table(inf: &Infimum) -> (Vec<String>, Vec<Vec<f64>>) {
    let d = inf.argmin.eta.len();
    let mut cols = vec!["gamma".to_string(), "tau".to_string()];
    cols.extend((1..=d).map(|i| format!("eta_{i}")));
    cols.push("abs_P".into());
    let rows = inf
        .samples
        .iter()
        .map(|s| {
            let mut r = vec![s.gamma, s.tau];
            r.extend(&s.eta);
            r.push(s.abs);
            r
        })
        .collect();
    (cols, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Interaction;

    fn geom(d: usize, nv: usize) -> GridGeometry {
        GridGeometry::new(d, 8, nv, 8.0).unwrap()
    }

    #[test]
    fn zero_profile_gives_one() {
        let p = VelocityProfile::new(geom(1, 64), vec![0.0; 64]).unwrap();
        for (g, t, e) in [(0.1, 0.0, 1.0), (2.0, -3.0, -0.2), (1e-3, 5.0, 7.0)] {
            assert_eq!(penrose_value(&p, g, t, &[e]).unwrap(), Complex64::new(1.0, 0.0));
        }
        let inf = stability_infimum(&p, &SearchBox::standard()).unwrap();
        assert_eq!(inf.inf_abs, 1.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = VelocityProfile::maxwellian(geom(1, 64), 1.0).unwrap();
        assert!(penrose_value(&p, 0.0, 0.0, &[1.0]).is_err());
        assert!(penrose_value(&p, 0.1, 0.0, &[0.0]).is_err());
        let mut b = SearchBox::standard();
        b.gamma.lo = 0.0;
        assert!(stability_infimum(&p, &b).is_err());
        b = SearchBox::standard();
        b.tau.n = 0;
        assert!(stability_infimum(&p, &b).is_err());
        let wide = GridGeometry::new(1, 8, 64, 2.0).unwrap();
        assert!(VelocityProfile::maxwellian(wide, 1.0).is_err());
    }

    #[test]
    fn large_gamma_gives_one() {
        let p = VelocityProfile::maxwellian(geom(1, 128), 1.0).unwrap();
        for e in [-4.0, -0.5, 0.3, 1.0, 4.0] {
            for t in [-3.0, 0.0, 2.0] {
                assert!((penrose_value(&p, 1e3, t, &[e]).unwrap() - 1.0).norm() <= 1e-3);
            }
        }
    }

    #[test]
    fn linear_in_profile() {
        let p = VelocityProfile::from_fn(geom(1, 96), |v| (-(v[0] - 0.7).powi(2)).exp() * (1.0 + 0.3 * v[0])).unwrap();
        let q = p.scaled(-2.5);
        for (g, t, e) in [(0.05, 0.4, 1.3), (0.7, -2.0, -3.0)] {
            let a = penrose_value(&p, g, t, &[e]).unwrap() - 1.0;
            let b = penrose_value(&q, g, t, &[e]).unwrap() - 1.0;
            assert!((b - a * -2.5).norm() < 1e-12 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let p = VelocityProfile::from_fn(geom(1, 128), |v| (-(v[0] - 0.5).powi(2) / 0.8).exp()).unwrap();
        for (g, t, e) in [(0.1, 0.7, 1.0), (0.02, -2.0, 2.5), (0.5, 1.5, -0.25)] {
            let a = penrose_value(&p, g, t, &[e]).unwrap();
            let b = penrose_value(&p, g, -t, &[-e]).unwrap();
            assert!((a - b.conj()).norm() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn two_dimensional_isotropic_matches_one_dimensional() {
        // the gradient along eta of a 2-d Maxwellian integrates to the 1-d one
        let p1 = VelocityProfile::maxwellian(geom(1, 96), 1.0).unwrap();
        let p2 = VelocityProfile::maxwellian(geom(2, 96), 1.0).unwrap();
        let a = penrose_value(&p1, 0.2, 0.5, &[1.5]).unwrap();
        let b = penrose_value(&p2, 0.2, 0.5, &[1.5, 0.0]).unwrap();
        let c = penrose_value(&p2, 0.2, 0.5, &[0.0, 1.5]).unwrap();
        assert!((a - b).norm() < 1e-10, "{a} {b}");
        assert!((b - c).norm() < 1e-12);
    }

    #[test]
    fn multiplier_hook_uses_kernel() {
        let p = VelocityProfile::maxwellian(geom(1, 96), 1.0).unwrap();
        let k = KernelSpec::riesz(2.0, Interaction::Repulsive).unwrap();
        let a = penrose_value(&p, 0.3, 0.0, &[2.0]).unwrap() - 1.0;
        let b = penrose_value_with(&p, 0.3, 0.0, &[2.0], &PenroseKernel::Multiplier(k)).unwrap() - 1.0;
        // 1/(1+4) versus 1/4
        assert!((b - a * (5.0 / 4.0)).norm() < 1e-12 * a.norm());
    }
}
