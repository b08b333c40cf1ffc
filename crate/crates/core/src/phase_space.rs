//! The distribution function, its moments, and the weighted Sobolev
//! diagnostics `||f||_{H^k_r}` and `||rho||_{H^s_x}`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::FirstDerivative;
use crate::grid::GridGeometry;
use crate::spectral::XTransform;

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
    /// Phase-space average `int int f0 dv dx / (2pi)^d`, fixed at creation.
    pub rho0: f64,
}

impl Distribution {
    /// Wraps grid values and fixes `rho0` from them.
    pub fn new(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                geometry.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at index {i}")));
        }
        let mut f = Self { geometry, values, rho0: 0.0 };
        f.rho0 = f.mass() / geometry.x_volume();
        Ok(f)
    }

    /// Same grid and `rho0`, new values (used by the time stepper).
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        Self { geometry: self.geometry, values, rho0: self.rho0 }
    }

    pub fn zeros(geometry: GridGeometry) -> Self {
        Self { geometry, values: vec![0.0; geometry.len()], rho0: 0.0 }
    }

    /// Equal-weight quadrature in v: `rho(x_i) = sum_j f(x_i, v_j) dv^d`.
    pub fn density(&self) -> Vec<f64> {
        let dv = self.geometry.v_cell();
        self.values
            .par_chunks(self.geometry.v_len())
            .map(|block| block.iter().sum::<f64>() * dv)
            .collect()
    }

    pub fn mass(&self) -> f64 {
        let cell = self.geometry.x_cell() * self.geometry.v_cell();
        self.values.iter().sum::<f64>() * cell
    }

    pub fn momentum(&self) -> [f64; 2] {
        let g = &self.geometry;
        let cell = g.x_cell() * g.v_cell();
        let vlen = g.v_len();
        let mut p = [0.0; 2];
        for block in self.values.chunks(vlen) {
            for (j, &f) in block.iter().enumerate() {
                let v = g.velocity(j);
                p[0] += v[0] * f;
                p[1] += v[1] * f;
            }
        }
        [p[0] * cell, p[1] * cell]
    }

    /// `int int |v| |f| dv dx`, the scale used for relative momentum drift.
    pub fn abs_momentum_scale(&self) -> f64 {
        let g = &self.geometry;
        let cell = g.x_cell() * g.v_cell();
        let vlen = g.v_len();
        let mut s = 0.0;
        for block in self.values.chunks(vlen) {
            for (j, &f) in block.iter().enumerate() {
                s += g.speed_sq(j).sqrt() * f.abs();
            }
        }
        s * cell
    }

    pub fn l2_norm(&self) -> f64 {
        let cell = self.geometry.x_cell() * self.geometry.v_cell();
        (self.values.iter().map(|v| v * v).sum::<f64>() * cell).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `1/2 int int |v|^2 f dv dx`.
    pub fn kinetic_energy(&self) -> f64 {
        let g = &self.geometry;
        let cell = g.x_cell() * g.v_cell();
        let vlen = g.v_len();
        let mut e = 0.0;
        for block in self.values.chunks(vlen) {
            for (j, &f) in block.iter().enumerate() {
                e += g.speed_sq(j) * f;
            }
        }
        0.5 * e * cell
    }

    /// Fraction of `int int |f|` carried by nodes with some `|v_i| > 0.9 v_max`.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let g = &self.geometry;
        let edge = 0.9 * g.v_max;
        let vlen = g.v_len();
        let mut near = 0.0;
        let mut total = 0.0;
        for block in self.values.chunks(vlen) {
            for (j, &f) in block.iter().enumerate() {
                let v = g.velocity(j);
                total += f.abs();
                if v[0].abs() > edge || v[1].abs() > edge {
                    near += f.abs();
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            near / total
        }
    }
}

/// Applies a spectral operation to every x line at fixed velocity.
/// `op(jv, coeffs)` receives the Fourier coefficients of the line through
/// velocity node `jv`; the synthesised real part is written back.
pub(crate) fn map_x_lines<F>(geometry: &GridGeometry, transform: &XTransform, values: &[f64], op: F) -> Vec<f64>
where
    F: Fn(usize, &mut [Complex64]) + Sync,
{
    let vlen = geometry.v_len();
    let xlen = geometry.x_len();
    let columns: Vec<Vec<f64>> = (0..vlen)
        .into_par_iter()
        .map(|jv| {
            let mut buf: Vec<Complex64> = (0..xlen).map(|ix| Complex64::new(values[ix * vlen + jv], 0.0)).collect();
            transform.forward_in_place(&mut buf);
            op(jv, &mut buf);
            transform.inverse_in_place(&mut buf);
            buf.into_iter().map(|c| c.re).collect()
        })
        .collect();
    let mut out = vec![0.0; values.len()];
    for (jv, col) in columns.iter().enumerate() {
        for (ix, &v) in col.iter().enumerate() {
            out[ix * vlen + jv] = v;
        }
    }
    out
}

/// Applies a line operation along velocity axis `axis` for every x node.
/// `op(ix, input, output)` maps one line of `nv` values.
pub(crate) fn map_v_lines<F>(geometry: &GridGeometry, values: &mut [f64], axis: usize, op: F)
where
    F: Fn(usize, &[f64], &mut [f64]) + Sync,
{
    let nv = geometry.nv;
    let vlen = geometry.v_len();
    values.par_chunks_mut(vlen).enumerate().for_each(|(ix, block)| {
        let mut input = vec![0.0; nv];
        let mut output = vec![0.0; nv];
        match (geometry.d, axis) {
            (1, _) => {
                input.copy_from_slice(block);
                op(ix, &input, &mut output);
                block.copy_from_slice(&output);
            }
            (_, 0) => {
                for j2 in 0..nv {
                    for j1 in 0..nv {
                        input[j1] = block[j1 * nv + j2];
                    }
                    op(ix, &input, &mut output);
                    for j1 in 0..nv {
                        block[j1 * nv + j2] = output[j1];
                    }
                }
            }
            _ => {
                for line in block.chunks_mut(nv) {
                    input.copy_from_slice(line);
                    op(ix, &input, &mut output);
                    line.copy_from_slice(&output);
                }
            }
        }
    });
}

/// Largest derivative order accepted by [`weighted_sobolev_norm`] on `geometry`.
/// Each velocity derivative is a 7-point stencil; requiring `nv >= 7 (k + 1)`
/// keeps repeated application from being dominated by boundary closures.
pub fn max_sobolev_order(geometry: &GridGeometry) -> u32 {
    (geometry.nv / 7).saturating_sub(1) as u32
}

/// `(sum_{|a|+|b|<=k} int int (1+|v|^2)^weight |d_x^a d_v^b f|^2 dv dx)^(1/2)`.
///
/// `weight` is the literal exponent on `(1+|v|^2)`: pass `2r` to reproduce
/// `H^m_{2r}`. x derivatives are spectral, v derivatives sixth-order
/// finite differences.
pub fn weighted_sobolev_norm(f: &Distribution, transform: &XTransform, k: u32, weight: f64) -> Result<f64> {
    let g = &f.geometry;
    if !(weight.is_finite() && weight >= 0.0) {
        return Err(Error::NormOrder(format!("weight exponent {weight} must be >= 0")));
    }
    let kmax = max_sobolev_order(g);
    if k > kmax {
        return Err(Error::NormOrder(format!(
            "order {k} needs a wider velocity grid (nv = {} supports up to {kmax})",
            g.nv
        )));
    }
    let vlen = g.v_len();
    let weights: Vec<f64> = (0..vlen).map(|j| (1.0 + g.speed_sq(j)).powf(weight)).collect();
    let cell = g.x_cell() * g.v_cell();
    let weighted_sq = |h: &[f64]| -> f64 {
        h.par_chunks(vlen)
            .map(|block| block.iter().zip(&weights).map(|(v, w)| w * v * v).sum::<f64>())
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>()
            * cell
    };
    let deriv = FirstDerivative::new(g.nv, g.dv()).ok_or_else(|| Error::NormOrder("velocity grid too short".into()))?;
    let dv_axis = |h: &mut Vec<f64>, axis: usize| {
        map_v_lines(g, h, axis, |_, input, output| deriv.apply(input, output));
    };

    let mut total = 0.0;
    for (ax, fx) in x_derivatives(f, transform, k) {
        let remaining = k - ax;
        match g.d {
            1 => {
                let mut h = fx;
                for b in 0..=remaining {
                    total += weighted_sq(&h);
                    if b < remaining {
                        dv_axis(&mut h, 0);
                    }
                }
            }
            _ => {
                let mut h1 = fx;
                for b1 in 0..=remaining {
                    let mut h2 = h1.clone();
                    for b2 in 0..=(remaining - b1) {
                        total += weighted_sq(&h2);
                        if b2 < remaining - b1 {
                            dv_axis(&mut h2, 1);
                        }
                    }
                    if b1 < remaining {
                        dv_axis(&mut h1, 0);
                    }
                }
            }
        }
    }
    Ok(total.sqrt())
}

/// All x derivatives `d_x^a f` with `|a| <= k`, tagged with `|a|`.
fn x_derivatives(f: &Distribution, transform: &XTransform, k: u32) -> Vec<(u32, Vec<f64>)> {
    let g = &f.geometry;
    let mut orders: Vec<[u32; 2]> = Vec::new();
    match g.d {
        1 => orders.extend((0..=k).map(|a| [a, 0])),
        _ => {
            for a1 in 0..=k {
                for a2 in 0..=(k - a1) {
                    orders.push([a1, a2]);
                }
            }
        }
    }
    orders
        .into_iter()
        .map(|a| {
            let total = a[0] + a[1];
            if total == 0 {
                return (0, f.values.clone());
            }
            let h = map_x_lines(g, transform, &f.values, |_, coeffs| {
                for (flat, c) in coeffs.iter_mut().enumerate() {
                    if transform.is_nyquist(flat) {
                        *c = Complex64::new(0.0, 0.0);
                        continue;
                    }
                    let kv = transform.k_of(flat);
                    *c *= ik_power(kv[0], a[0]) * ik_power(kv[1], a[1]);
                }
            });
            (total, h)
        })
        .collect()
}

fn ik_power(k: i64, a: u32) -> Complex64 {
    Complex64::new(0.0, k as f64).powu(a)
}

/// `||rho||_{H^s_x} = ((2pi)^d sum_k (1+|k|^2)^s |rho_k|^2)^(1/2)`; `s` may be fractional.
pub fn rho_sobolev_norm(rho_hat: &[Complex64], transform: &XTransform, s: f64) -> f64 {
    let vol = (2.0 * std::f64::consts::PI).powi(transform.d() as i32);
    let sum: f64 = rho_hat
        .iter()
        .enumerate()
        .map(|(flat, c)| {
            let k = transform.k_of(flat);
            let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
            (1.0 + k2).powf(s) * c.norm_sqr()
        })
        .sum();
    (vol * sum).sqrt()
}

/// Key of a weighted Sobolev norm: derivative order and literal weight exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormKey {
    pub k: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub t: f64,
    pub weighted_sobolev: Vec<(NormKey, f64)>,
    pub rho_sobolev: Vec<(f64, f64)>,
    /// `N_{m,2r}` up to `t`, if the run tracks one.
    pub key_quantity: Option<f64>,
}

impl NormReport {
    pub fn sobolev(&self, k: u32, weight: f64) -> Option<f64> {
        self.weighted_sobolev
            .iter()
            .find(|(key, _)| key.k == k && key.weight == weight)
            .map(|(_, v)| *v)
    }

    pub fn rho(&self, order: f64) -> Option<f64> {
        self.rho_sobolev.iter().find(|(m, _)| *m == order).map(|(_, v)| *v)
    }
}

/// Computes the requested norms of `f` at time `t`.
pub fn norm_report(
    f: &Distribution,
    transform: &XTransform,
    t: f64,
    sobolev: &[NormKey],
    rho_orders: &[f64],
) -> Result<NormReport> {
    let mut weighted_sobolev = Vec::with_capacity(sobolev.len());
    for key in sobolev {
        weighted_sobolev.push((*key, weighted_sobolev_norm(f, transform, key.k, key.weight)?));
    }
    let rho_hat = transform.forward_real(&f.density());
    let rho_sobolev = rho_orders.iter().map(|&m| (m, rho_sobolev_norm(&rho_hat, transform, m))).collect();
    Ok(NormReport { t, weighted_sobolev, rho_sobolev, key_quantity: None })
}

/// `N_{m,w}(t) = sup_s ||f(s)||_{H^{m-1}_w} + (int_0^t ||rho(s)||^2_{H^m} ds)^(1/2)`
/// over the samples in `history` (trapezoid rule in time).
pub fn key_quantity_n(history: &[NormReport], m: u32, weight: f64) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::InvalidArgument("empty norm history".into()));
    }
    if m == 0 {
        return Err(Error::NormOrder("m must be >= 1".into()));
    }
    let mut sup_f: f64 = 0.0;
    let mut rho_sq = Vec::with_capacity(history.len());
    for r in history {
        let fn_ = r.sobolev(m - 1, weight).ok_or_else(|| Error::MissingNorm {
            t: r.t,
            what: format!("H^{}_{}", m - 1, weight),
        })?;
        let rn = r.rho(m as f64).ok_or_else(|| Error::MissingNorm { t: r.t, what: format!("rho H^{m}") })?;
        sup_f = sup_f.max(fn_);
        rho_sq.push(rn * rn);
    }
    let mut integral = 0.0;
    for i in 1..history.len() {
        let dt = history[i].t - history[i - 1].t;
        if dt < 0.0 {
            return Err(Error::InvalidArgument("history times must be nondecreasing".into()));
        }
        integral += 0.5 * dt * (rho_sq[i] + rho_sq[i - 1]);
    }
    Ok(sup_f + integral.sqrt())
}

/// Regularity thresholds `(m0, p0, r0)` for dimension `d`.
pub fn regularity_thresholds(d: usize) -> (f64, u32, f64) {
    let half = d as f64 / 2.0;
    let p0 = (d / 2) as u32 + 1;
    let m0 = 3.0 + half + p0 as f64;
    let r0 = (d as f64).max(2.0 + half);
    (m0, p0, r0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn geom(nx: usize, nv: usize, vmax: f64) -> GridGeometry {
        GridGeometry::new(1, nx, nv, vmax).unwrap()
    }

    fn grid_maxwellian(g: &GridGeometry) -> Vec<f64> {
        let m: Vec<f64> = (0..g.nv).map(|j| (-0.5 * g.v(j).powi(2)).exp()).collect();
        let s: f64 = m.iter().sum::<f64>() * g.dv();
        m.into_iter().map(|v| v / s).collect()
    }

    fn separable(g: &GridGeometry, fx: impl Fn(f64) -> f64, fv: &[f64]) -> Distribution {
        let mut values = Vec::with_capacity(g.len());
        for i in 0..g.nx {
            for &m in fv {
                values.push(fx(g.x(i)) * m);
            }
        }
        Distribution::new(*g, values).unwrap()
    }

    #[test]
    fn density_of_zero_and_uniform() {
        let g = geom(16, 32, 6.0);
        assert!(Distribution::zeros(g).density().iter().all(|&r| r == 0.0));
        let m = grid_maxwellian(&g);
        let f = separable(&g, |_| 1.0, &m);
        for r in f.density() {
            assert!((r - 1.0).abs() < 1e-14);
        }
        assert!((f.rho0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn density_of_perturbed_maxwellian() {
        let g = geom(32, 64, 8.0);
        let m = grid_maxwellian(&g);
        let f = separable(&g, |x| 1.0 + 0.1 * x.cos(), &m);
        for (i, r) in f.density().iter().enumerate() {
            assert!((r - (1.0 + 0.1 * g.x(i).cos())).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_bookkeeping() {
        let g = geom(16, 24, 5.0);
        let m = grid_maxwellian(&g);
        let f = separable(&g, |x| 1.0 + 0.3 * (2.0 * x).sin(), &m);
        let from_density: f64 = f.density().iter().sum::<f64>() * g.x_cell();
        assert!((from_density - f.mass()).abs() < 1e-13 * f.mass());
    }

    #[test]
    fn zero_norms() {
        let g = geom(16, 64, 6.0);
        let t = XTransform::new(1, 16);
        let f = Distribution::zeros(g);
        for k in 0..3 {
            assert_eq!(weighted_sobolev_norm(&f, &t, k, 2.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn l2_of_single_mode() {
        // f = c cos(x) phi(v): ||f||^2 = c^2 * pi * sum phi^2 dv
        let g = geom(32, 128, 8.0);
        let t = XTransform::new(1, 32);
        let phi: Vec<f64> = (0..g.nv).map(|j| (-g.v(j).powi(2)).exp()).collect();
        let c = 0.7;
        let f = separable(&g, |x| c * x.cos(), &phi);
        let phi_l2_sq: f64 = phi.iter().map(|p| p * p).sum::<f64>() * g.dv();
        let expected = c * (PI * phi_l2_sq).sqrt();
        let got = weighted_sobolev_norm(&f, &t, 0, 0.0).unwrap();
        assert!((got - expected).abs() < 1e-13 * expected);
    }

    #[test]
    fn first_order_norm_matches_quadrature_oracle() {
        // ||f||^2_{H^1} = ||f||^2 + ||d_x f||^2 + ||d_v f||^2 for f = sin(x) phi(v)
        let g = geom(32, 256, 8.0);
        let t = XTransform::new(1, 32);
        let phi = |v: f64| (-0.5 * v * v).exp();
        let dphi = |v: f64| -v * (-0.5 * v * v).exp();
        let sampled: Vec<f64> = (0..g.nv).map(|j| phi(g.v(j))).collect();
        let f = separable(&g, f64::sin, &sampled);
        // dense independent quadrature of the three separable terms
        let n = 20_000;
        let h = 2.0 * g.v_max / n as f64;
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..n {
            let v = -g.v_max + (i as f64 + 0.5) * h;
            a += phi(v).powi(2) * h;
            b += dphi(v).powi(2) * h;
        }
        // int_0^{2pi} sin^2 = int cos^2 = pi
        let expected = (PI * a + PI * a + PI * b).sqrt();
        let got = weighted_sobolev_norm(&f, &t, 1, 0.0).unwrap();
        assert!((got - expected).abs() < 1e-8 * expected, "{got} vs {expected}");
    }

    #[test]
    fn rejects_large_order() {
        let g = geom(16, 16, 4.0);
        let t = XTransform::new(1, 16);
        let f = Distribution::zeros(g);
        assert!(matches!(weighted_sobolev_norm(&f, &t, 2, 0.0), Err(Error::NormOrder(_))));
        assert!(weighted_sobolev_norm(&f, &t, 1, 0.0).is_ok());
    }

    fn report(t: f64, f: f64, rho: f64) -> NormReport {
        NormReport {
            t,
            weighted_sobolev: vec![(NormKey { k: 4, weight: 6.0 }, f)],
            rho_sobolev: vec![(5.0, rho)],
            key_quantity: None,
        }
    }

    #[test]
    fn key_quantity_cases() {
        assert_eq!(key_quantity_n(&[report(0.0, 3.0, 2.0)], 5, 6.0).unwrap(), 3.0);
        let zeros: Vec<_> = (0..5).map(|i| report(i as f64 * 0.1, 0.0, 0.0)).collect();
        assert_eq!(key_quantity_n(&zeros, 5, 6.0).unwrap(), 0.0);
        let (a, b, tf) = (1.5, 0.8, 2.0);
        let constant: Vec<_> = (0..=20).map(|i| report(i as f64 * tf / 20.0, a, b)).collect();
        let n = key_quantity_n(&constant, 5, 6.0).unwrap();
        assert!((n - (a + b * tf.sqrt())).abs() < 1e-13);
        assert!(matches!(key_quantity_n(&constant, 4, 6.0), Err(Error::MissingNorm { .. })));
    }

    #[test]
    fn thresholds() {
        assert_eq!(regularity_thresholds(1), (4.5, 1, 2.5));
        assert_eq!(regularity_thresholds(2), (6.0, 2, 3.0));
        assert_eq!(regularity_thresholds(3), (6.5, 2, 3.5));
    }

    #[test]
    fn two_d_moments() {
        let g = GridGeometry::new(2, 8, 16, 6.0).unwrap();
        let m1 = grid_maxwellian(&GridGeometry::new(1, 8, 16, 6.0).unwrap());
        let mut values = Vec::with_capacity(g.len());
        for _ in 0..g.x_len() {
            for a in &m1 {
                for b in &m1 {
                    values.push(a * b);
                }
            }
        }
        let f = Distribution::new(g, values).unwrap();
        assert!((f.rho0 - 1.0).abs() < 1e-13);
        let p = f.momentum();
        assert!(p[0].abs() < 1e-13 && p[1].abs() < 1e-13);
        let t = XTransform::new(2, 8);
        let n0 = weighted_sobolev_norm(&f, &t, 0, 0.0).unwrap();
        let n1 = weighted_sobolev_norm(&f, &t, 1, 0.0).unwrap();
        assert!(n1 > n0);
    }
}
