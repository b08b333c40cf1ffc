//! Force field `E = -grad(U * V)` computed entirely in Fourier space.
//!
//! For the limit system `V = rho - rho0`; for the regularised system
//! `V_eps` solves `-eps^2 Lap V + V = rho`. The kernel multiplier vanishes
//! at `k = 0`, so both forms remove the mean automatically.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::kernel::KernelSpec;
use crate::spectral::{SpectralDensity, XTransform};

/// Velocity-space force field, one real array per spatial component.
pub type VectorField = Vec<Vec<f64>>;

/// Precomputed effective multipliers `U(k) / (1 + eps^2 |k|^2)` on the FFT grid.
#[derive(Debug, Clone)]
pub struct FieldSolver {
    transform: XTransform,
    symbol: Vec<f64>,
    eps: f64,
}

impl FieldSolver {
    /// `eps = None` is the limit system.
    pub fn new(transform: XTransform, kernel: &KernelSpec, eps: Option<f64>) -> Self {
        let symbol = (0..transform.len())
            .map(|flat| {
                let k = transform.k_of(flat);
                let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
                let u = kernel.multiplier_sq(k2);
                match eps {
                    None => u,
                    Some(e) => u * (1.0 / (1.0 + e * e * k2)),
                }
            })
            .collect();
        Self { transform, symbol, eps: eps.unwrap_or(0.0) }
    }

    pub fn transform(&self) -> &XTransform {
        &self.transform
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Field and the largest imaginary residue left by the synthesis.
    pub fn solve(&self, rho_hat: &[Complex64]) -> (VectorField, f64) {
        let t = &self.transform;
        let d = t.d();
        let mut residue: f64 = 0.0;
        let mut comps = Vec::with_capacity(d);
        for j in 0..d {
            let mut e_hat: Vec<Complex64> = rho_hat
                .iter()
                .enumerate()
                .map(|(flat, &r)| {
                    if t.is_nyquist(flat) {
                        return Complex64::new(0.0, 0.0);
                    }
                    let k = t.k_of(flat)[j] as f64;
                    Complex64::new(0.0, -k) * (r * self.symbol[flat])
                })
                .collect();
            t.inverse_in_place(&mut e_hat);
            let scale = e_hat.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
            let imag = e_hat.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
            if scale > 0.0 {
                residue = residue.max(imag / scale);
            }
            comps.push(e_hat.into_iter().map(|c| c.re).collect());
        }
        (comps, residue)
    }

    /// `1/2 (2pi)^d sum_k symbol(k) |rho_k|^2`, the interaction energy.
    pub fn potential_energy(&self, rho_hat: &[Complex64]) -> f64 {
        let vol = (2.0 * PI).powi(self.transform.d() as i32);
        let s: f64 = rho_hat.iter().zip(&self.symbol).map(|(r, u)| u * r.norm_sqr()).sum();
        0.5 * vol * s
    }
}

/// 2/3-rule truncation: zeroes every mode with some `|k_i| > nx/3`.
pub fn dealias(coeffs: &mut [Complex64], transform: &XTransform) {
    let cut = transform.nx() as i64 / 3;
    for (flat, c) in coeffs.iter_mut().enumerate() {
        let k = transform.k_of(flat);
        if k[0].abs() > cut || k[1].abs() > cut {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// Limit-system field `E = -grad int U(x-y) (rho(y) - rho0) dy`.
pub fn solve_field_limit(rho: &SpectralDensity, rho0: f64, kernel: &KernelSpec) -> VectorField {
    let t = XTransform::new(rho.d, rho.nx);
    let mut coeffs = rho.coeffs.clone();
    coeffs[0] -= rho0;
    FieldSolver::new(t, kernel, None).solve(&coeffs).0
}

/// Regularised field `E = -grad(U * V_eps)`, `(1 - eps^2 Lap) V_eps = rho`.
pub fn solve_field_regularized(rho: &SpectralDensity, kernel: &KernelSpec, eps: f64) -> VectorField {
    let t = XTransform::new(rho.d, rho.nx);
    FieldSolver::new(t, kernel, Some(eps)).solve(&rho.coeffs).0
}
