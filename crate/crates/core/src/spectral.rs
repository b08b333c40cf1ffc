//! Fourier transforms over the periodic x grid.
//!
//! Coefficients follow `f_k = (2pi)^-d * int f(x) e^{-ik.x} dx`, discretised as
//! `N^-d * sum_x f(x) e^{-ik.x}`, so that `f(x) = sum_k f_k e^{ik.x}`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Signed wavenumber of FFT index `i` on a grid of `n` points. The Nyquist
/// index maps to `-n/2`.
pub fn wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// FFT index of wavenumber `k` (taken modulo `n`).
pub fn index_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Shared forward/inverse plans for `nx^d` periodic fields. Plans are
/// immutable and may be used from several threads at once.
#[derive(Clone)]
pub struct XTransform {
    d: usize,
    nx: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for XTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("XTransform").field("d", &self.d).field("nx", &self.nx).finish()
    }
}

impl XTransform {
    pub fn new(d: usize, nx: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            d,
            nx,
            forward: planner.plan_fft_forward(nx),
            inverse: planner.plan_fft_inverse(nx),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn len(&self) -> usize {
        self.nx.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Signed wavenumber vector of a flat coefficient index.
    pub fn k_of(&self, flat: usize) -> [i64; 2] {
        match self.d {
            1 => [wavenumber(flat, self.nx), 0],
            _ => [wavenumber(flat / self.nx, self.nx), wavenumber(flat % self.nx, self.nx)],
        }
    }

    pub fn flat_of(&self, k: &[i64]) -> usize {
        match self.d {
            1 => index_of(k[0], self.nx),
            _ => index_of(k[0], self.nx) * self.nx + index_of(k[1], self.nx),
        }
    }

    /// True if any component of the flat index sits on the Nyquist line.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let half = -(self.nx as i64 / 2);
        let k = self.k_of(flat);
        k[0] == half || (self.d == 2 && k[1] == half)
    }

    fn along_axes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.nx;
        match self.d {
            1 => plan.process(data),
            _ => {
                plan.process(data); // contiguous rows
                let mut col = vec![Complex64::new(0.0, 0.0); n];
                for j in 0..n {
                    for i in 0..n {
                        col[i] = data[i * n + j];
                    }
                    plan.process(&mut col);
                    for i in 0..n {
                        data[i * n + j] = col[i];
                    }
                }
            }
        }
    }

    /// In-place forward transform with the `N^-d` normalisation.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        self.along_axes(data, &self.forward);
        let scale = 1.0 / self.len() as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
    }

    /// In-place synthesis `f(x) = sum_k f_k e^{ik.x}`.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        self.along_axes(data, &self.inverse);
    }

    pub fn forward_real(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut data);
        data
    }

    /// Synthesises a real field; also returns the largest imaginary residue.
    pub fn inverse_real(&self, coeffs: &[Complex64]) -> (Vec<f64>, f64) {
        let mut data = coeffs.to_vec();
        self.inverse_in_place(&mut data);
        let residue = data.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        (data.iter().map(|c| c.re).collect(), residue)
    }
}

/// Fourier coefficients of a real periodic field on the `nx^d` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    pub d: usize,
    pub nx: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectralDensity {
    pub fn from_real(transform: &XTransform, field: &[f64]) -> Self {
        Self { d: transform.d(), nx: transform.nx(), coeffs: transform.forward_real(field) }
    }

    pub fn zeros(d: usize, nx: usize) -> Self {
        Self { d, nx, coeffs: vec![Complex64::new(0.0, 0.0); nx.pow(d as u32)] }
    }

    /// Builds a real field's spectrum from a list of modes; each entry `(k, c)`
    /// also sets `-k` to `conj(c)`. Later entries overwrite earlier ones.
    pub fn from_modes(d: usize, nx: usize, modes: &[(Vec<i64>, Complex64)]) -> Result<Self> {
        let t = XTransform::new(d, nx);
        let mut s = Self::zeros(d, nx);
        let half = nx as i64 / 2;
        for (k, c) in modes {
            if k.len() != d || k.iter().any(|&ki| ki.abs() >= half) {
                return Err(Error::InvalidArgument(format!(
                    "mode {k:?} outside the resolved band |k_i| < {half}"
                )));
            }
            let neg: Vec<i64> = k.iter().map(|&ki| -ki).collect();
            if k.iter().all(|&ki| ki == 0) {
                s.coeffs[0] = Complex64::new(c.re, 0.0);
            } else {
                s.coeffs[t.flat_of(k)] = *c;
                s.coeffs[t.flat_of(&neg)] = c.conj();
            }
        }
        Ok(s)
    }

    pub fn to_real(&self, transform: &XTransform) -> (Vec<f64>, f64) {
        transform.inverse_real(&self.coeffs)
    }

    /// Mean of the underlying real field.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn coefficient(&self, transform: &XTransform, k: &[i64]) -> Complex64 {
        self.coeffs[transform.flat_of(k)]
    }

    /// Largest `|c(-k) - conj(c(k))|` relative to the largest coefficient.
    /// Nyquist lines are skipped: they are their own mirror.
    pub fn hermitian_defect(&self, transform: &XTransform) -> f64 {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for flat in 0..self.coeffs.len() {
            if transform.is_nyquist(flat) {
                continue;
            }
            let k = transform.k_of(flat);
            let neg = [-k[0], -k[1]];
            let mirror = self.coeffs[transform.flat_of(&neg[..self.d])];
            worst = worst.max((mirror - self.coeffs[flat].conj()).norm());
        }
        worst / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wavenumber_layout() {
        assert_eq!(wavenumber(0, 8), 0);
        assert_eq!(wavenumber(3, 8), 3);
        assert_eq!(wavenumber(4, 8), -4);
        assert_eq!(wavenumber(7, 8), -1);
        assert_eq!(index_of(-1, 8), 7);
    }

    #[test]
    fn cosine_coefficients() {
        let t = XTransform::new(1, 16);
        let field: Vec<f64> = (0..16).map(|i| 2.0 + 0.3 * (i as f64 * 2.0 * PI / 16.0).cos()).collect();
        let s = SpectralDensity::from_real(&t, &field);
        assert!((s.mean() - 2.0).abs() < 1e-14);
        assert!((s.coefficient(&t, &[1]) - Complex64::new(0.15, 0.0)).norm() < 1e-14);
        assert!((s.coefficient(&t, &[-1]) - Complex64::new(0.15, 0.0)).norm() < 1e-14);
        assert!(s.hermitian_defect(&t) < 1e-12);
        let (back, residue) = s.to_real(&t);
        assert!(residue < 1e-14);
        for (a, b) in back.iter().zip(&field) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn two_d_round_trip() {
        let t = XTransform::new(2, 8);
        let field: Vec<f64> = (0..64)
            .map(|f| {
                let (i, j) = (f / 8, f % 8);
                let (x, y) = (i as f64 * PI / 4.0, j as f64 * PI / 4.0);
                (x + 2.0 * y).sin() + 0.5
            })
            .collect();
        let s = SpectralDensity::from_real(&t, &field);
        // sin(x + 2y) = (e^{i(x+2y)} - e^{-i(x+2y)}) / 2i
        assert!((s.coefficient(&t, &[1, 2]) - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!(s.hermitian_defect(&t) < 1e-12);
        let (back, _) = s.to_real(&t);
        for (a, b) in back.iter().zip(&field) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn from_modes_is_hermitian() {
        let s = SpectralDensity::from_modes(1, 16, &[(vec![3], Complex64::new(0.2, -0.1))]).unwrap();
        let t = XTransform::new(1, 16);
        assert_eq!(s.coefficient(&t, &[-3]), Complex64::new(0.2, 0.1));
        assert!(SpectralDensity::from_modes(1, 16, &[(vec![8], Complex64::new(1.0, 0.0))]).is_err());
    }
}
