//! Cubic B-spline translation of uniform lines.
//!
//! The interpolant uses zero coefficients outside the line, so for data that
//! vanishes near both ends a translation preserves the discrete sum and the
//! first two discrete moments exactly (partition of unity of the B-spline).

#[derive(Debug, Clone)]
pub struct SplineShift {
    n: usize,
    // Thomas-algorithm factors for tridiag(1, 4, 1) / 6
    upper: Vec<f64>,
    pivot: Vec<f64>,
}

impl SplineShift {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "spline line needs at least two nodes");
        let (a, b) = (1.0 / 6.0, 4.0 / 6.0);
        let mut upper = vec![0.0; n];
        let mut pivot = vec![0.0; n];
        pivot[0] = b;
        upper[0] = a / b;
        for i in 1..n {
            pivot[i] = b - a * upper[i - 1];
            upper[i] = a / pivot[i];
        }
        Self { n, upper, pivot }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// B-spline coefficients interpolating `values` at the integer nodes.
    pub fn coefficients(&self, values: &[f64], coeffs: &mut [f64]) {
        let a = 1.0 / 6.0;
        coeffs[0] = values[0] / self.pivot[0];
        for i in 1..self.n {
            coeffs[i] = (values[i] - a * coeffs[i - 1]) / self.pivot[i];
        }
        for i in (0..self.n - 1).rev() {
            coeffs[i] -= self.upper[i] * coeffs[i + 1];
        }
    }

    /// `output[i] = s(i - shift)` where `s` interpolates `input`; feet outside
    /// the cell box `[-0.5, n - 0.5]` give zero. `scratch` holds `n` values.
    pub fn shift(&self, input: &[f64], shift: f64, output: &mut [f64], scratch: &mut [f64]) {
        let n = self.n;
        if shift == 0.0 {
            output.copy_from_slice(input);
            return;
        }
        self.coefficients(input, scratch);
        let y0 = -shift;
        let m0 = y0.floor();
        let th = y0 - m0;
        let th2 = th * th;
        let th3 = th2 * th;
        let w = [
            (1.0 - th).powi(3) / 6.0,
            (3.0 * th3 - 6.0 * th2 + 4.0) / 6.0,
            (-3.0 * th3 + 3.0 * th2 + 3.0 * th + 1.0) / 6.0,
            th3 / 6.0,
        ];
        let m0 = m0 as i64;
        let coef = |j: i64| -> f64 {
            if j < 0 || j >= n as i64 {
                0.0
            } else {
                scratch[j as usize]
            }
        };
        for (i, out) in output.iter_mut().enumerate() {
            let foot = i as f64 + y0;
            if foot < -0.5 || foot > n as f64 - 0.5 {
                *out = 0.0;
                continue;
            }
            let m = i as i64 + m0;
            *out = w[0] * coef(m - 1) + w[1] * coef(m) + w[2] * coef(m + 1) + w[3] * coef(m + 2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_line(n: usize, h: f64, centre: f64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let v = -(n as f64) * h / 2.0 + (i as f64 + 0.5) * h - centre;
                (-0.5 * v * v).exp()
            })
            .collect()
    }

    #[test]
    fn interpolates_nodes() {
        let s = SplineShift::new(20);
        let f = gaussian_line(20, 0.5, 0.0);
        let mut c = vec![0.0; 20];
        s.coefficients(&f, &mut c);
        for i in 1..19 {
            let back = (c[i - 1] + 4.0 * c[i] + c[i + 1]) / 6.0;
            assert!((back - f[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn integer_shift_is_exact_translation() {
        let s = SplineShift::new(32);
        let f = gaussian_line(32, 0.5, 0.0);
        let mut out = vec![0.0; 32];
        let mut scratch = vec![0.0; 32];
        s.shift(&f, 2.0, &mut out, &mut scratch);
        for i in 2..32 {
            assert!((out[i] - f[i - 2]).abs() < 1e-12);
        }
    }

    #[test]
    fn fourth_order_shift_error() {
        let err = |n: usize| {
            let h = 16.0 / n as f64;
            let s = SplineShift::new(n);
            let f = gaussian_line(n, h, 0.0);
            // same fractional cell offset at every resolution
            let exact = gaussian_line(n, h, 0.5 * h);
            let mut out = vec![0.0; n];
            let mut scratch = vec![0.0; n];
            s.shift(&f, 0.5, &mut out, &mut scratch);
            out.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!(ratio > 13.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn conserves_sum_and_moments() {
        let n = 64;
        let s = SplineShift::new(n);
        let f = gaussian_line(n, 0.25, 0.0);
        let mut out = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        let delta = 0.37;
        s.shift(&f, delta, &mut out, &mut scratch);
        let moment = |g: &[f64], p: i32| -> f64 { g.iter().enumerate().map(|(i, v)| (i as f64).powi(p) * v).sum() };
        let (m0, m1, m2) = (moment(&f, 0), moment(&f, 1), moment(&f, 2));
        assert!((moment(&out, 0) - m0).abs() < 1e-12 * m0);
        assert!((moment(&out, 1) - (m1 + delta * m0)).abs() < 1e-11 * m1);
        let m2_exact = m2 + 2.0 * delta * m1 + delta * delta * m0;
        assert!((moment(&out, 2) - m2_exact).abs() < 1e-11 * m2);
    }
}
