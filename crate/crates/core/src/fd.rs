//! Finite-difference velocity derivatives.
//!
//! Sixth-order centred stencils in the interior and sixth-order one-sided
//! stencils on the three nodes nearest each boundary. Weights come from
//! Fornberg's recursion.

/// Weights of the `m`-th derivative at `z` from nodes `x`.
pub fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] *= c4 / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

const WIDTH: usize = 7;
const HALF: usize = 3;

/// First derivative on a uniform line of `n >= 7` nodes.
#[derive(Debug, Clone)]
pub struct FirstDerivative {
    n: usize,
    inv_h: f64,
    centred: [f64; WIDTH],
    // left[b] is the stencil for node b over nodes 0..7; right mirrors it
    left: [[f64; WIDTH]; HALF],
}

impl FirstDerivative {
    pub fn new(n: usize, h: f64) -> Option<Self> {
        if n < WIDTH {
            return None;
        }
        let nodes: Vec<f64> = (0..WIDTH).map(|i| i as f64).collect();
        let mut centred = [0.0; WIDTH];
        centred.copy_from_slice(&fornberg_weights(HALF as f64, &nodes, 1));
        let mut left = [[0.0; WIDTH]; HALF];
        for (b, row) in left.iter_mut().enumerate() {
            row.copy_from_slice(&fornberg_weights(b as f64, &nodes, 1));
        }
        Some(Self { n, inv_h: 1.0 / h, centred, left })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn apply(&self, input: &[f64], output: &mut [f64]) {
        let n = self.n;
        debug_assert!(input.len() == n && output.len() == n);
        for (j, out) in output.iter_mut().enumerate().take(n - HALF).skip(HALF) {
            let mut acc = 0.0;
            for (w, f) in self.centred.iter().zip(&input[j - HALF..j + HALF + 1]) {
                acc += w * f;
            }
            *out = acc * self.inv_h;
        }
        for b in 0..HALF {
            let mut lo = 0.0;
            let mut hi = 0.0;
            for i in 0..WIDTH {
                lo += self.left[b][i] * input[i];
                // mirrored stencil flips sign for an odd derivative
                hi -= self.left[b][i] * input[n - 1 - i];
            }
            output[b] = lo * self.inv_h;
            output[n - 1 - b] = hi * self.inv_h;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_weights_are_classical() {
        let nodes: Vec<f64> = (0..7).map(|i| i as f64).collect();
        let w = fornberg_weights(3.0, &nodes, 1);
        let expected = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn exact_on_polynomials() {
        let n = 12;
        let h = 0.3;
        let d = FirstDerivative::new(n, h).unwrap();
        let x: Vec<f64> = (0..n).map(|i| -1.0 + i as f64 * h).collect();
        let f: Vec<f64> = x.iter().map(|&v| v.powi(6) - 2.0 * v.powi(3) + v).collect();
        let mut out = vec![0.0; n];
        d.apply(&f, &mut out);
        for (o, &v) in out.iter().zip(&x) {
            let exact = 6.0 * v.powi(5) - 6.0 * v * v + 1.0;
            assert!((o - exact).abs() < 1e-9, "{o} vs {exact}");
        }
    }

    #[test]
    fn sixth_order_convergence() {
        let err = |n: usize| {
            let h = 2.0 / (n - 1) as f64;
            let d = FirstDerivative::new(n, h).unwrap();
            let x: Vec<f64> = (0..n).map(|i| -1.0 + i as f64 * h).collect();
            let f: Vec<f64> = x.iter().map(|v| (2.0 * v).sin()).collect();
            let mut out = vec![0.0; n];
            d.apply(&f, &mut out);
            out.iter().zip(&x).map(|(o, v)| (o - 2.0 * (2.0 * v).cos()).abs()).fold(0.0, f64::max)
        };
        let ratio = err(81) / err(161);
        assert!(ratio > 50.0, "ratio {ratio}");
    }

    #[test]
    fn too_short_line() {
        assert!(FirstDerivative::new(6, 1.0).is_none());
    }
}
