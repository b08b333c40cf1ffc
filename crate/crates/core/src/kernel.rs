//! Interaction potentials described by their Fourier multipliers.
//!
//! A kernel is a finite sum of Riesz terms `c / |k|^alpha`. The sign of the
//! interaction is carried by the coefficients: positive coefficients are
//! repulsive, negative ones attractive. The zero mode is always zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub coefficient: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interaction {
    Attractive,
    Repulsive,
}

impl Interaction {
    pub fn sign(self) -> f64 {
        match self {
            Interaction::Attractive => -1.0,
            Interaction::Repulsive => 1.0,
        }
    }
}

/// Result of checking assumption (A1) on a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A1Bounds {
    /// Smallest exponent among the terms; governs every scaling statement.
    pub effective_alpha: f64,
    /// `sum |coefficient|`, so that `|U(k)| <= c_alpha / |k|^effective_alpha`.
    pub c_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    terms: Vec<KernelTerm>,
}

impl KernelSpec {
    pub fn new(terms: Vec<KernelTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Kernel("at least one term is required".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if !t.coefficient.is_finite() {
                return Err(Error::Kernel(format!("term {i}: coefficient must be finite")));
            }
            if !(t.alpha.is_finite() && t.alpha > 0.0) {
                return Err(Error::Kernel(format!(
                    "term {i}: alpha = {} but there must exist alpha > 0",
                    t.alpha
                )));
            }
        }
        Ok(Self { terms })
    }

    /// Single Riesz term `±1/|k|^alpha`.
    pub fn riesz(alpha: f64, interaction: Interaction) -> Result<Self> {
        Self::new(vec![KernelTerm { coefficient: interaction.sign(), alpha }])
    }

    /// Zero interaction (free transport). The exponent is immaterial.
    pub fn free() -> Self {
        Self { terms: vec![KernelTerm { coefficient: 0.0, alpha: 1.0 }] }
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    pub fn is_free(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient == 0.0)
    }

    /// Multiplier at the lattice vector `k`; `|k|` is the Euclidean norm.
    pub fn multiplier(&self, k: &[i64]) -> f64 {
        let k2: i64 = k.iter().map(|&c| c * c).sum();
        self.multiplier_sq(k2 as f64)
    }

    /// Multiplier as a function of `|k|^2`.
    pub fn multiplier_sq(&self, k2: f64) -> f64 {
        if k2 == 0.0 {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|t| t.coefficient * k2.powf(-0.5 * t.alpha))
            .sum()
    }

    pub fn effective_alpha(&self) -> f64 {
        self.terms.iter().map(|t| t.alpha).fold(f64::INFINITY, f64::min)
    }

    /// Checks (A1) on every nonzero lattice vector of `Z^d` with
    /// `|k|_inf <= radius`, and returns the exponent/constant pair.
    pub fn verify_a1(&self, d: usize, radius: i64) -> Result<A1Bounds> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        // re-validate: terms may have been deserialised directly
        let checked = Self::new(self.terms.clone())?;
        let effective_alpha = checked.effective_alpha();
        let c_alpha: f64 = checked.terms.iter().map(|t| t.coefficient.abs()).sum();

        let side = (2 * radius + 1) as usize;
        let total = side.pow(d as u32);
        let mut k = vec![0i64; d];
        for flat in 0..total {
            let mut rem = flat;
            for c in k.iter_mut() {
                *c = (rem % side) as i64 - radius;
                rem /= side;
            }
            let k2: i64 = k.iter().map(|&c| c * c).sum();
            if k2 == 0 {
                continue;
            }
            let value = checked.multiplier(&k).abs();
            let bound = c_alpha * (k2 as f64).powf(-0.5 * effective_alpha);
            if value > bound * (1.0 + 1e-12) {
                return Err(Error::Kernel(format!(
                    "|U({k:?})| = {value} exceeds C_alpha/|k|^alpha = {bound}"
                )));
            }
        }
        Ok(A1Bounds { effective_alpha, c_alpha })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn term(coefficient: f64, alpha: f64) -> KernelTerm {
        KernelTerm { coefficient, alpha }
    }

    #[test]
    fn zero_mode_vanishes() {
        let k = KernelSpec::new(vec![term(1.0, 2.0)]).unwrap();
        assert_eq!(k.multiplier(&[0]), 0.0);
        assert_eq!(k.multiplier(&[0, 0]), 0.0);
    }

    #[test]
    fn unit_mode() {
        let k = KernelSpec::new(vec![term(1.0, 2.0)]).unwrap();
        assert_eq!(k.multiplier(&[1]), 1.0);
        assert_eq!(k.multiplier(&[-1]), 1.0);
    }

    #[test]
    fn two_term_sum() {
        let k = KernelSpec::new(vec![term(1.0, 1.0), term(0.5, 0.5)]).unwrap();
        let expected = 0.5 + 0.5 * 2f64.powf(-0.5);
        assert!((k.multiplier(&[2]) - expected).abs() < 1e-15);
        assert!((k.multiplier(&[2]) - 0.8536).abs() < 1e-4);
    }

    #[test]
    fn a1_single_term() {
        let k = KernelSpec::new(vec![term(1.0, 2.0)]).unwrap();
        let b = k.verify_a1(1, 128).unwrap();
        assert_eq!((b.effective_alpha, b.c_alpha), (2.0, 1.0));
    }

    #[test]
    fn a1_min_alpha_for_sums() {
        let k = KernelSpec::new(vec![term(1.0, 1.0), term(1.0, 0.25)]).unwrap();
        let b = k.verify_a1(2, 32).unwrap();
        assert_eq!((b.effective_alpha, b.c_alpha), (0.25, 2.0));
    }

    #[test]
    fn a1_attractive_uses_absolute_value() {
        let k = KernelSpec::riesz(1.0, Interaction::Attractive).unwrap();
        let b = k.verify_a1(1, 64).unwrap();
        assert_eq!((b.effective_alpha, b.c_alpha), (1.0, 1.0));
        assert_eq!(k.multiplier(&[1]), -1.0);
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        assert!(matches!(KernelSpec::new(vec![term(1.0, 0.0)]), Err(Error::Kernel(_))));
        assert!(matches!(KernelSpec::new(vec![term(1.0, -1.0)]), Err(Error::Kernel(_))));
        assert!(KernelSpec::new(vec![]).is_err());
    }

    fn arb_kernel() -> impl Strategy<Value = KernelSpec> {
        prop::collection::vec((-3.0f64..3.0, 0.05f64..3.0), 1..4).prop_map(|ts| {
            KernelSpec::new(ts.into_iter().map(|(c, a)| term(c, a)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn bound_even_and_zero(spec in arb_kernel(), k1 in -40i64..40, k2 in -40i64..40) {
            let b = spec.verify_a1(2, 6).unwrap();
            let k = [k1, k2];
            let m = spec.multiplier(&k);
            prop_assert_eq!(m, spec.multiplier(&[-k1, -k2]));
            if k1 != 0 || k2 != 0 {
                let norm = ((k1 * k1 + k2 * k2) as f64).sqrt();
                prop_assert!(m.abs() <= b.c_alpha * norm.powf(-b.effective_alpha) * (1.0 + 1e-12));
            } else {
                prop_assert_eq!(m, 0.0);
            }
        }
    }
}
