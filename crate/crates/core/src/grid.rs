//! Phase-space grid: periodic `[0, 2pi)^d` in x, cell-centred `[-v_max, v_max]^d` in v.
//!
//! Storage is row-major with the x axes first and the v axes last, so for
//! `d = 1` the value at `(x_i, v_j)` lives at `i * nv + j`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub d: usize,
    pub nx: usize,
    pub nv: usize,
    pub v_max: f64,
}

impl GridGeometry {
    pub fn new(d: usize, nx: usize, nv: usize, v_max: f64) -> Result<Self> {
        let g = Self { d, nx, nv, v_max };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d == 1 || self.d == 2) {
            return Err(Error::Grid(format!("d = {} (only 1 and 2 are simulated)", self.d)));
        }
        if self.nx < 8 || !self.nx.is_power_of_two() {
            return Err(Error::Grid(format!("nx = {} must be a power of two >= 8", self.nx)));
        }
        if self.nv < 8 {
            return Err(Error::Grid(format!("nv = {} must be >= 8", self.nv)));
        }
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(Error::Grid(format!("v_max = {} must be positive", self.v_max)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / self.nv as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Cell-centred velocity node; symmetric about zero.
    pub fn v(&self, j: usize) -> f64 {
        -self.v_max + (j as f64 + 0.5) * self.dv()
    }

    pub fn v_nodes(&self) -> Vec<f64> {
        (0..self.nv).map(|j| self.v(j)).collect()
    }

    /// Number of x points, `nx^d`.
    pub fn x_len(&self) -> usize {
        self.nx.pow(self.d as u32)
    }

    /// Number of v points, `nv^d`.
    pub fn v_len(&self) -> usize {
        self.nv.pow(self.d as u32)
    }

    pub fn len(&self) -> usize {
        self.x_len() * self.v_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_cell(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }

    pub fn v_cell(&self) -> f64 {
        self.dv().powi(self.d as i32)
    }

    /// Volume of the x torus, `(2pi)^d`.
    pub fn x_volume(&self) -> f64 {
        (2.0 * PI).powi(self.d as i32)
    }

    /// Decode a flat x index into per-axis indices (first axis slowest).
    pub fn x_multi(&self, flat: usize) -> [usize; 2] {
        match self.d {
            1 => [flat, 0],
            _ => [flat / self.nx, flat % self.nx],
        }
    }

    pub fn v_multi(&self, flat: usize) -> [usize; 2] {
        match self.d {
            1 => [flat, 0],
            _ => [flat / self.nv, flat % self.nv],
        }
    }

    /// Velocity vector of a flat v index; unused trailing component is zero.
    pub fn velocity(&self, flat: usize) -> [f64; 2] {
        let m = self.v_multi(flat);
        match self.d {
            1 => [self.v(m[0]), 0.0],
            _ => [self.v(m[0]), self.v(m[1])],
        }
    }

    pub fn position(&self, flat: usize) -> [f64; 2] {
        let m = self.x_multi(flat);
        match self.d {
            1 => [self.x(m[0]), 0.0],
            _ => [self.x(m[0]), self.x(m[1])],
        }
    }

    pub fn speed_sq(&self, flat: usize) -> f64 {
        let v = self.velocity(flat);
        v[0] * v[0] + v[1] * v[1]
    }
}
