//! Strang-split semi-Lagrangian time stepping.
//!
//! One step is `x(dt/2) -> field -> v(dt) -> x(dt/2)`: free streaming is an
//! exact Fourier phase shift per velocity node, the acceleration step a
//! cubic-spline translation per space node.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{BlowupConfig, ModeConfig, RunConfig};
use crate::error::{Error, Result};
use crate::field::{dealias, FieldSolver, VectorField};
use crate::kernel::KernelSpec;
use crate::phase_space::{key_quantity_n, map_v_lines, map_x_lines, norm_report, Distribution, NormKey, NormReport};
use crate::spectral::XTransform;
use crate::spline::SplineShift;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FieldMode {
    Limit,
    Regularized(f64),
}

impl FieldMode {
    pub fn eps(self) -> Option<f64> {
        match self {
            FieldMode::Limit => None,
            FieldMode::Regularized(e) => Some(e),
        }
    }
}

impl From<ModeConfig> for FieldMode {
    fn from(m: ModeConfig) -> Self {
        match m {
            ModeConfig::Limit => FieldMode::Limit,
            ModeConfig::Regularized { eps } => FieldMode::Regularized(eps),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepperState {
    pub f: Distribution,
    pub t: f64,
    pub dt: f64,
    pub mode: FieldMode,
    pub kernel: KernelSpec,
}

impl StepperState {
    pub fn new(f: Distribution, dt: f64, mode: FieldMode, kernel: KernelSpec) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        if dt * f.geometry.v_max > 2.0 * PI {
            return Err(Error::InvalidArgument(format!(
                "dt * v_max = {} exceeds the x period",
                dt * f.geometry.v_max
            )));
        }
        Ok(Self { f, t: 0.0, dt, mode, kernel })
    }
}

/// Exact free streaming `f(x, v) -> f(x - dt v, v)` by Fourier phase shifts.
pub fn advect_x(f: &Distribution, transform: &XTransform, dt: f64) -> Distribution {
    if dt == 0.0 {
        return f.clone();
    }
    let g = f.geometry;
    let values = map_x_lines(&g, transform, &f.values, |jv, coeffs| {
        let v = g.velocity(jv);
        if v[0] == 0.0 && v[1] == 0.0 {
            return;
        }
        for (flat, c) in coeffs.iter_mut().enumerate() {
            let k = transform.k_of(flat);
            let phase = -(k[0] as f64 * v[0] + k[1] as f64 * v[1]) * dt;
            *c *= Complex64::from_polar(1.0, phase);
        }
    });
    f.with_values(values)
}

/// Velocity translation `f(x, v) -> f(x, v - dt E(x))`.
///
/// Returns the new distribution and the largest distance, in cells, by which
/// a characteristic foot left the velocity box (zero if none did).
pub fn advect_v(f: &Distribution, field: &VectorField, dt: f64, spline: &SplineShift) -> (Distribution, f64) {
    let g = f.geometry;
    let dv = g.dv();
    let mut values = f.values.clone();
    let mut excursion: f64 = 0.0;
    for (axis, e) in field.iter().enumerate().take(g.d) {
        let shifts: Vec<f64> = e.iter().map(|&ex| dt * ex / dv).collect();
        // extreme feet sit half a cell inside each edge
        excursion = excursion.max(shifts.iter().fold(0.0f64, |m, s| m.max(s.abs() - 0.5)));
        map_v_lines(&g, &mut values, axis, |ix, input, output| {
            let mut scratch = vec![0.0; input.len()];
            spline.shift(input, shifts[ix], output, &mut scratch);
        });
    }
    (f.with_values(values), excursion.max(0.0))
}

/// Cached plans for repeated steps on one grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    transform: XTransform,
    solver: FieldSolver,
    spline: SplineShift,
    mode: FieldMode,
}

/// Side information from one step.
#[derive(Debug, Clone)]
pub struct StepInfo {
    /// Largest velocity-box exit of a characteristic foot, in cells.
    pub excursion_cells: f64,
    /// Density spectrum (before dealiasing) at the half step.
    pub rho_hat: Vec<Complex64>,
}

impl Stepper {
    pub fn new(f: &Distribution, kernel: &KernelSpec, mode: FieldMode) -> Self {
        let g = f.geometry;
        let transform = XTransform::new(g.d, g.nx);
        let solver = FieldSolver::new(transform.clone(), kernel, mode.eps());
        Self { transform, solver, spline: SplineShift::new(g.nv), mode }
    }

    pub fn transform(&self) -> &XTransform {
        &self.transform
    }

    /// Dealiased field of the density of `f`.
    pub fn field(&self, f: &Distribution) -> (VectorField, Vec<Complex64>) {
        let rho_hat = self.transform.forward_real(&f.density());
        let mut source = rho_hat.clone();
        dealias(&mut source, &self.transform);
        if self.mode == FieldMode::Limit {
            source[0] -= f.rho0;
        }
        (self.solver.solve(&source).0, rho_hat)
    }

    /// Interaction energy of `f` with the same dealiasing as the field.
    pub fn potential_energy(&self, f: &Distribution) -> f64 {
        let mut rho_hat = self.transform.forward_real(&f.density());
        dealias(&mut rho_hat, &self.transform);
        self.solver.potential_energy(&rho_hat)
    }

    pub fn step(&self, state: &mut StepperState) -> Result<StepInfo> {
        let dt = state.dt;
        let half = advect_x(&state.f, &self.transform, 0.5 * dt);
        let (e, rho_hat) = self.field(&half);
        let (kicked, excursion_cells) = advect_v(&half, &e, dt, &self.spline);
        let f = advect_x(&kicked, &self.transform, 0.5 * dt);
        let t = state.t + dt;
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        state.f = f;
        state.t = t;
        Ok(StepInfo { excursion_cells, rho_hat })
    }
}

/// One Strang step from scratch (plans are rebuilt; use [`Stepper`] in loops).
pub fn strang_step(mut state: StepperState) -> Result<(StepperState, StepInfo)> {
    let stepper = Stepper::new(&state.f, &state.kernel, state.mode);
    let info = stepper.step(&mut state)?;
    Ok((state, info))
}

/// Share of `sum |c_k|^2` carried by `nx/6 < |k|_inf <= nx/3`.
pub fn spectral_tail(coeffs: &[Complex64], transform: &XTransform) -> f64 {
    let nx = transform.nx() as i64;
    let (lo, hi) = (nx / 6, nx / 3);
    let mut tail = 0.0;
    let mut total = 0.0;
    for (flat, c) in coeffs.iter().enumerate() {
        let k = transform.k_of(flat);
        let kinf = k[..transform.d()].iter().map(|x| x.abs()).max().unwrap_or(0);
        let p = c.norm_sqr();
        total += p;
        if kinf > lo && kinf <= hi {
            tail += p;
        }
    }
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

/// Conserved quantities and norms at one diagnostic time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub l2: f64,
    pub energy_kinetic: f64,
    pub energy_potential: f64,
    pub norms: NormReport,
}

impl DiagnosticsRow {
    pub fn energy(&self) -> f64 {
        self.energy_kinetic + self.energy_potential
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BlowUpReason {
    NonFinite,
    LinfGrowth { ratio: f64 },
    /// Share of the density spectrum in the upper dealiased band.
    UnresolvedDensity { tail: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    BlowUp { t: f64, step: usize, reason: BlowUpReason },
    BoundaryContamination { t: f64, fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunEvent {
    VelocityExcursion { t: f64, cells: f64 },
    BoundaryContamination { t: f64, fraction: f64 },
    BlowUp { t: f64, reason: BlowUpReason },
}

/// Relative drifts of the conserved quantities between the first and last rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drifts {
    pub mass: f64,
    /// Relative to `int int |v| |f|` at t = 0.
    pub momentum: f64,
    pub l2: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub history: Vec<NormReport>,
    pub rows: Vec<DiagnosticsRow>,
    pub final_state: Distribution,
    pub events: Vec<RunEvent>,
    pub termination: Termination,
    /// Density at every diagnostic time.
    pub densities: Vec<(f64, Vec<f64>)>,
    /// Full states at diagnostic times when requested.
    pub states: Vec<(f64, Distribution)>,
    momentum_scale: f64,
}

impl RunOutcome {
    pub fn blew_up(&self) -> Option<f64> {
        match self.termination {
            Termination::BlowUp { t, .. } => Some(t),
            _ => None,
        }
    }

    pub fn drifts(&self) -> Drifts {
        let (a, b) = (&self.rows[0], self.rows.last().expect("at least one row"));
        let rel = |x0: f64, x1: f64| if x0 == 0.0 { (x1 - x0).abs() } else { ((x1 - x0) / x0).abs() };
        let dp: f64 = a.momentum.iter().zip(&b.momentum).map(|(p, q)| (q - p).powi(2)).sum::<f64>().sqrt();
        Drifts {
            mass: rel(a.mass, b.mass),
            momentum: if self.momentum_scale == 0.0 { dp } else { dp / self.momentum_scale },
            l2: rel(a.l2, b.l2),
            energy: rel(a.energy(), b.energy()),
        }
    }
}

/// Everything `simulate` needs, decoupled from the file format.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub kernel: KernelSpec,
    pub mode: FieldMode,
    pub dt: f64,
    pub steps: usize,
    pub cadence: usize,
    pub sobolev: Vec<NormKey>,
    pub rho_orders: Vec<f64>,
    pub key_quantity: Option<(u32, f64)>,
    pub blowup: BlowupConfig,
    pub keep_states: bool,
}

impl RunSpec {
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            kernel: config.kernel_spec()?,
            mode: config.mode.into(),
            dt: config.time.dt,
            steps: config.steps(),
            cadence: config.diagnostics.cadence,
            sobolev: config.diagnostics.sobolev_keys(),
            rho_orders: config.diagnostics.rho_orders(),
            key_quantity: config.diagnostics.key_quantity.map(|k| (k.m, k.weight)),
            blowup: config.blowup,
            keep_states: false,
        })
    }
}

/// Integrates the configured problem in memory.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let spec = RunSpec::from_config(config)?;
    simulate(&spec, config.initial_distribution()?, &mut |_, _| Ok(()))
}

/// Core run loop. `observer` sees every diagnostic row with its state.
pub fn simulate(
    spec: &RunSpec,
    f0: Distribution,
    observer: &mut dyn FnMut(&DiagnosticsRow, &Distribution) -> Result<()>,
) -> Result<RunOutcome> {
    let stepper = Stepper::new(&f0, &spec.kernel, spec.mode);
    let transform = stepper.transform().clone();
    let mut state = StepperState::new(f0, spec.dt, spec.mode, spec.kernel.clone())?;
    let linf0 = state.f.linf_norm();
    let momentum_scale = state.f.abs_momentum_scale();

    let mut out = RunOutcome {
        history: Vec::new(),
        rows: Vec::new(),
        final_state: state.f.clone(),
        events: Vec::new(),
        termination: Termination::Completed,
        densities: Vec::new(),
        states: Vec::new(),
        momentum_scale,
    };
    let mut warned_excursion = false;

    let mut record = |out: &mut RunOutcome, step: usize, f: &Distribution| -> Result<Option<Termination>> {
        let t = step as f64 * spec.dt;
        let mut norms = norm_report(f, &transform, t, &spec.sobolev, &spec.rho_orders)?;
        out.history.push(norms.clone());
        if let Some((m, w)) = spec.key_quantity {
            norms.key_quantity = Some(key_quantity_n(&out.history, m, w)?);
            out.history.last_mut().expect("pushed").key_quantity = norms.key_quantity;
        }
        let row = DiagnosticsRow {
            step,
            t,
            mass: f.mass(),
            momentum: f.momentum()[..f.geometry.d].to_vec(),
            l2: f.l2_norm(),
            energy_kinetic: f.kinetic_energy(),
            energy_potential: stepper.potential_energy(f),
            norms,
        };
        observer(&row, f)?;
        out.rows.push(row);
        out.densities.push((t, f.density()));
        if spec.keep_states {
            out.states.push((t, f.clone()));
        }
        let fraction = f.boundary_mass_fraction();
        if fraction > spec.blowup.boundary_tolerance {
            log::warn!("t = {t}: {fraction:e} of |f| lies within 10% of the velocity box edge; aborting");
            out.events.push(RunEvent::BoundaryContamination { t, fraction });
            return Ok(Some(Termination::BoundaryContamination { t, fraction }));
        }
        Ok(None)
    };

    if let Some(term) = record(&mut out, 0, &state.f)? {
        out.termination = term;
        return Ok(out);
    }
    for step in 1..=spec.steps {
        let t = step as f64 * spec.dt;
        let info = match stepper.step(&mut state) {
            Ok(info) => info,
            Err(Error::NonFinite { .. }) => {
                let reason = BlowUpReason::NonFinite;
                out.events.push(RunEvent::BlowUp { t, reason: reason.clone() });
                out.termination = Termination::BlowUp { t, step, reason };
                return Ok(out);
            }
            Err(e) => return Err(e),
        };
        state.t = t;
        if info.excursion_cells > 1.0 && !warned_excursion {
            warned_excursion = true;
            log::warn!("t = {t}: characteristic foot left the velocity box by {:.2} cells", info.excursion_cells);
            out.events.push(RunEvent::VelocityExcursion { t, cells: info.excursion_cells });
        }
        let blow = {
            let linf = state.f.linf_norm();
            let tail = spectral_tail(&info.rho_hat, &transform);
            if linf0 > 0.0 && linf > spec.blowup.linf_growth * linf0 {
                Some(BlowUpReason::LinfGrowth { ratio: linf / linf0 })
            } else if tail > spec.blowup.spectral_tail {
                Some(BlowUpReason::UnresolvedDensity { tail })
            } else {
                None
            }
        };
        if let Some(reason) = blow {
            log::warn!("blow-up detected at t = {t}: {reason:?}");
            out.events.push(RunEvent::BlowUp { t, reason: reason.clone() });
            out.termination = Termination::BlowUp { t, step, reason };
            out.final_state = state.f;
            return Ok(out);
        }
        if step % spec.cadence == 0 || step == spec.steps {
            if let Some(term) = record(&mut out, step, &state.f)? {
                out.termination = term;
                out.final_state = state.f;
                return Ok(out);
            }
        }
    }
    out.final_state = state.f;
    Ok(out)
}
