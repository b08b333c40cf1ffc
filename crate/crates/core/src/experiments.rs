//! The epsilon studies: convergence of the regularised system to the limit
//! system, uniform bounds on the key quantity, and its small-time growth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::loglog_fit;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::integrator::{simulate, FieldMode, RunSpec, Termination};
use crate::phase_space::{key_quantity_n, regularity_thresholds, Distribution, NormKey};

fn check_eps_list(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::InvalidArgument("eps list is empty".into()));
    }
    if eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidArgument(format!("eps values must be finite and >= 0: {eps:?}")));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(format!("eps list must be strictly decreasing: {eps:?}")));
    }
    Ok(())
}

fn member_mode(eps: f64, zero_as_limit: bool) -> FieldMode {
    if eps == 0.0 && zero_as_limit {
        FieldMode::Limit
    } else {
        FieldMode::Regularized(eps)
    }
}

fn blow_up(eps: f64, term: &Termination) -> Result<()> {
    match term {
        Termination::Completed => Ok(()),
        Termination::BlowUp { t, .. } | Termination::BoundaryContamination { t, .. } => {
            Err(Error::StudyBlowUp { eps, t: *t })
        }
    }
}

fn diff_l2(a: &Distribution, b: &Distribution) -> f64 {
    let diff = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    a.with_values(diff).l2_norm()
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsRow {
    pub eps: f64,
    /// `sup_t ||f_eps - f||_{L^2_{x,v}}` over diagnostic times.
    pub f_error: f64,
    /// `||rho_eps - rho||_{L^2([0,T], L^2_x)}`.
    pub rho_error: f64,
    /// `f_error / sup_t ||f||_{L^2}`.
    pub relative_f_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub order: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsStudy {
    pub rows: Vec<EpsRow>,
    /// Fitted on the last three nonzero eps; reported, never asserted.
    pub order: Option<OrderFit>,
}

impl EpsStudy {
    pub fn columns() -> [&'static str; 4] {
        ["eps", "f_error", "rho_error", "relative_f_error"]
    }

    pub fn table(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| vec![r.eps, r.f_error, r.rho_error, r.relative_f_error]).collect()
    }
}

/// Runs the limit system and the regularised system for every eps on shared
/// data, grid and time step, and measures the distance to the limit run.
/// `eps = 0` members use the regularised code path with `eps = 0`.
pub fn epsilon_convergence_study(config: &RunConfig, eps_list: &[f64]) -> Result<EpsStudy> {
    let spec = RunSpec::from_config(config)?;
    epsilon_study_with(&spec, config.initial_distribution()?, eps_list)
}

pub fn epsilon_study_with(spec: &RunSpec, f0: Distribution, eps_list: &[f64]) -> Result<EpsStudy> {
    check_eps_list(eps_list)?;
    let reference = simulate(&RunSpec { mode: FieldMode::Limit, keep_states: true, ..spec.clone() }, f0.clone(), &mut |_, _| Ok(()))?;
    blow_up(0.0, &reference.termination)?;
    let f_scale = reference.rows.iter().map(|r| r.l2).fold(0.0, f64::max);
    let member = RunSpec { keep_states: false, ..spec.clone() };

    let rows = eps_list
        .par_iter()
        .map(|&eps| -> Result<EpsRow> {
            let mut f_err: f64 = 0.0;
            let mut rho_sq = Vec::new();
            let mut times = Vec::new();
            let mut index = 0;
            let run = simulate(&RunSpec { mode: member_mode(eps, false), ..member.clone() }, f0.clone(), &mut |row, f| {
                let (t_ref, f_ref) = &reference.states[index];
                debug_assert!((t_ref - row.t).abs() < 1e-12);
                f_err = f_err.max(diff_l2(f, f_ref));
                let rho = f.density();
                let rho_ref = &reference.densities[index].1;
                let cell = f.geometry.x_cell();
                rho_sq.push(rho.iter().zip(rho_ref).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * cell);
                times.push(row.t);
                index += 1;
                Ok(())
            })?;
            blow_up(eps, &run.termination)?;
            Ok(EpsRow {
                eps,
                f_error: f_err,
                rho_error: trapezoid(&times, &rho_sq).sqrt(),
                relative_f_error: if f_scale > 0.0 { f_err / f_scale } else { f_err },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let nonzero: Vec<&EpsRow> = rows.iter().filter(|r| r.eps > 0.0 && r.f_error > 0.0).collect();
    let order = (nonzero.len() >= 3).then(|| {
        let tail = &nonzero[nonzero.len() - 3..];
        let x: Vec<f64> = tail.iter().map(|r| r.eps).collect();
        let y: Vec<f64> = tail.iter().map(|r| r.f_error).collect();
        let (slope, icpt) = loglog_fit(&x, &y);
        let residual = (x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b.ln() - (icpt + slope * a.ln())).powi(2))
            .sum::<f64>()
            / 3.0)
            .sqrt();
        OrderFit { order: slope, residual }
    });
    Ok(EpsStudy { rows, order })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSeries {
    pub eps: f64,
    /// `N_{m,w}(t, f_eps)` at the shared diagnostic times.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapStudy {
    pub m: u32,
    pub weight: f64,
    pub times: Vec<f64>,
    pub series: Vec<BootstrapSeries>,
    /// Largest final value over all members.
    pub max_final: f64,
    /// Members whose key quantity exceeded the bound, with the first time.
    pub exceeded: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

impl BootstrapStudy {
    pub fn final_value(&self, eps: f64) -> Option<f64> {
        self.series.iter().find(|s| s.eps == eps).and_then(|s| s.values.last().copied())
    }

    /// Columns `t, N_eps=...` for every member.
    pub fn columns(&self) -> Vec<String> {
        let mut c = vec!["t".to_string()];
        c.extend(self.series.iter().map(|s| format!("N_eps={}", s.eps)));
        c
    }

    pub fn table(&self) -> Vec<Vec<f64>> {
        self.times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut r = vec![t];
                r.extend(self.series.iter().map(|s| s.values[i]));
                r
            })
            .collect()
    }
}

/// `N_{m,w}(t, f_eps)` for every eps on a shared interval; `eps = 0` runs the
/// limit system.
pub fn bootstrap_monitor(config: &RunConfig, eps_list: &[f64], m: u32, weight: f64, bound: Option<f64>) -> Result<BootstrapStudy> {
    let spec = RunSpec::from_config(config)?;
    bootstrap_with(&spec, config.initial_distribution()?, eps_list, m, weight, bound)
}

pub fn bootstrap_with(
    spec: &RunSpec,
    f0: Distribution,
    eps_list: &[f64],
    m: u32,
    weight: f64,
    bound: Option<f64>,
) -> Result<BootstrapStudy> {
    check_eps_list(eps_list)?;
    if m == 0 {
        return Err(Error::NormOrder("m must be >= 1".into()));
    }
    let d = f0.geometry.d;
    let (m0, _, r0) = regularity_thresholds(d);
    let mut warnings = Vec::new();
    if m as f64 <= m0 {
        warnings.push(format!("m = {m} is at or below the threshold m0 = {m0}"));
    }
    if weight <= r0 {
        warnings.push(format!("weight 2r = {weight} is at or below the threshold r0 = {r0}"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let mut member = spec.clone();
    member.key_quantity = Some((m, weight));
    let key = NormKey { k: m - 1, weight };
    if !member.sobolev.contains(&key) {
        member.sobolev.push(key);
    }
    if !member.rho_orders.contains(&(m as f64)) {
        member.rho_orders.push(m as f64);
    }
    member.keep_states = false;

    let runs = eps_list
        .par_iter()
        .map(|&eps| -> Result<(Vec<f64>, BootstrapSeries)> {
            let run = simulate(&RunSpec { mode: member_mode(eps, true), ..member.clone() }, f0.clone(), &mut |_, _| Ok(()))?;
            blow_up(eps, &run.termination)?;
            let times = run.history.iter().map(|h| h.t).collect();
            let values = run.history.iter().map(|h| h.key_quantity.expect("tracked")).collect::<Vec<_>>();
            if values.iter().any(|v: &f64| !v.is_finite()) {
                return Err(Error::NonFinite { t: run.history.last().map_or(0.0, |h| h.t) });
            }
            Ok((times, BootstrapSeries { eps, values }))
        })
        .collect::<Result<Vec<_>>>()?;
    let times = runs[0].0.clone();
    let series: Vec<BootstrapSeries> = runs.into_iter().map(|(_, s)| s).collect();
    let max_final = series.iter().map(|s| *s.values.last().expect("t = 0 row")).fold(0.0, f64::max);
    let mut exceeded = Vec::new();
    if let Some(r) = bound {
        for s in &series {
            if let Some(i) = s.values.iter().position(|&v| v > r) {
                exceeded.push((s.eps, times[i]));
            }
        }
    }
    Ok(BootstrapStudy { m, weight, times, series, max_final, exceeded, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthProbe {
    /// `(T, N(T) - N(0) - ||rho(0)||_{H^m} T^{1/2})` for every requested `T`.
    pub points: Vec<(f64, f64)>,
    /// Slope of `log |deviation|` against `log T`; `None` when indistinguishable from zero.
    pub slope: Option<f64>,
    pub noise_floor: f64,
}

impl GrowthProbe {
    pub fn indistinguishable(&self) -> bool {
        self.slope.is_none()
    }
}

/// Growth of `N_{m,w}` beyond its frozen-data value over short times.
///
/// With data frozen at `f0`, `N(T) = N(0) + ||rho(0)||_{H^m} T^{1/2}` exactly;
/// the probe fits the power law of the departure from that, so steady states
/// report "indistinguishable from zero". Each `T` must be a multiple of `dt`.
pub fn small_time_growth_probe(config: &RunConfig, t_list: &[f64]) -> Result<GrowthProbe> {
    let spec = RunSpec::from_config(config)?;
    let (m, w) = config.study.as_ref().map_or((5, 6.0), |s| (s.m, s.weight));
    growth_probe_with(&spec, config.initial_distribution()?, t_list, m, w)
}

pub fn growth_probe_with(spec: &RunSpec, f0: Distribution, t_list: &[f64], m: u32, weight: f64) -> Result<GrowthProbe> {
    if t_list.is_empty() || t_list.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument(format!("T list must be positive: {t_list:?}")));
    }
    let dt = spec.dt;
    let steps: Vec<usize> = t_list
        .iter()
        .map(|&t| {
            let n = (t / dt).round();
            if (n * dt - t).abs() > 1e-9 * t {
                Err(Error::InvalidArgument(format!("T = {t} is not a multiple of dt = {dt}")))
            } else {
                Ok(n as usize)
            }
        })
        .collect::<Result<_>>()?;
    let mut probe = spec.clone();
    probe.steps = *steps.iter().max().expect("nonempty");
    probe.cadence = 1;
    probe.key_quantity = None;
    probe.sobolev = vec![NormKey { k: m - 1, weight }];
    probe.rho_orders = vec![m as f64];
    let run = simulate(&probe, f0, &mut |_, _| Ok(()))?;
    blow_up(0.0, &run.termination)?;
    let n0 = key_quantity_n(&run.history[..1], m, weight)?;
    let rho0 = run.history[0].rho(m as f64).expect("requested");
    let mut points = Vec::new();
    for (&t, &n) in t_list.iter().zip(&steps) {
        let nt = key_quantity_n(&run.history[..=n], m, weight)?;
        points.push((t, nt - n0 - rho0 * t.sqrt()));
    }
    let noise_floor = 1e-10 * n0.max(f64::MIN_POSITIVE);
    let above: Vec<(f64, f64)> = points.iter().copied().filter(|(_, d)| d.abs() > noise_floor).collect();
    let slope = (above.len() >= 2).then(|| {
        let x: Vec<f64> = above.iter().map(|p| p.0).collect();
        let y: Vec<f64> = above.iter().map(|p| p.1.abs()).collect();
        loglog_fit(&x, &y).0
    });
    Ok(GrowthProbe { points, slope, noise_floor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::BlowupConfig;
    use crate::grid::GridGeometry;
    use crate::kernel::{Interaction, KernelSpec};

    fn spec(kernel: KernelSpec, steps: usize) -> RunSpec {
        RunSpec {
            kernel,
            mode: FieldMode::Limit,
            dt: 0.05,
            steps,
            cadence: 2,
            sobolev: vec![],
            rho_orders: vec![],
            key_quantity: None,
            blowup: BlowupConfig::default(),
            keep_states: false,
        }
    }

    fn data(g: GridGeometry, amp: f64) -> Distribution {
        let mut v = Vec::new();
        for i in 0..g.nx {
            for j in 0..g.nv {
                let u = g.v(j);
                v.push((1.0 + amp * g.x(i).cos()) * (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt());
            }
        }
        Distribution::new(g, v).unwrap()
    }

    fn geom() -> GridGeometry {
        GridGeometry::new(1, 16, 64, 7.0).unwrap()
    }

    #[test]
    fn eps_list_validation() {
        assert!(check_eps_list(&[]).is_err());
        assert!(check_eps_list(&[0.1, 0.2, 0.0]).is_err());
        assert!(check_eps_list(&[0.1, -0.1]).is_err());
        assert!(check_eps_list(&[0.4, 0.1, 0.0]).is_ok());
    }

    #[test]
    fn self_comparison_is_exact() {
        let k = KernelSpec::riesz(1.0, Interaction::Repulsive).unwrap();
        let s = epsilon_study_with(&spec(k, 6), data(geom(), 0.1), &[0.0]).unwrap();
        assert_eq!(s.rows[0].f_error, 0.0);
        assert_eq!(s.rows[0].rho_error, 0.0);
        assert!(s.order.is_none());
    }

    #[test]
    fn x_uniform_data_has_no_eps_dependence() {
        let k = KernelSpec::riesz(1.0, Interaction::Repulsive).unwrap();
        let s = epsilon_study_with(&spec(k, 6), data(geom(), 0.0), &[0.4, 0.1, 0.0]).unwrap();
        for r in &s.rows {
            assert!(r.f_error < 1e-15 && r.rho_error < 1e-15, "{r:?}");
        }
    }

    #[test]
    fn bootstrap_initial_column_and_zero_data() {
        let k = KernelSpec::riesz(0.5, Interaction::Repulsive).unwrap();
        let f0 = data(geom(), 0.1);
        let b = bootstrap_with(&spec(k.clone(), 4), f0.clone(), &[1.0, 0.1, 0.0], 3, 2.0, None).unwrap();
        let t = crate::spectral::XTransform::new(1, 16);
        let expect = crate::phase_space::weighted_sobolev_norm(&f0, &t, 2, 2.0).unwrap();
        for s in &b.series {
            assert_eq!(s.values[0], expect);
        }
        assert_eq!(b.times, vec![0.0, 0.1, 0.2]);
        assert!(!b.warnings.is_empty());
        let z = bootstrap_with(&spec(k, 4), Distribution::zeros(geom()), &[1.0, 0.0], 3, 2.0, Some(1e-30)).unwrap();
        assert!(z.series.iter().all(|s| s.values.iter().all(|&v| v == 0.0)));
        assert!(z.exceeded.is_empty());
    }

    #[test]
    fn growth_probe_steady_state_is_indistinguishable() {
        let k = KernelSpec::riesz(2.0, Interaction::Repulsive).unwrap();
        let p = growth_probe_with(&spec(k, 0), data(geom(), 0.0), &[0.2, 0.1, 0.05], 2, 2.0).unwrap();
        assert!(p.indistinguishable(), "{p:?}");
        assert!(growth_probe_with(&spec(KernelSpec::free(), 0), data(geom(), 0.0), &[0.07], 2, 2.0).is_err());
    }

    #[test]
    fn growth_probe_free_transport_reports_slope() {
        let p = growth_probe_with(&spec(KernelSpec::free(), 0), data(geom(), 0.2), &[0.4, 0.2, 0.1, 0.05], 2, 2.0).unwrap();
        let s = p.slope.expect("phase mixing moves the norms");
        assert!(s.is_finite());
    }
}
