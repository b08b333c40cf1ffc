//! Linear Landau damping against the root of the kinetic dispersion relation.

use std::f64::consts::PI;

use vriesz_core::config::BlowupConfig;
use vriesz_core::{simulate, Complex64, Distribution, FieldMode, GridGeometry, Interaction, KernelSpec, RunSpec};

/// `w(z) = sum_n (i z)^n / Gamma(n/2 + 1)`, so that `Z(z) = i sqrt(pi) w(z)`.
fn faddeeva(z: Complex64) -> Complex64 {
    let iz = Complex64::new(0.0, 1.0) * z;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    // Gamma(n/2 + 1) for even and odd n by separate recurrences
    let (mut g_even, mut g_odd) = (1.0, PI.sqrt() / 2.0);
    for n in 0..200 {
        let gamma = if n % 2 == 0 { g_even } else { g_odd };
        sum += power / gamma;
        power *= iz;
        if n % 2 == 0 {
            g_even *= (n / 2 + 1) as f64;
        } else {
            g_odd *= n as f64 / 2.0 + 1.0;
        }
    }
    sum
}

/// Root `omega` of `1 + (1 + zeta Z(zeta)) / (k vth)^2` with `zeta = omega / (sqrt 2 k vth)`.
fn landau_root(k: f64, vth: f64, guess: Complex64) -> Complex64 {
    let scale = 2f64.sqrt() * k * vth;
    let disp = |w: Complex64| {
        let zeta = w / scale;
        let z = Complex64::new(0.0, PI.sqrt()) * faddeeva(zeta);
        1.0 + (1.0 + zeta * z) / (k * k * vth * vth)
    };
    let mut w = guess;
    for _ in 0..50 {
        let h = 1e-7;
        let d = (disp(w + h) - disp(w - h)) / (2.0 * h);
        let step = disp(w) / d;
        w -= step;
        if step.norm() < 1e-14 {
            break;
        }
    }
    w
}

#[test]
fn dispersion_oracle_matches_the_tabulated_root() {
    // k lambda_D = 0.5: omega = 1.4156, gamma = -0.1533
    let w = landau_root(0.5, 1.0, Complex64::new(1.4, -0.15));
    assert!((w.re - 1.4156).abs() < 1e-4, "{w}");
    assert!((w.im + 0.1533).abs() < 1e-4, "{w}");
    // the same root in units where the thermal speed is 0.5 and k = 1
    let v = landau_root(1.0, 0.5, Complex64::new(1.4, -0.15));
    assert!((v - w).norm() < 1e-10);
}

#[test]
fn field_energy_decays_at_the_landau_rate() {
    let (k, vth, amp) = (1.0, 0.5, 0.01);
    let g = GridGeometry::new(1, 32, 256, 4.0).unwrap();
    let mut values = Vec::with_capacity(g.len());
    for i in 0..g.nx {
        for j in 0..g.nv {
            let v = g.v(j);
            values.push((1.0 + amp * (k * g.x(i)).cos()) * (-v * v / (2.0 * vth * vth)).exp() / ((2.0 * PI).sqrt() * vth));
        }
    }
    let f0 = Distribution::new(g, values).unwrap();
    let spec = RunSpec {
        kernel: KernelSpec::riesz(2.0, Interaction::Repulsive).unwrap(),
        mode: FieldMode::Limit,
        dt: 0.05,
        steps: 400,
        cadence: 1,
        sobolev: vec![],
        rho_orders: vec![],
        key_quantity: None,
        blowup: BlowupConfig::default(),
        keep_states: false,
    };
    let out = simulate(&spec, f0, &mut |_, _| Ok(())).unwrap();
    let series: Vec<(f64, f64)> = out.rows.iter().map(|r| (r.t, r.energy_potential)).collect();

    let peaks: Vec<(f64, f64)> = series
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 > w[2].1)
        .map(|w| (w[1].0, w[1].1.ln()))
        .collect();
    assert!(peaks.len() >= 8, "{} peaks", peaks.len());
    let n = peaks.len() as f64;
    let mt = peaks.iter().map(|p| p.0).sum::<f64>() / n;
    let me = peaks.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = peaks.iter().map(|p| (p.0 - mt) * (p.1 - me)).sum::<f64>()
        / peaks.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    // energy ~ E^2 oscillates at 2 omega
    let omega = PI * (n - 1.0) / (peaks[peaks.len() - 1].0 - peaks[0].0);

    let root = landau_root(k, vth, Complex64::new(1.4, -0.15));
    let gamma = -slope / 2.0;
    assert!((gamma / -root.im - 1.0).abs() < 0.02, "gamma {gamma} vs {}", -root.im);
    assert!((omega / root.re - 1.0).abs() < 0.02, "omega {omega} vs {}", root.re);
}
