use vriesz_core::penrose::{penrose_value, penrose_value_with, stability_infimum, PenroseKernel, SearchBox, VelocityProfile};
use vriesz_core::{Complex64, GridGeometry, Interaction, KernelSpec};

fn grid() -> GridGeometry {
    GridGeometry::new(1, 8, 256, 8.0).unwrap()
}

/// For the unit Maxwellian at tau = 0 the time integrand is real and the
/// value reduces to `1 + eta^2 / (1 + eta^2) int_0^inf s e^{-gamma s - (eta s)^2 / 2} ds`.
fn closed_form(gamma: f64, eta: f64) -> f64 {
    let n = 200_000;
    let h = 40.0 / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let s = i as f64 * h;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * s * (-gamma * s - 0.5 * eta * eta * s * s).exp();
    }
    1.0 + eta * eta / (1.0 + eta * eta) * sum * h / 3.0
}

#[test]
fn maxwellian_matches_closed_form_along_real_axis() {
    let m = VelocityProfile::maxwellian(grid(), 1.0).unwrap();
    for (gamma, eta) in [(0.1, 1.0), (0.5, 0.5), (0.05, 2.0), (1.0, -1.5)] {
        let p = penrose_value(&m, gamma, 0.0, &[eta]).unwrap();
        let exact = closed_form(gamma, eta);
        assert!((p.re - exact).abs() < 1e-7 && p.im.abs() < 1e-12, "{gamma} {eta}: {p} vs {exact}");
    }
}

#[test]
fn riesz_multiplier_replaces_the_regularised_weight() {
    let m = VelocityProfile::maxwellian(grid(), 1.0).unwrap();
    let coulomb = PenroseKernel::Multiplier(KernelSpec::riesz(2.0, Interaction::Repulsive).unwrap());
    // 1/|eta|^2 against 1/(1 + |eta|^2): the deviation from 1 scales by 1 + 1/eta^2
    let eta = 0.8;
    let a = penrose_value(&m, 0.2, 0.3, &[eta]).unwrap() - 1.0;
    let b = penrose_value_with(&m, 0.2, 0.3, &[eta], &coulomb).unwrap() - 1.0;
    assert!((b - a * (1.0 + 1.0 / (eta * eta))).norm() < 1e-12 * b.norm());
}

#[test]
fn two_dimensional_maxwellian_is_isotropic() {
    let g = GridGeometry::new(2, 8, 96, 7.0).unwrap();
    let m = VelocityProfile::maxwellian(g, 1.0).unwrap();
    let a = penrose_value(&m, 0.3, 0.4, &[1.0, 0.0]).unwrap();
    let b = penrose_value(&m, 0.3, 0.4, &[0.0, 1.0]).unwrap();
    assert!((a - b).norm() < 1e-12);
    let one_d = penrose_value(&VelocityProfile::maxwellian(GridGeometry::new(1, 8, 96, 7.0).unwrap(), 1.0).unwrap(), 0.3, 0.4, &[1.0]).unwrap();
    assert!((a - one_d).norm() < 1e-9, "{a} vs {one_d}");
}

#[test]
fn maxwellian_infimum_regression() {
    // frozen from the standard search at nv = 256, v_max = 8
    let m = VelocityProfile::maxwellian(grid(), 1.0).unwrap();
    let inf = stability_infimum(&m, &SearchBox::standard()).unwrap();
    assert!((inf.inf_abs - 0.779_842_155_884_8).abs() < 1e-9, "{}", inf.inf_abs);
    assert_eq!(inf.argmin.gamma, 0.01);
    assert!((inf.argmin.tau + 0.6875).abs() < 1e-12);
    assert!((inf.argmin.eta[0] - 0.290_322_580_645_160_9).abs() < 1e-12);
    let p = penrose_value(&m, inf.argmin.gamma, inf.argmin.tau, &inf.argmin.eta).unwrap();
    assert!((p.norm() - inf.inf_abs).abs() < 1e-14);
    assert!(inf.samples.iter().all(|s| s.abs >= inf.inf_abs - 1e-14));
    assert_ne!(p, Complex64::new(1.0, 0.0));
}
