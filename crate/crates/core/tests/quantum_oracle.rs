//! The closed-form photon-pair model against a dense density-matrix
//! computation.

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

use bellstat::inequality::{che_j, estimate_cond_probs, CellProbs};
use bellstat::quantum::{quantum_trial_probs, QuantumModel};
use bellstat::rng::RngSeed;
use bellstat::simulate::{simulate_counts, TrialSource};
use bellstat::{Setting, SettingsProfile};

/// Basis order |HH>, |HV>, |VH>, |VV>.
fn density(r: f64, visibility: f64) -> Matrix4<f64> {
    let psi = Vector4::new(0.0, 1.0, r, 0.0) / (1.0 + r * r).sqrt();
    visibility * psi * psi.transpose() + (1.0 - visibility) * Matrix4::identity() / 4.0
}

fn projector(theta: f64) -> Matrix2<f64> {
    let v = Vector2::new(theta.cos(), theta.sin());
    v * v.transpose()
}

fn oracle(m: &QuantumModel, a: Setting, b: Setting) -> CellProbs {
    let rho = density(m.r, m.visibility);
    let pa = projector(m.alpha(a)).kronecker(&Matrix2::identity());
    let pb = Matrix2::identity().kronecker(&projector(m.beta(b)));
    let t_a = (rho * pa).trace();
    let t_b = (rho * pb).trace();
    let t_ab = (rho * pa * pb).trace();
    // Transmitted photons are detected with efficiency eta; dark counts
    // add clicks independently.
    let (ea, eb, d) = (m.eta_a, m.eta_b, m.p_dark);
    let none_a = (1.0 - ea * t_a) * (1.0 - d);
    let none_b = (1.0 - eb * t_b) * (1.0 - d);
    let none_both = (1.0 - ea * t_a - eb * t_b + ea * eb * t_ab) * (1.0 - d) * (1.0 - d);
    let zz = none_both;
    let pz = none_b - none_both;
    let zp = none_a - none_both;
    CellProbs {
        pp: 1.0 - zz - pz - zp,
        pz,
        zp,
        zz,
    }
}

fn assert_cells_match(m: &QuantumModel) {
    for a in Setting::BOTH {
        for b in Setting::BOTH {
            let got = quantum_trial_probs(m, a, b).unwrap();
            let want = oracle(m, a, b);
            assert_abs_diff_eq!(got.pp, want.pp, epsilon = 1e-12);
            assert_abs_diff_eq!(got.pz, want.pz, epsilon = 1e-12);
            assert_abs_diff_eq!(got.zp, want.zp, epsilon = 1e-12);
            assert_abs_diff_eq!(got.zz, want.zz, epsilon = 1e-12);
        }
    }
}

#[test]
fn partially_entangled_state_matches_dense_oracle() {
    let m = QuantumModel {
        r: 0.5,
        alpha1: 0.0,
        alpha2: 0.3,
        beta1: PI / 8.0,
        beta2: 1.1,
        eta_a: 0.8,
        eta_b: 0.8,
        visibility: 1.0,
        p_dark: 0.0,
    };
    assert_cells_match(&m);
}

#[test]
fn noisy_lossy_models_match_dense_oracle() {
    let mut k = 0.0;
    for r in [0.0, 0.2, 0.7, 1.0] {
        for visibility in [0.0, 0.6, 0.97] {
            for p_dark in [0.0, 1e-4, 0.05] {
                k += 0.37;
                let m = QuantumModel {
                    r,
                    alpha1: k % PI,
                    alpha2: (2.0 * k) % PI,
                    beta1: (3.0 * k + 0.1) % PI,
                    beta2: (5.0 * k + 0.2) % PI,
                    eta_a: 0.9,
                    eta_b: 0.7,
                    visibility,
                    p_dark,
                };
                assert_cells_match(&m);
            }
        }
    }
}

#[test]
fn quantum_bound_at_standard_angles() {
    let j = che_j(&QuantumModel::ch_optimal().cond_probs());
    assert_abs_diff_eq!(j, (2f64.sqrt() - 1.0) / 2.0, epsilon = 1e-12);
}

#[test]
fn violation_grows_with_visibility() {
    let mut last = f64::NEG_INFINITY;
    for k in 0..=20 {
        let m = QuantumModel {
            visibility: k as f64 / 20.0,
            ..QuantumModel::ch_optimal()
        };
        let j = che_j(&m.cond_probs());
        assert!(j >= last - 1e-15, "J dropped at V = {}", m.visibility);
        last = j;
    }
}

#[test]
fn estimates_converge_to_model_probabilities() {
    let model = QuantumModel {
        r: 0.4,
        eta_a: 0.85,
        eta_b: 0.85,
        p_dark: 1e-3,
        ..QuantumModel::ch_optimal()
    };
    let profile = SettingsProfile {
        kappa_a: 0.1,
        kappa_b: -0.05,
        ..Default::default()
    };
    let source = TrialSource::quantum(model, profile);
    let counts = simulate_counts(&source, 2_000_000, RngSeed::new(11, 4)).unwrap();
    let est = estimate_cond_probs(&counts).unwrap();
    for a in Setting::BOTH {
        for b in Setting::BOTH {
            let n = counts.setting_total(a, b) as f64;
            let want = model.cell_probs(a, b);
            let got = est.cell(a, b);
            for (g, w) in [
                (got.pp, want.pp),
                (got.pz, want.pz),
                (got.zp, want.zp),
                (got.zz, want.zz),
            ] {
                let sd = (w * (1.0 - w) / n).sqrt().max(1e-12);
                assert!((g - w).abs() <= 5.0 * sd, "{a:?}{b:?}: {g} vs {w}");
            }
            // Setting frequencies follow the declared biases.
            let p = profile.p_a(a) * profile.p_b(b);
            let sd = (p * (1.0 - p) / 2e6).sqrt();
            assert!((n / 2e6 - p).abs() <= 5.0 * sd);
        }
    }
}
