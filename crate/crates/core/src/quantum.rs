//! Polarization-entangled photon pair source with lossy, noisy detectors.
//!
//! The source emits `(|HV> + r|VH>)/sqrt(1 + r^2)` mixed with white noise of
//! weight `1 - visibility`. Each photon meets a linear polarizer; a
//! transmitted photon is detected with probability `eta`, and every detector
//! independently fires a dark count with probability `p_dark` per trial.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inequality::{CellProbs, CondProbs};
use crate::types::Setting;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantumModel {
    /// Amplitude ratio of the `|VH>` component.
    pub r: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub visibility: f64,
    pub p_dark: f64,
}

impl Default for QuantumModel {
    fn default() -> Self {
        QuantumModel::ch_optimal()
    }
}

impl QuantumModel {
    /// Maximally entangled state, perfect detectors and the analyzer angles
    /// reaching the quantum bound `(sqrt 2 - 1)/2`.
    pub fn ch_optimal() -> Self {
        QuantumModel {
            r: 1.0,
            alpha1: 0.0,
            alpha2: PI / 4.0,
            beta1: 3.0 * PI / 8.0,
            beta2: 5.0 * PI / 8.0,
            eta_a: 1.0,
            eta_b: 1.0,
            visibility: 1.0,
            p_dark: 0.0,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta_a = eta;
        self.eta_b = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::validation(format!("r = {} must lie in [0, 1]", self.r)));
        }
        for (name, v) in [
            ("etaA", self.eta_a),
            ("etaB", self.eta_b),
            ("visibility", self.visibility),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&self.p_dark) {
            return Err(Error::validation(format!("pDark = {} must lie in [0, 1)", self.p_dark)));
        }
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !v.is_finite() {
                return Err(Error::validation(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn alpha(&self, a: Setting) -> f64 {
        match a {
            Setting::First => self.alpha1,
            Setting::Second => self.alpha2,
        }
    }

    pub fn beta(&self, b: Setting) -> f64 {
        match b {
            Setting::First => self.beta1,
            Setting::Second => self.beta2,
        }
    }

    /// Polarizer transmission probabilities `(P_A, P_B, P_AB)` at the given
    /// analyzer angles.
    pub fn transmission(&self, alpha: f64, beta: f64) -> (f64, f64, f64) {
        let norm = 1.0 + self.r * self.r;
        let (sa, ca) = alpha.sin_cos();
        let (sb, cb) = beta.sin_cos();
        let v = self.visibility;
        let amp = ca * sb + self.r * sa * cb;
        let joint = v * amp * amp / norm + (1.0 - v) * 0.25;
        let alice = v * (ca * ca + self.r * self.r * sa * sa) / norm + (1.0 - v) * 0.5;
        let bob = v * (sb * sb + self.r * self.r * cb * cb) / norm + (1.0 - v) * 0.5;
        (alice, bob, joint)
    }

    /// Joint click probabilities for one setting combination.
    pub fn cell_probs(&self, a: Setting, b: Setting) -> CellProbs {
        let (ta, tb, tab) = self.transmission(self.alpha(a), self.beta(b));
        // Polarizer outcomes (transmitted on A, transmitted on B).
        let t11 = tab;
        let t10 = ta - tab;
        let t01 = tb - tab;
        let t00 = 1.0 - ta - tb + tab;

        let d = self.p_dark;
        let click_a = [d, 1.0 - (1.0 - self.eta_a) * (1.0 - d)];
        let click_b = [d, 1.0 - (1.0 - self.eta_b) * (1.0 - d)];

        let mut pp = 0.0;
        let mut pz = 0.0;
        let mut zp = 0.0;
        for (w, ia, ib) in [(t00, 0, 0), (t01, 0, 1), (t10, 1, 0), (t11, 1, 1)] {
            let ca = click_a[ia];
            let cb = click_b[ib];
            pp += w * ca * cb;
            pz += w * ca * (1.0 - cb);
            zp += w * (1.0 - ca) * cb;
        }
        let zz = 1.0 - pp - pz - zp;
        CellProbs::new(pp, pz, zp, zz.max(0.0))
    }

    pub fn cond_probs(&self) -> CondProbs {
        let mut cells = [[CellProbs::default(); 2]; 2];
        for a in Setting::BOTH {
            for b in Setting::BOTH {
                cells[a.idx()][b.idx()] = self.cell_probs(a, b);
            }
        }
        CondProbs::new(cells)
    }
}

/// Outcome probabilities of the quantum model for settings `(a, b)`.
pub fn quantum_trial_probs(model: &QuantumModel, a: Setting, b: Setting) -> Result<CellProbs> {
    model.validate()?;
    Ok(model.cell_probs(a, b))
}
