//! Shared vocabulary: settings, outcomes, trial records and the setting
//! generator profile.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the two analyzer settings available to a party.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    First,
    Second,
}

impl Setting {
    pub const BOTH: [Setting; 2] = [Setting::First, Setting::Second];

    /// Zero-based index, convenient for table lookups.
    #[inline]
    pub fn idx(self) -> usize {
        match self {
            Setting::First => 0,
            Setting::Second => 1,
        }
    }

    #[inline]
    pub fn from_idx(idx: usize) -> Setting {
        if idx == 0 {
            Setting::First
        } else {
            Setting::Second
        }
    }

    /// The `1`/`2` label used in trial files.
    pub fn label(self) -> u8 {
        self.idx() as u8 + 1
    }
}

/// Fate of a photon in the one-detector-per-side arrangement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Undetected,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Undetected];

    #[inline]
    pub fn idx(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Undetected => 1,
        }
    }

    #[inline]
    pub fn from_idx(idx: usize) -> Outcome {
        if idx == 0 {
            Outcome::Plus
        } else {
            Outcome::Undetected
        }
    }

    #[inline]
    pub fn from_click(click: bool) -> Outcome {
        if click {
            Outcome::Plus
        } else {
            Outcome::Undetected
        }
    }

    #[inline]
    pub fn is_plus(self) -> bool {
        self == Outcome::Plus
    }
}

/// Fate in the two-detector form: ordinary beam, extraordinary beam or lost.
/// Only the Eberhard count forms distinguish `Minus` from `Zero`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fate {
    Plus,
    Minus,
    Zero,
}

impl Fate {
    pub const ALL: [Fate; 3] = [Fate::Plus, Fate::Minus, Fate::Zero];

    #[inline]
    pub fn idx(self) -> usize {
        match self {
            Fate::Plus => 0,
            Fate::Minus => 1,
            Fate::Zero => 2,
        }
    }

    /// Blocking the extraordinary beam turns every `Minus` into `Zero`.
    pub fn blocked(self) -> Outcome {
        match self {
            Fate::Plus => Outcome::Plus,
            Fate::Minus | Fate::Zero => Outcome::Undetected,
        }
    }
}

/// One measurement trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialRecord {
    /// 1-based trial counter.
    pub index: u64,
    pub a: Setting,
    pub b: Setting,
    pub alice: Outcome,
    pub bob: Outcome,
}

/// How the excess predictability parameters are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictabilityMode {
    /// A fraction of trials has a setting communicated to the far side.
    CommunicationFraction,
    /// Every trial's setting probabilities may be skewed by (1 ± eps) around
    /// the biased a-priori probabilities.
    ExcessPredictability,
    /// As above, but around 1/2; the biases are then folded into eps.
    BeyondHalf,
}

impl PredictabilityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictabilityMode::CommunicationFraction => "communication-fraction",
            PredictabilityMode::ExcessPredictability => "excess-predictability",
            PredictabilityMode::BeyondHalf => "beyond-half",
        }
    }
}

impl fmt::Display for PredictabilityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictabilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "communication-fraction" | "communication" => Ok(PredictabilityMode::CommunicationFraction),
            "excess-predictability" | "excess" => Ok(PredictabilityMode::ExcessPredictability),
            "beyond-half" => Ok(PredictabilityMode::BeyondHalf),
            other => Err(Error::validation(format!("unknown predictability mode `{other}`"))),
        }
    }
}

/// Declared characterization of the two setting generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingsProfile {
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub eps_a: f64,
    pub eps_b: f64,
    pub mode: PredictabilityMode,
    /// Probability that the declared predictability bounds fail.
    pub qf: f64,
}

impl Default for SettingsProfile {
    fn default() -> Self {
        SettingsProfile {
            kappa_a: 0.0,
            kappa_b: 0.0,
            eps_a: 0.0,
            eps_b: 0.0,
            mode: PredictabilityMode::CommunicationFraction,
            qf: 0.0,
        }
    }
}

impl SettingsProfile {
    pub fn unbiased(mode: PredictabilityMode, eps_a: f64, eps_b: f64) -> Self {
        SettingsProfile {
            eps_a,
            eps_b,
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("kappaA", self.kappa_a), ("kappaB", self.kappa_b)] {
            if !(k > -0.5 && k < 0.5) {
                return Err(Error::validation(format!("{name} = {k} must lie in (-1/2, 1/2)")));
            }
        }
        for (name, e) in [("epsA", self.eps_a), ("epsB", self.eps_b), ("qf", self.qf)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::validation(format!("{name} = {e} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// A-priori probability of Alice's setting.
    pub fn p_a(&self, a: Setting) -> f64 {
        if self.mode == PredictabilityMode::BeyondHalf {
            return 0.5;
        }
        match a {
            Setting::First => 0.5 - self.kappa_a,
            Setting::Second => 0.5 + self.kappa_a,
        }
    }

    pub fn p_b(&self, b: Setting) -> f64 {
        if self.mode == PredictabilityMode::BeyondHalf {
            return 0.5;
        }
        match b {
            Setting::First => 0.5 - self.kappa_b,
            Setting::Second => 0.5 + self.kappa_b,
        }
    }

    /// Product probabilities `p(a_i) p(b_j)` indexed `[i][j]`.
    pub fn p_ij(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for a in Setting::BOTH {
            for b in Setting::BOTH {
                out[a.idx()][b.idx()] = self.p_a(a) * self.p_b(b);
            }
        }
        out
    }

    /// Probabilities the simulators draw settings from. Unlike [`p_a`](Self::p_a)
    /// these keep the declared biases in beyond-half mode.
    pub fn draw_p_a1(&self) -> f64 {
        0.5 - self.kappa_a
    }

    pub fn draw_p_b1(&self) -> f64 {
        0.5 - self.kappa_b
    }
}
