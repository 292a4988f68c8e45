//! Local-realist adversaries: deterministic strategies, a history-dependent
//! gambler, setting-communication attacks and setting-predictability skews.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inequality::{che_j, epsilon_ab, CellProbs, CondProbs, ThreeOutcomeProbs};
use crate::types::{Fate, Outcome, PredictabilityMode, Setting, SettingsProfile};

/// One of the sixteen deterministic local strategies.
///
/// Bit 0: Alice clicks at `a1`; bit 1: at `a2`; bit 2: Bob clicks at `b1`;
/// bit 3: at `b2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Strategy(u8);

impl Strategy {
    /// Nobody ever clicks.
    pub const SILENT: Strategy = Strategy(0);
    /// Both parties always click.
    pub const ALWAYS: Strategy = Strategy(15);

    pub fn new(id: u8) -> Result<Self> {
        if id < 16 {
            Ok(Strategy(id))
        } else {
            Err(Error::validation(format!("strategy id {id} must be below 16")))
        }
    }

    pub fn all() -> impl Iterator<Item = Strategy> {
        (0..16).map(Strategy)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn alice(self, a: Setting) -> Outcome {
        Outcome::from_click(self.0 >> a.idx() & 1 == 1)
    }

    #[inline]
    pub fn bob(self, b: Setting) -> Outcome {
        Outcome::from_click(self.0 >> (2 + b.idx()) & 1 == 1)
    }

    pub fn cond_probs(self) -> CondProbs {
        let mut cells = [[CellProbs::default(); 2]; 2];
        for a in Setting::BOTH {
            for b in Setting::BOTH {
                let mut c = CellProbs::default();
                match (self.alice(a), self.bob(b)) {
                    (Outcome::Plus, Outcome::Plus) => c.pp = 1.0,
                    (Outcome::Plus, Outcome::Undetected) => c.pz = 1.0,
                    (Outcome::Undetected, Outcome::Plus) => c.zp = 1.0,
                    (Outcome::Undetected, Outcome::Undetected) => c.zz = 1.0,
                }
                cells[a.idx()][b.idx()] = c;
            }
        }
        CondProbs::new(cells)
    }

    /// CH-E value of the strategy.
    pub fn j(self) -> f64 {
        che_j(&self.cond_probs())
    }

    /// `+1`, `-1` or `0`: how the outcome at `(a, b)` enters the CH-E value.
    pub fn contribution(self, a: Setting, b: Setting) -> i8 {
        term_sign(a, b, self.alice(a), self.bob(b))
    }
}

/// Sign with which the event `(a, b, A, B)` enters the CH-E combination.
#[inline]
pub fn term_sign(a: Setting, b: Setting, alice: Outcome, bob: Outcome) -> i8 {
    use Outcome::{Plus, Undetected};
    use Setting::{First, Second};
    match (a, b, alice, bob) {
        (First, First, Plus, Plus) => 1,
        (First, Second, Plus, Undetected) => -1,
        (Second, First, Undetected, Plus) => -1,
        (Second, Second, Plus, Plus) => -1,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LhvMaximum {
    pub max_j: f64,
    pub argmax: Strategy,
}

/// Exhaustive maximum of the CH-E value over all deterministic strategies.
pub fn lhv_max_j() -> LhvMaximum {
    let mut best = LhvMaximum {
        max_j: f64::NEG_INFINITY,
        argmax: Strategy::SILENT,
    };
    for s in Strategy::all() {
        let j = s.j();
        if j > best.max_j {
            best = LhvMaximum { max_j: j, argmax: s };
        }
    }
    best
}

/// Deterministic three-outcome assignment: `alice[i]` is the fate at `a_i`,
/// `bob[j]` the fate at `b_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FateAssignment {
    pub alice: [Fate; 2],
    pub bob: [Fate; 2],
}

impl FateAssignment {
    /// All 81 assignments.
    pub fn all() -> impl Iterator<Item = FateAssignment> {
        (0..81usize).map(|k| {
            let f = |d: usize| Fate::ALL[(k / 3usize.pow(d as u32)) % 3];
            FateAssignment {
                alice: [f(0), f(1)],
                bob: [f(2), f(3)],
            }
        })
    }

    pub fn probs(&self) -> ThreeOutcomeProbs {
        let mut out = ThreeOutcomeProbs::default();
        for a in Setting::BOTH {
            for b in Setting::BOTH {
                out.p[a.idx()][b.idx()][self.alice[a.idx()].idx()][self.bob[b.idx()].idx()] = 1.0;
            }
        }
        out
    }
}

/// Where communicated trials fall in the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Each trial independently with probability `eps_AB`.
    #[default]
    Bernoulli,
    /// The first `ceil(eps_AB N)` trials.
    LeadingBlock,
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bernoulli" => Ok(Placement::Bernoulli),
            "leading-block" | "leading" => Ok(Placement::LeadingBlock),
            other => Err(Error::validation(format!("unknown placement `{other}`"))),
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::Bernoulli => "bernoulli",
            Placement::LeadingBlock => "leading-block",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AdversaryKind {
    DeterministicLhv {
        strategy: Strategy,
    },
    /// Plays the always-click strategy until the running CH-E process reaches
    /// `target_c * sqrt(N)`, then goes silent to lock in the excursion.
    MemoryLhv {
        target_c: f64,
    },
    CommPure {
        placement: Placement,
    },
    CommPrbox {
        placement: Placement,
    },
    PredictabilitySkew,
}

impl AdversaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryKind::DeterministicLhv { .. } => "deterministic-lhv",
            AdversaryKind::MemoryLhv { .. } => "memory-lhv",
            AdversaryKind::CommPure { .. } => "comm-pure",
            AdversaryKind::CommPrbox { .. } => "comm-prbox",
            AdversaryKind::PredictabilitySkew => "predictability-skew",
        }
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdversaryConfig {
    pub kind: AdversaryKind,
    pub profile: SettingsProfile,
    /// Strategy played outside communicated trials, or by the skewed hidden
    /// state of the predictability adversary.
    pub base_strategy: Option<Strategy>,
}

impl AdversaryConfig {
    pub fn new(kind: AdversaryKind, profile: SettingsProfile) -> Self {
        AdversaryConfig {
            kind,
            profile,
            base_strategy: None,
        }
    }

    pub fn with_base(mut self, s: Strategy) -> Self {
        self.base_strategy = Some(s);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        match self.kind {
            AdversaryKind::CommPure { .. } | AdversaryKind::CommPrbox { .. } => {
                if self.profile.mode != PredictabilityMode::CommunicationFraction {
                    return Err(Error::validation(format!(
                        "{} requires the communication-fraction mode",
                        self.kind
                    )));
                }
            }
            AdversaryKind::PredictabilitySkew => {
                if self.profile.mode == PredictabilityMode::CommunicationFraction {
                    return Err(Error::validation(
                        "predictability-skew requires an excess-predictability or beyond-half mode",
                    ));
                }
                predictability_states(&self.profile, self.base_strategy.unwrap_or(Strategy::ALWAYS))?;
            }
            AdversaryKind::MemoryLhv { target_c } => {
                if !(target_c >= 0.0 && target_c.is_finite()) {
                    return Err(Error::validation("memory target c must be finite and non-negative"));
                }
            }
            AdversaryKind::DeterministicLhv { .. } => {}
        }
        Ok(())
    }

    /// Fraction of communicated trials (zero outside scenario (i)).
    pub fn eps_ab(&self) -> Result<f64> {
        epsilon_ab(self.profile.eps_a, self.profile.eps_b)
    }
}

/// Communication adversary reaching `J = eps_AB` by signaling.
pub fn comm_pure_adversary(profile: SettingsProfile, placement: Placement) -> Result<AdversaryConfig> {
    let c = AdversaryConfig::new(AdversaryKind::CommPure { placement }, profile);
    c.validate()?;
    Ok(c)
}

/// Communication adversary simulating a PR box: `J = eps_AB / 2` without
/// signaling.
pub fn comm_prbox_adversary(profile: SettingsProfile, placement: Placement) -> Result<AdversaryConfig> {
    let c = AdversaryConfig::new(AdversaryKind::CommPrbox { placement }, profile);
    c.validate()?;
    Ok(c)
}

/// Adversary exploiting setting predictability, playing `base` in the
/// skewed hidden state.
pub fn predictability_adversary(profile: SettingsProfile, base: Strategy) -> Result<AdversaryConfig> {
    let c = AdversaryConfig::new(AdversaryKind::PredictabilitySkew, profile).with_base(base);
    c.validate()?;
    Ok(c)
}

/// One value of the hidden variable of the predictability adversary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HiddenState {
    pub weight: f64,
    pub strategy: Strategy,
    /// `p(a1 | mu)`.
    pub p_a1: f64,
    /// `p(b1 | mu)`.
    pub p_b1: f64,
}

impl HiddenState {
    pub fn p_a(&self, a: Setting) -> f64 {
        match a {
            Setting::First => self.p_a1,
            Setting::Second => 1.0 - self.p_a1,
        }
    }

    pub fn p_b(&self, b: Setting) -> f64 {
        match b {
            Setting::First => self.p_b1,
            Setting::Second => 1.0 - self.p_b1,
        }
    }
}

/// Hidden states of the predictability adversary.
///
/// With probability 1/2 the base strategy is played while both setting
/// distributions are pushed to a corner of the allowed box, the corner
/// chosen to maximize the base strategy's raw CH-E contribution. Otherwise
/// the silent strategy is played with the opposite skew, which restores the
/// declared marginals.
pub fn predictability_states(profile: &SettingsProfile, base: Strategy) -> Result<[HiddenState; 2]> {
    for (name, e) in [("epsA", profile.eps_a), ("epsB", profile.eps_b)] {
        if !(0.0..1.0).contains(&e) {
            return Err(Error::validation(format!(
                "{name} = {e} must lie in [0, 1) for the predictability adversary"
            )));
        }
    }
    let (pa1, pb1) = match profile.mode {
        PredictabilityMode::BeyondHalf => (0.5, 0.5),
        _ => (profile.p_a(Setting::First), profile.p_b(Setting::First)),
    };
    let da = profile.eps_a * pa1.min(1.0 - pa1);
    let db = profile.eps_b * pb1.min(1.0 - pb1);

    let mut best: Option<(f64, f64, f64)> = None;
    for sa in [1.0, -1.0] {
        for sb in [1.0, -1.0] {
            let qa = pa1 + sa * da;
            let qb = pb1 + sb * db;
            let mut gain = 0.0;
            for a in Setting::BOTH {
                for b in Setting::BOTH {
                    let pa = if a == Setting::First { qa } else { 1.0 - qa };
                    let pb = if b == Setting::First { qb } else { 1.0 - qb };
                    let base_p = profile.p_a(a) * profile.p_b(b);
                    gain += f64::from(base.contribution(a, b)) * pa * pb / base_p;
                }
            }
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, qa, qb));
            }
        }
    }
    let (_, qa, qb) = best.expect("four corners visited");
    let states = [
        HiddenState {
            weight: 0.5,
            strategy: base,
            p_a1: qa,
            p_b1: qb,
        },
        HiddenState {
            weight: 0.5,
            strategy: Strategy::SILENT,
            p_a1: 2.0 * pa1 - qa,
            p_b1: 2.0 * pb1 - qb,
        },
    ];
    for s in &states {
        if !(s.p_a1 > 0.0 && s.p_a1 < 1.0 && s.p_b1 > 0.0 && s.p_b1 < 1.0) {
            return Err(Error::validation("skewed setting probability leaves (0, 1)"));
        }
    }
    Ok(states)
}
