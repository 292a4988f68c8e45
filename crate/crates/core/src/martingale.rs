//! Supermartingale analysis of a trial sequence.
//!
//! Every trial contributes an increment whose conditional expectation, given
//! the full history, is non-positive under (epsilon-)local realism. The
//! running sum is observed only at history-measurable stopping times, which
//! lets non-contributing trials be concentrated away, and the final value is
//! turned into a p-value with the Hoeffding-Azuma bound.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::adversary::term_sign;
use crate::error::{Error, Result};
use crate::inequality::{che_j, epsilon_ab, epsilon_pm, estimate_cond_probs, CountsTable};
use crate::types::{PredictabilityMode, Setting, SettingsProfile, TrialRecord};

/// Tolerance on the declared setting probabilities summing to one.
pub const SETTING_SUM_TOL: f64 = 1e-12;

/// Which process is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum IncrementKind {
    /// CH-E increments; a supermartingale under local realism.
    PlainJ,
    /// CH-E increments minus `eps_ab`, for setting communication in a
    /// fraction `eps_ab` of trials.
    ShiftedK { eps_ab: f64 },
    /// Increments of the predictability-adapted CH-E value; `qf` is the
    /// probability that the predictability bounds fail.
    AdaptedJeps { eps_plus: f64, eps_minus: f64, qf: f64 },
}

impl IncrementKind {
    pub fn name(&self) -> &'static str {
        match self {
            IncrementKind::PlainJ => "plain-j",
            IncrementKind::ShiftedK { .. } => "shifted-k",
            IncrementKind::AdaptedJeps { .. } => "adapted-jeps",
        }
    }
}

impl fmt::Display for IncrementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kind names accepted on the command line, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncrementName {
    PlainJ,
    ShiftedK,
    AdaptedJeps,
}

impl FromStr for IncrementName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain-j" | "plain" => Ok(IncrementName::PlainJ),
            "shifted-k" | "shifted" => Ok(IncrementName::ShiftedK),
            "adapted-jeps" | "adapted-je" | "adapted" => Ok(IncrementName::AdaptedJeps),
            other => Err(Error::validation(format!("unknown increment kind `{other}`"))),
        }
    }
}

impl fmt::Display for IncrementName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IncrementName::PlainJ => "plain-j",
            IncrementName::ShiftedK => "shifted-k",
            IncrementName::AdaptedJeps => "adapted-jeps",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementSpec {
    pub kind: IncrementKind,
    /// Declared setting probabilities `p_ij = p(a_i) p(b_j)`, indexed `[i][j]`.
    pub p: [[f64; 2]; 2],
    /// Relative guard applied before building increments: `p11` is scaled by
    /// `1 + guard`, the other three by `1 - guard`.
    pub guard: f64,
}

impl IncrementSpec {
    pub fn new(kind: IncrementKind, p: [[f64; 2]; 2]) -> Result<Self> {
        let spec = IncrementSpec { kind, p, guard: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn plain(p: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(IncrementKind::PlainJ, p)
    }

    pub fn shifted(p: [[f64; 2]; 2], eps_ab: f64) -> Result<Self> {
        Self::new(IncrementKind::ShiftedK { eps_ab }, p)
    }

    pub fn adapted(p: [[f64; 2]; 2], eps_plus: f64, eps_minus: f64, qf: f64) -> Result<Self> {
        Self::new(
            IncrementKind::AdaptedJeps {
                eps_plus,
                eps_minus,
                qf,
            },
            p,
        )
    }

    /// Spec implied by a setting profile: communication-fraction profiles give
    /// the shifted process, predictability profiles the adapted one.
    pub fn from_profile(profile: &SettingsProfile, kind: IncrementName) -> Result<Self> {
        profile.validate()?;
        let p = profile.p_ij();
        match kind {
            IncrementName::PlainJ => Self::plain(p),
            IncrementName::ShiftedK => Self::shifted(p, epsilon_ab(profile.eps_a, profile.eps_b)?),
            IncrementName::AdaptedJeps => {
                if profile.mode == PredictabilityMode::CommunicationFraction {
                    return Err(Error::validation(
                        "adapted increments need an excess-predictability or beyond-half profile",
                    ));
                }
                let (ep, em) = epsilon_pm(profile.eps_a, profile.eps_b)?;
                Self::adapted(p, ep, em, profile.qf)
            }
        }
    }

    pub fn default_name_for(mode: PredictabilityMode) -> IncrementName {
        match mode {
            PredictabilityMode::CommunicationFraction => IncrementName::ShiftedK,
            _ => IncrementName::AdaptedJeps,
        }
    }

    pub fn with_guard(mut self, guard: f64) -> Result<Self> {
        self.guard = guard;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let flat = self.p.iter().flatten();
        if flat.clone().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::validation("setting probabilities must lie in (0, 1)"));
        }
        let sum: f64 = flat.sum();
        if (sum - 1.0).abs() > SETTING_SUM_TOL {
            return Err(Error::validation(format!("setting probabilities sum to {sum}")));
        }
        if !(0.0..1.0).contains(&self.guard) {
            return Err(Error::validation(format!("guard {} must lie in [0, 1)", self.guard)));
        }
        match self.kind {
            IncrementKind::PlainJ => {}
            IncrementKind::ShiftedK { eps_ab } => {
                if !(0.0..=1.0).contains(&eps_ab) {
                    return Err(Error::validation(format!("epsAB = {eps_ab} must lie in [0, 1]")));
                }
            }
            IncrementKind::AdaptedJeps {
                eps_plus,
                eps_minus,
                qf,
            } => {
                if eps_minus >= 1.0 {
                    return Err(Error::DegenerateDenominator { eps_minus });
                }
                if !(eps_minus >= 0.0 && eps_plus >= eps_minus) {
                    return Err(Error::validation("need eps_plus >= eps_minus >= 0"));
                }
                if !(0.0..=1.0).contains(&qf) {
                    return Err(Error::validation(format!("qf = {qf} must lie in [0, 1]")));
                }
            }
        }
        Ok(())
    }

    fn guarded_p(&self) -> [[f64; 2]; 2] {
        let mut p = self.p;
        for (i, row) in p.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x *= if i == 0 && j == 0 {
                    1.0 + self.guard
                } else {
                    1.0 - self.guard
                };
            }
        }
        p
    }

    /// Precomputed increment table.
    pub fn weights(&self) -> Result<Weights> {
        self.validate()?;
        let p = self.guarded_p();
        let (pos_scale, neg_scale, shift) = match self.kind {
            IncrementKind::PlainJ => (1.0, 1.0, 0.0),
            IncrementKind::ShiftedK { eps_ab } => (1.0, 1.0, eps_ab),
            IncrementKind::AdaptedJeps {
                eps_plus,
                eps_minus,
                qf,
            } => (1.0 / (1.0 + eps_plus), 1.0 / (1.0 - eps_minus), qf / (1.0 - eps_minus)),
        };
        let mut value = [[0.0; 2]; 2];
        value[0][0] = pos_scale / p[0][0];
        value[0][1] = -neg_scale / p[0][1];
        value[1][0] = -neg_scale / p[1][0];
        value[1][1] = -neg_scale / p[1][1];
        Ok(Weights { value, shift })
    }
}

/// Increment values of contributing trials plus the per-trial shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Weights {
    /// Value of the contributing event at `[i][j]` (before the shift).
    pub value: [[f64; 2]; 2],
    /// Subtracted from every trial: `eps_ab` for the shifted process,
    /// `qf / (1 - eps_minus)` for the adapted one, zero otherwise.
    pub shift: f64,
}

impl Weights {
    /// Unshifted increment; zero for non-contributing trials.
    #[inline]
    pub fn raw(&self, t: &TrialRecord) -> f64 {
        if term_sign(t.a, t.b, t.alice, t.bob) == 0 {
            0.0
        } else {
            self.value[t.a.idx()][t.b.idx()]
        }
    }

    /// Range of the unshifted increments.
    pub fn range(&self) -> f64 {
        let v = &self.value;
        v[0][0] - v[0][1].min(v[1][0]).min(v[1][1])
    }
}

/// The increment of `trial` for the given process. For the adapted kind the
/// `qf` shift is not included; it is applied by [`analyze`].
pub fn increment(trial: &TrialRecord, spec: &IncrementSpec) -> Result<f64> {
    let w = spec.weights()?;
    let raw = w.raw(trial);
    Ok(match spec.kind {
        IncrementKind::ShiftedK { eps_ab } => raw - eps_ab,
        _ => raw,
    })
}

/// Range of the single-trial increments.
pub fn range(spec: &IncrementSpec) -> Result<f64> {
    Ok(spec.weights()?.range())
}

/// Streak length `floor(1/shift)`, or unbounded when there is no shift.
pub fn default_streak(shift: f64) -> u64 {
    if shift > 0.0 {
        (1.0 / shift).floor() as u64
    } else {
        u64::MAX
    }
}

/// Online version of the stopping rule.
///
/// A trial is a stopping time if its increment differs from `-shift`, or if
/// it equals `-shift` and exactly `streak` such values have occurred since
/// the previous stop.
#[derive(Debug, Clone)]
pub struct StopRule {
    streak: u64,
    run: u64,
}

impl StopRule {
    pub fn new(streak: u64) -> Self {
        StopRule { streak, run: 0 }
    }

    /// Feeds one trial; returns whether it is a stopping time.
    #[inline]
    pub fn step(&mut self, contributing: bool) -> bool {
        if contributing || self.run == self.streak {
            self.run = 0;
            true
        } else {
            self.run += 1;
            false
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Concentration {
    /// 1-based positions of the stopping times.
    pub stop_times: Vec<u64>,
    /// Process value at each stopping time.
    pub stopped_values: Vec<f64>,
    /// Number of stopping times.
    pub m: u64,
    /// Position of the last stopping time (0 if none).
    pub m_last: u64,
}

/// Applies the stopping rule to a stream of already shifted increments.
pub fn concentrate(increments: impl IntoIterator<Item = f64>, streak: u64, shift: f64) -> Concentration {
    let mut rule = StopRule::new(streak);
    let mut z = 0.0;
    let mut out = Concentration {
        stop_times: Vec::new(),
        stopped_values: Vec::new(),
        m: 0,
        m_last: 0,
    };
    for (n, k) in (1u64..).zip(increments) {
        z += k;
        if rule.step(k != -shift) {
            out.stop_times.push(n);
            out.stopped_values.push(z);
            out.m += 1;
            out.m_last = n;
        }
    }
    out
}

/// Hoeffding-Azuma tail bound `exp(-2 c^2 / r^2)` with `c = z / sqrt(length)`.
/// Non-positive `z` carries no evidence and gives 1.
pub fn hoeffding_pvalue(z: f64, length: u64, range: f64) -> Result<f64> {
    if length == 0 {
        return Err(Error::validation("process length must be at least 1"));
    }
    if !(range > 0.0) {
        return Err(Error::validation(format!("range {range} must be positive")));
    }
    Ok(pvalue_for_c(z / (length as f64).sqrt(), range))
}

#[inline]
fn pvalue_for_c(c: f64, range: f64) -> f64 {
    if c > 0.0 {
        (-2.0 * c * c / (range * range)).exp().min(1.0)
    } else {
        1.0
    }
}

/// Share of non-zero increments.
pub fn contributing_fraction(increments: impl IntoIterator<Item = f64>) -> Result<f64> {
    let (mut n, mut k) = (0u64, 0u64);
    for x in increments {
        n += 1;
        if x != 0.0 {
            k += 1;
        }
    }
    if n == 0 {
        return Err(Error::validation("contributing fraction of an empty stream"));
    }
    Ok(k as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessSummary {
    pub kind: IncrementKind,
    /// Trials read.
    pub n: u64,
    /// Number of stopping times.
    pub m: u64,
    /// Position of the last stopping time.
    pub m_last: u64,
    /// Shifted process value at the last stopping time.
    pub z: f64,
    /// Range of the concentrated process.
    pub r: f64,
    /// Streak length used (capped at `n`).
    pub s: u64,
    /// Per-trial shift subtracted from the raw increments.
    pub shift: f64,
    pub c: f64,
    pub p_value: f64,
    /// Share of contributing trials.
    pub f: f64,
    /// Declared `p_ij`.
    pub p_ij: [[f64; 2]; 2],
    /// Observed setting frequencies, for comparison with the declared values.
    pub empirical_p_ij: [[f64; 2]; 2],
    /// Plug-in CH-E estimate; absent if a setting combination never occurred.
    pub j_estimate: Option<f64>,
}

/// Single ordered pass over a trial stream.
#[derive(Debug, Clone)]
pub struct Analyzer {
    spec: IncrementSpec,
    weights: Weights,
    streak: u64,
    rule: StopRule,
    n: u64,
    last_index: u64,
    contributing: u64,
    /// Unshifted running sum.
    z_raw: f64,
    z_stop: f64,
    m: u64,
    m_last: u64,
    counts: CountsTable,
}

impl Analyzer {
    /// `streak` applies to the shifted processes; without a shift the
    /// adapted process simply skips non-contributing trials.
    pub fn new(spec: IncrementSpec, streak: u64) -> Result<Self> {
        let weights = spec.weights()?;
        let streak = match spec.kind {
            IncrementKind::AdaptedJeps { .. } if weights.shift == 0.0 => u64::MAX,
            _ => streak,
        };
        Ok(Analyzer {
            spec,
            weights,
            streak,
            rule: StopRule::new(streak),
            n: 0,
            last_index: 0,
            contributing: 0,
            z_raw: 0.0,
            z_stop: 0.0,
            m: 0,
            m_last: 0,
            counts: CountsTable::new(),
        })
    }

    pub fn push(&mut self, t: &TrialRecord) -> Result<()> {
        if t.index <= self.last_index {
            return Err(Error::OutOfOrder {
                previous: self.last_index,
                index: t.index,
            });
        }
        self.last_index = t.index;
        self.n += 1;
        self.counts.record(t);
        let contributing = term_sign(t.a, t.b, t.alice, t.bob) != 0;
        if contributing {
            self.contributing += 1;
            self.z_raw += self.weights.value[t.a.idx()][t.b.idx()];
        }
        if self.rule.step(contributing) {
            self.m += 1;
            self.m_last = self.n;
            self.z_stop = self.z_raw - self.n as f64 * self.weights.shift;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<ProcessSummary> {
        if self.n == 0 {
            return Err(Error::validation("no trials to analyze"));
        }
        let s = self.streak.min(self.n);
        let r = self.weights.range() + s as f64 * self.weights.shift;
        let (c, p_value) = if self.m == 0 {
            (0.0, 1.0)
        } else {
            let c = self.z_stop / (self.m as f64).sqrt();
            (c, pvalue_for_c(c, r))
        };
        let mut empirical = [[0.0; 2]; 2];
        for a in Setting::BOTH {
            for b in Setting::BOTH {
                empirical[a.idx()][b.idx()] = self.counts.setting_total(a, b) as f64 / self.n as f64;
            }
        }
        Ok(ProcessSummary {
            kind: self.spec.kind,
            n: self.n,
            m: self.m,
            m_last: self.m_last,
            z: self.z_stop,
            r,
            s,
            shift: self.weights.shift,
            c,
            p_value,
            f: self.contributing as f64 / self.n as f64,
            p_ij: self.spec.p,
            empirical_p_ij: empirical,
            j_estimate: estimate_cond_probs(&self.counts).ok().map(|p| che_j(&p)),
        })
    }
}

/// Analyzes a trial stream in one ordered pass.
pub fn analyze<I, T>(trials: I, spec: &IncrementSpec, streak: u64) -> Result<ProcessSummary>
where
    I: IntoIterator<Item = T>,
    T: std::borrow::Borrow<TrialRecord>,
{
    let mut a = Analyzer::new(*spec, streak)?;
    for t in trials {
        a.push(t.borrow())?;
    }
    a.finish()
}

/// Same as [`analyze`] for fallible streams such as a trial file.
pub fn analyze_fallible(
    trials: impl IntoIterator<Item = Result<TrialRecord>>,
    spec: &IncrementSpec,
    streak: u64,
) -> Result<ProcessSummary> {
    let mut a = Analyzer::new(*spec, streak)?;
    for t in trials {
        a.push(&t?)?;
    }
    a.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuntimePlan {
    /// Seconds to reach significance `c` on the full process.
    pub t_plain: f64,
    /// Seconds on the concentrated process.
    pub t_doob: f64,
    /// `c` scaled by the range inflation of the concentrated process.
    pub c_adjusted: f64,
}

/// Expected run time to reach `Z >= c sqrt(length)`.
///
/// `rate` is in trials per second, `j` the expected CH-E value, `f` the
/// contributing fraction, `streak` the streak length and `range` the
/// single-trial increment range.
pub fn plan_runtime(rate: f64, j: f64, eps_ab: f64, c: f64, f: f64, streak: u64, range: f64) -> Result<RuntimePlan> {
    if !(rate > 0.0) || !(f > 0.0 && f <= 1.0) || !(c > 0.0) || !(range > 0.0) {
        return Err(Error::validation("need rate > 0, 0 < f <= 1, c > 0 and range > 0"));
    }
    if !(0.0..=1.0).contains(&eps_ab) {
        return Err(Error::validation(format!("epsAB = {eps_ab} must lie in [0, 1]")));
    }
    if !(j > eps_ab) {
        return Err(Error::Infeasible(format!(
            "expected J = {j} does not exceed the adapted bound epsAB = {eps_ab}"
        )));
    }
    let margin = (j - eps_ab).powi(2);
    let t_plain = c * c / (rate * margin);
    let c_adjusted = c * (range + streak as f64 * eps_ab) / range;
    let t_doob = c_adjusted * c_adjusted * f / (rate * margin);
    Ok(RuntimePlan {
        t_plain,
        t_doob,
        c_adjusted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BonferroniDecision {
    pub reject: bool,
    /// Per-test threshold `alpha / 2`.
    pub threshold: f64,
}

/// Combined test of local realism and the bounded setting estimates, each at
/// level `alpha / 2`; thresholds are inclusive.
pub fn bonferroni(p_process: f64, p_epsilon_estimates: f64, alpha: f64) -> Result<BonferroniDecision> {
    for (name, v) in [
        ("p_process", p_process),
        ("p_epsilon", p_epsilon_estimates),
        ("alpha", alpha),
    ] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::validation(format!("{name} = {v} must lie in (0, 1]")));
        }
    }
    let threshold = alpha / 2.0;
    Ok(BonferroniDecision {
        reject: p_process <= threshold && p_epsilon_estimates <= threshold,
        threshold,
    })
}
