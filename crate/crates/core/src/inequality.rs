//! Counts and probability bookkeeping, and the Eberhard, CH-E and CH
//! expressions evaluated on them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{Fate, Outcome, PredictabilityMode, Setting, SettingsProfile, TrialRecord};

/// Normalization tolerance for model-generated probability tables.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Two-outcome counts `n_AB(a_i b_j)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CountsTable {
    /// Indexed `[i][j][A][B]`.
    n: [[[[u64; 2]; 2]; 2]; 2],
}

impl CountsTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a table from raw cells, indexed `[i][j][A][B]`.
    pub fn from_cells(n: [[[[u64; 2]; 2]; 2]; 2]) -> Self {
        CountsTable { n }
    }

    #[inline]
    pub fn record(&mut self, t: &TrialRecord) {
        self.n[t.a.idx()][t.b.idx()][t.alice.idx()][t.bob.idx()] += 1;
    }

    pub fn from_trials<'a>(trials: impl IntoIterator<Item = &'a TrialRecord>) -> Self {
        let mut table = CountsTable::new();
        for t in trials {
            table.record(t);
        }
        table
    }

    #[inline]
    pub fn get(&self, a: Setting, b: Setting, alice: Outcome, bob: Outcome) -> u64 {
        self.n[a.idx()][b.idx()][alice.idx()][bob.idx()]
    }

    /// `N_ij`, the number of trials with settings `a_i b_j`.
    pub fn setting_total(&self, a: Setting, b: Setting) -> u64 {
        self.n[a.idx()][b.idx()].iter().flatten().sum()
    }

    pub fn total(&self) -> u64 {
        self.n.iter().flatten().flatten().flatten().sum()
    }

    pub fn merge(&mut self, other: &CountsTable) {
        for (x, y) in self
            .n
            .iter_mut()
            .flatten()
            .flatten()
            .flatten()
            .zip(other.n.iter().flatten().flatten().flatten())
        {
            *x += *y;
        }
    }
}

/// Three-outcome counts with the declared per-setting totals `N'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreeOutcomeCounts {
    /// Indexed `[i][j][A][B]` with fates ordered `+, -, 0`.
    pub n: [[[[u64; 3]; 3]; 2]; 2],
    /// Declared totals `N_ij`; must equal the cell sums.
    pub totals: [[u64; 2]; 2],
}

impl ThreeOutcomeCounts {
    /// Table whose totals are taken from the cells themselves.
    pub fn from_cells(n: [[[[u64; 3]; 3]; 2]; 2]) -> Self {
        let mut totals = [[0; 2]; 2];
        for (i, row) in n.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                totals[i][j] = cell.iter().flatten().sum();
            }
        }
        ThreeOutcomeCounts { n, totals }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..2 {
            for j in 0..2 {
                let sum: u64 = self.n[i][j].iter().flatten().sum();
                if sum != self.totals[i][j] {
                    return Err(Error::validation(format!(
                        "counts for a{}b{} sum to {sum}, declared total is {}",
                        i + 1,
                        j + 1,
                        self.totals[i][j]
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, a: Setting, b: Setting, alice: Fate, bob: Fate) -> u64 {
        self.n[a.idx()][b.idx()][alice.idx()][bob.idx()]
    }
}

impl From<&CountsTable> for ThreeOutcomeCounts {
    fn from(c: &CountsTable) -> Self {
        let mut n = [[[[0u64; 3]; 3]; 2]; 2];
        for a in Setting::BOTH {
            for b in Setting::BOTH {
                for x in Outcome::BOTH {
                    for y in Outcome::BOTH {
                        let fx = if x.is_plus() { Fate::Plus } else { Fate::Zero };
                        let fy = if y.is_plus() { Fate::Plus } else { Fate::Zero };
                        n[a.idx()][b.idx()][fx.idx()][fy.idx()] = c.get(a, b, x, y);
                    }
                }
            }
        }
        ThreeOutcomeCounts::from_cells(n)
    }
}

/// Probabilities of the four joint fates for one setting combination.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CellProbs {
    /// `++`
    pub pp: f64,
    /// `+0`
    pub pz: f64,
    /// `0+`
    pub zp: f64,
    /// `00`
    pub zz: f64,
}

impl CellProbs {
    pub const fn new(pp: f64, pz: f64, zp: f64, zz: f64) -> Self {
        CellProbs { pp, pz, zp, zz }
    }

    #[inline]
    pub fn get(&self, alice: Outcome, bob: Outcome) -> f64 {
        match (alice, bob) {
            (Outcome::Plus, Outcome::Plus) => self.pp,
            (Outcome::Plus, Outcome::Undetected) => self.pz,
            (Outcome::Undetected, Outcome::Plus) => self.zp,
            (Outcome::Undetected, Outcome::Undetected) => self.zz,
        }
    }

    pub fn sum(&self) -> f64 {
        self.pp + self.pz + self.zp + self.zz
    }

    fn scaled(&self, w: f64) -> CellProbs {
        CellProbs::new(self.pp * w, self.pz * w, self.zp * w, self.zz * w)
    }

    fn in_unit(&self) -> bool {
        [self.pp, self.pz, self.zp, self.zz]
            .iter()
            .all(|p| (0.0..=1.0).contains(p))
    }
}

/// Conditional probabilities `p_AB(a_i b_j)` in the two-outcome encoding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CondProbs {
    /// Indexed `[i][j]`.
    pub cells: [[CellProbs; 2]; 2],
}

impl CondProbs {
    pub fn new(cells: [[CellProbs; 2]; 2]) -> Self {
        CondProbs { cells }
    }

    /// Every setting combination yields `00` with certainty.
    pub fn nothing_detected() -> Self {
        CondProbs::new([[CellProbs::new(0.0, 0.0, 0.0, 1.0); 2]; 2])
    }

    #[inline]
    pub fn cell(&self, a: Setting, b: Setting) -> &CellProbs {
        &self.cells[a.idx()][b.idx()]
    }

    pub fn validate(&self) -> Result<()> {
        for a in Setting::BOTH {
            for b in Setting::BOTH {
                let c = self.cell(a, b);
                if !c.in_unit() {
                    return Err(Error::validation(format!(
                        "probability outside [0, 1] for a{}b{}",
                        a.label(),
                        b.label()
                    )));
                }
                if (c.sum() - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(Error::validation(format!(
                        "probabilities for a{}b{} sum to {}",
                        a.label(),
                        b.label(),
                        c.sum()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Three-outcome conditional probabilities `p_AB(a_i b_j)`, `A, B ∈ {+,-,0}`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ThreeOutcomeProbs {
    /// Indexed `[i][j][A][B]` with fates ordered `+, -, 0`.
    pub p: [[[[f64; 3]; 3]; 2]; 2],
}

impl ThreeOutcomeProbs {
    pub fn validate(&self) -> Result<()> {
        for i in 0..2 {
            for j in 0..2 {
                let cell = &self.p[i][j];
                if cell.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::validation(format!(
                        "probability outside [0, 1] for a{}b{}",
                        i + 1,
                        j + 1
                    )));
                }
                let sum: f64 = cell.iter().flatten().sum();
                if (sum - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(Error::validation(format!(
                        "probabilities for a{}b{} sum to {sum}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, a: Setting, b: Setting, alice: Fate, bob: Fate) -> f64 {
        self.p[a.idx()][b.idx()][alice.idx()][bob.idx()]
    }
}

/// Joint probabilities `p(AB, a_i b_j)`, normalized over all sixteen events.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct JointProbs {
    pub cells: [[CellProbs; 2]; 2],
}

impl JointProbs {
    /// Joint table from conditional probabilities and the setting distribution
    /// `p(a_i b_j)`.
    pub fn from_conditional(probs: &CondProbs, p_settings: [[f64; 2]; 2]) -> Self {
        let mut cells = [[CellProbs::default(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                cells[i][j] = probs.cells[i][j].scaled(p_settings[i][j]);
            }
        }
        JointProbs { cells }
    }

    pub fn from_counts(counts: &CountsTable) -> Result<Self> {
        let total = counts.total();
        if total == 0 {
            return Err(Error::validation("empty counts table"));
        }
        let mut cells = [[CellProbs::default(); 2]; 2];
        for a in Setting::BOTH {
            for b in Setting::BOTH {
                let f = |x, y| counts.get(a, b, x, y) as f64 / total as f64;
                cells[a.idx()][b.idx()] = CellProbs::new(
                    f(Outcome::Plus, Outcome::Plus),
                    f(Outcome::Plus, Outcome::Undetected),
                    f(Outcome::Undetected, Outcome::Plus),
                    f(Outcome::Undetected, Outcome::Undetected),
                );
            }
        }
        Ok(JointProbs { cells })
    }

    #[inline]
    pub fn cell(&self, a: Setting, b: Setting) -> &CellProbs {
        &self.cells[a.idx()][b.idx()]
    }

    pub fn validate(&self) -> Result<()> {
        let mut sum = 0.0;
        for c in self.cells.iter().flatten() {
            if !c.in_unit() {
                return Err(Error::validation("joint probability outside [0, 1]"));
            }
            sum += c.sum();
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::validation(format!("joint probabilities sum to {sum}")));
        }
        Ok(())
    }
}

use Fate::{Minus as M, Plus as P, Zero as Z};
use Setting::{First as S1, Second as S2};

/// Eberhard's count combination
/// `n++(a1b1) - n+-(a1b2) - n+0(a1b2) - n-+(a2b1) - n0+(a2b1) - n++(a2b2)`.
pub fn eberhard_counts_value(counts: &ThreeOutcomeCounts) -> Result<f64> {
    counts.validate()?;
    let v = counts.get(S1, S1, P, P) as i128
        - counts.get(S1, S2, P, M) as i128
        - counts.get(S1, S2, P, Z) as i128
        - counts.get(S2, S1, M, P) as i128
        - counts.get(S2, S1, Z, P) as i128
        - counts.get(S2, S2, P, P) as i128;
    Ok(v as f64)
}

/// The same combination on conditional probabilities; lies in `[-5, 1]`.
pub fn normalized_eberhard_value(probs: &ThreeOutcomeProbs) -> Result<f64> {
    probs.validate()?;
    Ok(probs.get(S1, S1, P, P)
        - probs.get(S1, S2, P, M)
        - probs.get(S1, S2, P, Z)
        - probs.get(S2, S1, M, P)
        - probs.get(S2, S1, Z, P)
        - probs.get(S2, S2, P, P))
}

/// CH-E value `J = p++(a1b1) - p+0(a1b2) - p0+(a2b1) - p++(a2b2)`.
#[inline]
pub fn che_j(probs: &CondProbs) -> f64 {
    probs.cells[0][0].pp - probs.cells[0][1].pz - probs.cells[1][0].zp - probs.cells[1][1].pp
}

/// Relative frequencies `n_AB(a_i b_j) / N_ij`.
pub fn estimate_cond_probs(counts: &CountsTable) -> Result<CondProbs> {
    let mut cells = [[CellProbs::default(); 2]; 2];
    for a in Setting::BOTH {
        for b in Setting::BOTH {
            let total = counts.setting_total(a, b);
            if total == 0 {
                return Err(Error::InsufficientData {
                    i: a.label(),
                    j: b.label(),
                });
            }
            let f = |x, y| counts.get(a, b, x, y) as f64 / total as f64;
            cells[a.idx()][b.idx()] = CellProbs::new(
                f(Outcome::Plus, Outcome::Plus),
                f(Outcome::Plus, Outcome::Undetected),
                f(Outcome::Undetected, Outcome::Plus),
                f(Outcome::Undetected, Outcome::Undetected),
            );
        }
    }
    Ok(CondProbs { cells })
}

/// Single-detection probabilities, conditioned on the distant setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Singles {
    /// `p+^A(a_i)_{b_j}`, indexed `[i][j]`.
    pub alice: [[f64; 2]; 2],
    /// `p+^B(b_j)_{a_i}`, indexed `[j][i]`.
    pub bob: [[f64; 2]; 2],
}

impl Singles {
    pub fn alice(&self, a: Setting, distant: Setting) -> f64 {
        self.alice[a.idx()][distant.idx()]
    }

    pub fn bob(&self, b: Setting, distant: Setting) -> f64 {
        self.bob[b.idx()][distant.idx()]
    }
}

pub fn singles_probs(probs: &CondProbs) -> Singles {
    let mut alice = [[0.0; 2]; 2];
    let mut bob = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let c = &probs.cells[i][j];
            alice[i][j] = c.pp + c.pz;
            bob[j][i] = c.pp + c.zp;
        }
    }
    Singles { alice, bob }
}

/// A single no-signaling constraint that failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalingViolation {
    /// `"A"` or `"B"`: whose marginal depends on the distant setting.
    pub side: &'static str,
    /// Local setting label (1 or 2).
    pub setting: u8,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoSignalingReport {
    pub pass: bool,
    pub max_deviation: f64,
    pub violated: Vec<SignalingViolation>,
}

pub fn no_signaling_check(probs: &CondProbs, tol: f64) -> Result<NoSignalingReport> {
    if !(tol > 0.0) {
        return Err(Error::validation(format!("tolerance {tol} must be positive")));
    }
    let s = singles_probs(probs);
    let mut violated = Vec::new();
    let mut max_deviation: f64 = 0.0;
    for x in Setting::BOTH {
        let da = (s.alice(x, S1) - s.alice(x, S2)).abs();
        let db = (s.bob(x, S1) - s.bob(x, S2)).abs();
        for (side, d) in [("A", da), ("B", db)] {
            max_deviation = max_deviation.max(d);
            if d > tol {
                violated.push(SignalingViolation {
                    side,
                    setting: x.label(),
                    deviation: d,
                });
            }
        }
    }
    Ok(NoSignalingReport {
        pass: violated.is_empty(),
        max_deviation,
        violated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChValue {
    pub value: f64,
    /// Set when the input signals beyond the tolerance; the value is then
    /// only indicative.
    pub advisory: bool,
}

/// CH combination. Singles `p^A(a1)` and `p^B(b1)` are taken at the distant
/// settings `b1` and `a1`.
pub fn ch_value(probs: &CondProbs, tol: f64) -> Result<ChValue> {
    let report = no_signaling_check(probs, tol)?;
    let s = singles_probs(probs);
    let c = &probs.cells;
    let value = c[0][0].pp + c[0][1].pp + c[1][0].pp - c[1][1].pp - s.alice(S1, S1) - s.bob(S1, S1);
    Ok(ChValue {
        value,
        advisory: !report.pass,
    })
}

fn check_eps(name: &str, e: f64) -> Result<()> {
    if (0.0..=1.0).contains(&e) {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} = {e} must lie in [0, 1]")))
    }
}

/// Largest fraction of trials in which one setting can reach the far side.
pub fn epsilon_ab(eps_a: f64, eps_b: f64) -> Result<f64> {
    check_eps("epsA", eps_a)?;
    check_eps("epsB", eps_b)?;
    Ok((eps_a + eps_b).min(1.0))
}

/// `(eps_plus, eps_minus) = (eA + eB + eA eB, eA + eB - eA eB)`.
pub fn epsilon_pm(eps_a: f64, eps_b: f64) -> Result<(f64, f64)> {
    check_eps("epsA", eps_a)?;
    check_eps("epsB", eps_b)?;
    let sum = eps_a + eps_b;
    let prod = eps_a * eps_b;
    Ok((sum + prod, sum - prod))
}

/// CH-E value with each term renormalized by the worst-case setting
/// probability allowed under the excess predictability bounds.
pub fn adapted_che_jeps(joint: &JointProbs, profile: &SettingsProfile) -> Result<f64> {
    if profile.mode == PredictabilityMode::CommunicationFraction {
        return Err(Error::validation(
            "adapted CH-E needs an excess-predictability or beyond-half profile",
        ));
    }
    profile.validate()?;
    joint.validate()?;
    let (eps_plus, eps_minus) = epsilon_pm(profile.eps_a, profile.eps_b)?;
    if eps_minus >= 1.0 {
        return Err(Error::DegenerateDenominator { eps_minus });
    }
    let w = |a, b| profile.p_a(a) * profile.p_b(b);
    Ok(joint.cell(S1, S1).pp / (w(S1, S1) * (1.0 + eps_plus))
        - joint.cell(S1, S2).pz / (w(S1, S2) * (1.0 - eps_minus))
        - joint.cell(S2, S1).zp / (w(S2, S1) * (1.0 - eps_minus))
        - joint.cell(S2, S2).pp / (w(S2, S2) * (1.0 - eps_minus)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform_three() -> ThreeOutcomeProbs {
        ThreeOutcomeProbs {
            p: [[[[1.0 / 9.0; 3]; 3]; 2]; 2],
        }
    }

    #[test]
    fn eberhard_counts_empty_is_zero() {
        let c = ThreeOutcomeCounts::from_cells([[[[0; 3]; 3]; 2]; 2]);
        assert_eq!(eberhard_counts_value(&c).unwrap(), 0.0);
    }

    #[test]
    fn eberhard_counts_logical_bound() {
        // N' = 100 per combination: all a1b1 pairs give ++, the others 00.
        let mut n = [[[[0; 3]; 3]; 2]; 2];
        n[0][0][0][0] = 100;
        n[0][1][2][2] = 100;
        n[1][0][2][2] = 100;
        n[1][1][2][2] = 100;
        let c = ThreeOutcomeCounts::from_cells(n);
        assert_eq!(eberhard_counts_value(&c).unwrap(), 100.0);
    }

    #[test]
    fn eberhard_counts_rejects_bad_totals() {
        let mut c = ThreeOutcomeCounts::from_cells([[[[1; 3]; 3]; 2]; 2]);
        c.totals[1][0] = 8;
        assert!(matches!(eberhard_counts_value(&c), Err(Error::Validation(_))));
    }

    #[test]
    fn normalized_eberhard_examples() {
        let mut p = ThreeOutcomeProbs::default();
        for i in 0..2 {
            for j in 0..2 {
                p.p[i][j][2][2] = 1.0;
            }
        }
        assert_eq!(normalized_eberhard_value(&p).unwrap(), 0.0);
        p.p[0][0][2][2] = 0.0;
        p.p[0][0][0][0] = 1.0;
        assert_eq!(normalized_eberhard_value(&p).unwrap(), 1.0);
        assert_abs_diff_eq!(
            normalized_eberhard_value(&uniform_three()).unwrap(),
            -4.0 / 9.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn normalized_eberhard_rejects_unnormalized() {
        let mut p = uniform_three();
        p.p[1][1][0][0] += 0.01;
        assert!(normalized_eberhard_value(&p).is_err());
    }

    #[test]
    fn che_j_nothing_detected() {
        assert_eq!(che_j(&CondProbs::nothing_detected()), 0.0);
    }

    #[test]
    fn estimate_ratio_and_empty_combination() {
        let mut n = [[[[5u64; 2]; 2]; 2]; 2];
        n[0][0] = [[5, 5], [5, 5]];
        let c = CountsTable::from_cells(n);
        let p = estimate_cond_probs(&c).unwrap();
        assert_eq!(p.cell(S1, S1).pp, 0.25);

        n[0][1] = [[0, 0], [0, 0]];
        let err = estimate_cond_probs(&CountsTable::from_cells(n)).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { i: 1, j: 2 }));
    }

    #[test]
    fn singles_sum_coincidence_and_exclusive() {
        let mut p = CondProbs::nothing_detected();
        p.cells[0][1] = CellProbs::new(0.1, 0.2, 0.3, 0.4);
        let s = singles_probs(&p);
        assert_abs_diff_eq!(s.alice(S1, S2), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(s.bob(S2, S1), 0.4, epsilon = 1e-15);

        let zero = singles_probs(&CondProbs::nothing_detected());
        assert!(zero.alice.iter().chain(zero.bob.iter()).flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn no_signaling_flags_one_way_communication() {
        // Alice announces her setting; Bob clicks only when it was a1.
        let mut p = CondProbs::nothing_detected();
        p.cells[0][1] = CellProbs::new(0.0, 0.0, 1.0, 0.0);
        let r = no_signaling_check(&p, 1e-9).unwrap();
        assert!(!r.pass);
        assert_eq!(r.violated.len(), 1);
        assert_eq!(r.violated[0].side, "B");
        assert_eq!(r.violated[0].setting, 2);
        assert_eq!(r.max_deviation, 1.0);
        assert!(no_signaling_check(&p, 0.0).is_err());
    }

    #[test]
    fn ch_zero_and_advisory_flag() {
        let v = ch_value(&CondProbs::nothing_detected(), 1e-12).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(!v.advisory);

        let mut p = CondProbs::nothing_detected();
        p.cells[0][1] = CellProbs::new(0.0, 0.0, 1.0, 0.0);
        assert!(ch_value(&p, 1e-9).unwrap().advisory);
    }

    #[test]
    fn epsilon_helpers() {
        assert_eq!(epsilon_ab(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(epsilon_ab(0.3, 0.9).unwrap(), 1.0);
        assert_eq!(epsilon_ab(1e-7, 0.0).unwrap(), 1e-7);
        assert!(epsilon_ab(-0.1, 0.0).is_err());
        assert!(epsilon_ab(0.0, 1.5).is_err());

        assert_eq!(epsilon_pm(0.0, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(epsilon_pm(1.0, 1.0).unwrap(), (3.0, 1.0));
        let (p, m) = epsilon_pm(0.01, 0.02).unwrap();
        assert_abs_diff_eq!(p, 0.0302, epsilon = 1e-15);
        assert_abs_diff_eq!(m, 0.0298, epsilon = 1e-15);
        assert!(epsilon_pm(2.0, 0.0).is_err());
    }

    #[test]
    fn adapted_rejects_full_predictability() {
        let profile = SettingsProfile::unbiased(PredictabilityMode::ExcessPredictability, 1.0, 0.0);
        let joint = JointProbs::from_conditional(&CondProbs::nothing_detected(), [[0.25; 2]; 2]);
        assert!(matches!(
            adapted_che_jeps(&joint, &profile),
            Err(Error::DegenerateDenominator { .. })
        ));
        let comm = SettingsProfile::unbiased(PredictabilityMode::CommunicationFraction, 0.0, 0.0);
        assert!(adapted_che_jeps(&joint, &comm).is_err());
    }
}
