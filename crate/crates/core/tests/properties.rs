use std::f64::consts::PI;

use proptest::prelude::*;

use bellstat::inequality::{
    adapted_che_jeps, ch_value, che_j, epsilon_ab, epsilon_pm, CellProbs, CondProbs, JointProbs,
};
use bellstat::martingale::{analyze, concentrate, hoeffding_pvalue, increment, range, IncrementSpec};
use bellstat::quantum::QuantumModel;
use bellstat::trial_csv::{TrialReader, TrialWriter};
use bellstat::{Outcome, PredictabilityMode, Setting, SettingsProfile, TrialRecord};

fn cell() -> impl Strategy<Value = CellProbs> {
    prop::array::uniform4(0.0..1.0f64).prop_filter_map("non-degenerate", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| CellProbs::new(w[0] / s, w[1] / s, w[2] / s, w[3] / s))
    })
}

fn cond_probs() -> impl Strategy<Value = CondProbs> {
    prop::array::uniform4(cell()).prop_map(|c| CondProbs::new([[c[0], c[1]], [c[2], c[3]]]))
}

fn quantum_model() -> impl Strategy<Value = QuantumModel> {
    (
        0.0..=1.0f64,
        prop::array::uniform4(0.0..PI),
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.0..0.1f64,
    )
        .prop_map(|(r, ang, eta_a, eta_b, visibility, p_dark)| QuantumModel {
            r,
            alpha1: ang[0],
            alpha2: ang[1],
            beta1: ang[2],
            beta2: ang[3],
            eta_a,
            eta_b,
            visibility,
            p_dark,
        })
}

fn profile(mode: PredictabilityMode) -> impl Strategy<Value = SettingsProfile> {
    (-0.3..0.3f64, -0.3..0.3f64, 0.0..0.3f64, 0.0..0.3f64).prop_map(move |(ka, kb, ea, eb)| SettingsProfile {
        kappa_a: ka,
        kappa_b: kb,
        eps_a: ea,
        eps_b: eb,
        mode,
        qf: 0.0,
    })
}

fn all_trials() -> Vec<(Setting, Setting, Outcome, Outcome)> {
    let mut v = Vec::new();
    for a in Setting::BOTH {
        for b in Setting::BOTH {
            for x in Outcome::BOTH {
                for y in Outcome::BOTH {
                    v.push((a, b, x, y));
                }
            }
        }
    }
    v
}

fn record(index: u64, (a, b, alice, bob): (Setting, Setting, Outcome, Outcome)) -> TrialRecord {
    TrialRecord {
        index,
        a,
        b,
        alice,
        bob,
    }
}

fn trial() -> impl Strategy<Value = (Setting, Setting, Outcome, Outcome)> {
    (0..16usize).prop_map(|k| all_trials()[k])
}

proptest! {
    #[test]
    fn che_j_is_bounded(p in cond_probs()) {
        let j = che_j(&p);
        prop_assert!((-3.0..=1.0).contains(&j));
    }

    #[test]
    fn ch_equals_che_without_signaling(m in quantum_model()) {
        let p = m.cond_probs();
        let ch = ch_value(&p, 1e-9).unwrap();
        prop_assert!(!ch.advisory);
        prop_assert!((ch.value - che_j(&p)).abs() < 1e-12);
    }

    #[test]
    fn quantum_values_respect_bound(m in quantum_model()) {
        prop_assert!(che_j(&m.cond_probs()) <= (2f64.sqrt() - 1.0) / 2.0 + 1e-12);
    }

    #[test]
    fn epsilon_combinations(ea in 0.0..=1.0f64, eb in 0.0..=1.0f64) {
        let (ep, em) = epsilon_pm(ea, eb).unwrap();
        prop_assert!(ep >= em);
        prop_assert!(em >= 0.0);
        prop_assert!((ep + em - 2.0 * (ea + eb)).abs() < 1e-15);
        prop_assert!((ep - em - 2.0 * ea * eb).abs() < 1e-15);
        let eab = epsilon_ab(ea, eb).unwrap();
        prop_assert!(eab <= 1.0 && eab <= ea + eb);
    }

    #[test]
    fn adapted_value_shrinks_with_predictability(
        p in cond_probs(),
        e1 in 0.0..0.2f64,
        extra in 0.0..0.2f64,
    ) {
        let low = SettingsProfile::unbiased(PredictabilityMode::ExcessPredictability, e1, e1);
        let high = SettingsProfile::unbiased(PredictabilityMode::ExcessPredictability, e1 + extra, e1 + extra);
        let joint = JointProbs::from_conditional(&p, low.p_ij());
        let j_low = adapted_che_jeps(&joint, &low).unwrap();
        let j_high = adapted_che_jeps(&joint, &high).unwrap();
        prop_assert!(j_high <= j_low + 1e-12);
        let zero = SettingsProfile::unbiased(PredictabilityMode::ExcessPredictability, 0.0, 0.0);
        prop_assert!((adapted_che_jeps(&joint, &zero).unwrap() - che_j(&p)).abs() < 1e-12);
    }

    #[test]
    fn plain_increment_has_che_j_mean(m in quantum_model(), prof in profile(PredictabilityMode::CommunicationFraction)) {
        let spec = IncrementSpec::plain(prof.p_ij()).unwrap();
        let p = m.cond_probs();
        let mut mean = 0.0;
        for t in all_trials() {
            let (a, b, x, y) = t;
            let w = prof.p_a(a) * prof.p_b(b) * p.cell(a, b).get(x, y);
            mean += w * increment(&record(1, t), &spec).unwrap();
        }
        prop_assert!((mean - che_j(&p)).abs() < 1e-12);
    }

    #[test]
    fn adapted_increment_has_adapted_mean(m in quantum_model(), prof in profile(PredictabilityMode::ExcessPredictability)) {
        let (ep, em) = epsilon_pm(prof.eps_a, prof.eps_b).unwrap();
        let spec = IncrementSpec::adapted(prof.p_ij(), ep, em, 0.0).unwrap();
        let p = m.cond_probs();
        let mut mean = 0.0;
        for t in all_trials() {
            let (a, b, x, y) = t;
            let w = prof.p_a(a) * prof.p_b(b) * p.cell(a, b).get(x, y);
            mean += w * increment(&record(1, t), &spec).unwrap();
        }
        let joint = JointProbs::from_conditional(&p, prof.p_ij());
        prop_assert!((mean - adapted_che_jeps(&joint, &prof).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn concentration_without_streak_is_identity(incs in prop::collection::vec(-5.0..5.0f64, 1..200)) {
        let c = concentrate(incs.iter().copied(), 0, 0.0);
        prop_assert_eq!(c.m, incs.len() as u64);
        let mut z = 0.0;
        for (k, v) in incs.iter().zip(&c.stopped_values) {
            z += k;
            prop_assert_eq!(z.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn concentrated_increments_stay_in_bracket(
        ts in prop::collection::vec(trial(), 1..400),
        kappa in -0.2..0.2f64,
        eps in 0.001..0.2f64,
        s in 0u64..50,
    ) {
        let prof = SettingsProfile { kappa_a: kappa, ..SettingsProfile::unbiased(PredictabilityMode::CommunicationFraction, eps, 0.0) };
        let spec = IncrementSpec::shifted(prof.p_ij(), eps).unwrap();
        let incs: Vec<f64> = ts.iter().enumerate()
            .map(|(k, &t)| increment(&record(k as u64 + 1, t), &spec).unwrap())
            .collect();
        let c = concentrate(incs.iter().copied(), s, eps);
        let p = prof.p_ij();
        let inv_w = (1.0 / p[0][1]).max(1.0 / p[1][0]).max(1.0 / p[1][1]);
        let (lo, hi) = (-inv_w - (s + 1) as f64 * eps, 1.0 / p[0][0] - eps);
        let mut prev = 0.0;
        for &z in &c.stopped_values {
            let step = z - prev;
            prop_assert!(step >= lo - 1e-9 && step <= hi + 1e-9, "{step} outside [{lo}, {hi}]");
            prev = z;
        }
        let r = range(&spec).unwrap();
        prop_assert!(hi - lo <= r + s as f64 * eps + 1e-9);

        let recs: Vec<TrialRecord> = ts.iter().enumerate().map(|(k, &t)| record(k as u64 + 1, t)).collect();
        let summary = analyze(&recs, &spec, s).unwrap();
        prop_assert_eq!(summary.m, c.m);
        prop_assert_eq!(summary.m_last, c.m_last);
        if let Some(&z) = c.stopped_values.last() {
            prop_assert!((summary.z - z).abs() < 1e-9);
        }
        let s_eff = s.min(recs.len() as u64);
        prop_assert_eq!(summary.r, r + s_eff as f64 * eps);
        if summary.m > 0 {
            let p = hoeffding_pvalue(summary.z, summary.m, summary.r).unwrap();
            prop_assert!((summary.p_value - p).abs() <= 1e-12);
        }
    }

    #[test]
    fn hoeffding_is_a_probability(z in -100.0..100.0f64, len in 1u64..10_000, r in 0.1..20.0f64) {
        let p = hoeffding_pvalue(z, len, r).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0 || (p == 0.0 && z > 0.0));
        let q = hoeffding_pvalue(z + 1.0, len, r).unwrap();
        prop_assert!(q <= p);
    }

    #[test]
    fn trial_csv_roundtrip(ts in prop::collection::vec(trial(), 0..100), gaps in prop::collection::vec(1u64..1_000_000, 100)) {
        let mut index = 0;
        let recs: Vec<TrialRecord> = ts.iter().zip(&gaps).map(|(&t, g)| { index += g; record(index, t) }).collect();
        let mut w = TrialWriter::new(Vec::new()).unwrap();
        for r in &recs {
            w.write(r).unwrap();
        }
        let bytes = w.finish().unwrap();
        let back: Vec<TrialRecord> = TrialReader::new(bytes.as_slice(), "mem").unwrap().collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back, recs);
    }
}
