//! Trial stream generation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{predictability_states, AdversaryConfig, AdversaryKind, HiddenState, Placement, Strategy};
use crate::error::{Error, Result};
use crate::inequality::{epsilon_ab, CountsTable};
use crate::quantum::QuantumModel;
use crate::rng::{RngSeed, BLOCK_TRIALS};
use crate::types::{Outcome, Setting, SettingsProfile, TrialRecord};

/// What produces the outcomes of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum TrialSource {
    Quantum {
        model: QuantumModel,
        profile: SettingsProfile,
    },
    Adversary(AdversaryConfig),
}

impl TrialSource {
    pub fn quantum(model: QuantumModel, profile: SettingsProfile) -> Self {
        TrialSource::Quantum { model, profile }
    }

    pub fn profile(&self) -> &SettingsProfile {
        match self {
            TrialSource::Quantum { profile, .. } => profile,
            TrialSource::Adversary(cfg) => &cfg.profile,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TrialSource::Quantum { model, profile } => {
                model.validate()?;
                profile.validate()
            }
            TrialSource::Adversary(cfg) => cfg.validate(),
        }
    }

    /// Whether a trial depends on earlier trials of the same stream.
    pub fn has_memory(&self) -> bool {
        matches!(
            self,
            TrialSource::Adversary(AdversaryConfig {
                kind: AdversaryKind::MemoryLhv { .. },
                ..
            })
        )
    }
}

/// Precomputed per-stream data.
#[derive(Debug, Clone)]
enum Engine {
    Quantum {
        /// Cumulative `[pp, pp+pz, pp+pz+zp]` per `[i][j]`.
        cumulative: [[[f64; 3]; 2]; 2],
        p_a1: f64,
        p_b1: f64,
    },
    Deterministic {
        strategy: Strategy,
        p_a1: f64,
        p_b1: f64,
    },
    Memory {
        weights: [[f64; 2]; 2],
        target: f64,
        z: f64,
        p_a1: f64,
        p_b1: f64,
    },
    Communication {
        prbox: bool,
        placement: Placement,
        eps_ab: f64,
        leading: u64,
        base: Strategy,
        p_a1: f64,
        p_b1: f64,
    },
    Skew {
        states: [HiddenState; 2],
    },
}

impl Engine {
    fn new(source: &TrialSource, n_trials: u64) -> Result<Engine> {
        source.validate()?;
        let profile = source.profile();
        let p_a1 = profile.draw_p_a1();
        let p_b1 = profile.draw_p_b1();
        Ok(match source {
            TrialSource::Quantum { model, .. } => {
                let probs = model.cond_probs();
                let mut cumulative = [[[0.0; 3]; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let c = probs.cells[i][j];
                        cumulative[i][j] = [c.pp, c.pp + c.pz, c.pp + c.pz + c.zp];
                    }
                }
                Engine::Quantum { cumulative, p_a1, p_b1 }
            }
            TrialSource::Adversary(cfg) => match cfg.kind {
                AdversaryKind::DeterministicLhv { strategy } => Engine::Deterministic { strategy, p_a1, p_b1 },
                AdversaryKind::MemoryLhv { target_c } => {
                    let p = profile.p_ij();
                    Engine::Memory {
                        weights: [[1.0 / p[0][0], -1.0 / p[0][1]], [-1.0 / p[1][0], -1.0 / p[1][1]]],
                        target: target_c * (n_trials as f64).sqrt(),
                        z: 0.0,
                        p_a1,
                        p_b1,
                    }
                }
                AdversaryKind::CommPure { placement } | AdversaryKind::CommPrbox { placement } => {
                    let eps_ab = epsilon_ab(profile.eps_a, profile.eps_b)?;
                    Engine::Communication {
                        prbox: matches!(cfg.kind, AdversaryKind::CommPrbox { .. }),
                        placement,
                        eps_ab,
                        leading: (eps_ab * n_trials as f64).ceil() as u64,
                        base: cfg.base_strategy.unwrap_or(Strategy::SILENT),
                        p_a1,
                        p_b1,
                    }
                }
                AdversaryKind::PredictabilitySkew => Engine::Skew {
                    states: predictability_states(profile, cfg.base_strategy.unwrap_or(Strategy::ALWAYS))?,
                },
            },
        })
    }

    #[inline]
    fn trial(&mut self, index: u64, rng: &mut ChaCha8Rng) -> TrialRecord {
        #[inline]
        fn draw(rng: &mut ChaCha8Rng, p_first: f64) -> Setting {
            if rng.gen::<f64>() < p_first {
                Setting::First
            } else {
                Setting::Second
            }
        }

        let (a, b, alice, bob) = match self {
            Engine::Quantum { cumulative, p_a1, p_b1 } => {
                let a = draw(rng, *p_a1);
                let b = draw(rng, *p_b1);
                let u: f64 = rng.gen();
                let c = &cumulative[a.idx()][b.idx()];
                let (x, y) = if u < c[0] {
                    (Outcome::Plus, Outcome::Plus)
                } else if u < c[1] {
                    (Outcome::Plus, Outcome::Undetected)
                } else if u < c[2] {
                    (Outcome::Undetected, Outcome::Plus)
                } else {
                    (Outcome::Undetected, Outcome::Undetected)
                };
                (a, b, x, y)
            }
            Engine::Deterministic { strategy, p_a1, p_b1 } => {
                let a = draw(rng, *p_a1);
                let b = draw(rng, *p_b1);
                (a, b, strategy.alice(a), strategy.bob(b))
            }
            Engine::Memory {
                weights,
                target,
                z,
                p_a1,
                p_b1,
            } => {
                // The strategy is fixed from the history before the settings
                // are drawn.
                let strategy = if *z < *target {
                    Strategy::ALWAYS
                } else {
                    Strategy::SILENT
                };
                let a = draw(rng, *p_a1);
                let b = draw(rng, *p_b1);
                let (x, y) = (strategy.alice(a), strategy.bob(b));
                if strategy.contribution(a, b) != 0 {
                    *z += weights[a.idx()][b.idx()];
                }
                (a, b, x, y)
            }
            Engine::Communication {
                prbox,
                placement,
                eps_ab,
                leading,
                base,
                p_a1,
                p_b1,
            } => {
                let u_comm: f64 = rng.gen();
                let a = draw(rng, *p_a1);
                let b = draw(rng, *p_b1);
                let u_shared: f64 = rng.gen();
                let communicated = match placement {
                    Placement::Bernoulli => u_comm < *eps_ab,
                    Placement::LeadingBlock => index <= *leading,
                };
                let last = a == Setting::Second && b == Setting::Second;
                if !communicated {
                    (a, b, base.alice(a), base.bob(b))
                } else if *prbox {
                    let shared = u_shared < 0.5;
                    (a, b, Outcome::from_click(shared), Outcome::from_click(shared != last))
                } else {
                    (a, b, Outcome::Plus, Outcome::from_click(!last))
                }
            }
            Engine::Skew { states } => {
                let state = if rng.gen::<f64>() < states[0].weight {
                    &states[0]
                } else {
                    &states[1]
                };
                let a = draw(rng, state.p_a1);
                let b = draw(rng, state.p_b1);
                (a, b, state.strategy.alice(a), state.strategy.bob(b))
            }
        };
        TrialRecord {
            index,
            a,
            b,
            alice,
            bob,
        }
    }
}

/// Deterministic stream of trials for a given seed.
#[derive(Debug, Clone)]
pub struct TrialStream {
    engine: Engine,
    seed: RngSeed,
    rng: ChaCha8Rng,
    next: u64,
    end: u64,
}

impl TrialStream {
    fn with_range(source: &TrialSource, n_trials: u64, seed: RngSeed, first: u64, end: u64) -> Result<Self> {
        let engine = Engine::new(source, n_trials)?;
        let block = (first - 1) / BLOCK_TRIALS;
        Ok(TrialStream {
            engine,
            seed,
            rng: seed.block_rng(block),
            next: first,
            end,
        })
    }
}

impl Iterator for TrialStream {
    type Item = TrialRecord;

    #[inline]
    fn next(&mut self) -> Option<TrialRecord> {
        if self.next > self.end {
            return None;
        }
        let index = self.next;
        if index > 1 && (index - 1).is_multiple_of(BLOCK_TRIALS) {
            self.rng = self.seed.block_rng((index - 1) / BLOCK_TRIALS);
        }
        self.next += 1;
        Some(self.engine.trial(index, &mut self.rng))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end + 1 - self.next) as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for TrialStream {}

/// Trials `1..=n_trials` from `source`, reproducible from `seed`.
pub fn simulate(source: &TrialSource, n_trials: u64, seed: RngSeed) -> Result<TrialStream> {
    if n_trials == 0 {
        return Err(Error::validation("at least one trial is required"));
    }
    TrialStream::with_range(source, n_trials, seed, 1, n_trials)
}

/// Counts table of a simulated run. Sources without memory are generated
/// block-parallel; the result equals counting [`simulate`]'s output.
pub fn simulate_counts(source: &TrialSource, n_trials: u64, seed: RngSeed) -> Result<CountsTable> {
    let stream = simulate(source, n_trials, seed)?;
    if source.has_memory() {
        return Ok(CountsTable::from_trials(stream.collect::<Vec<_>>().iter()));
    }
    let blocks = n_trials.div_ceil(BLOCK_TRIALS);
    (0..blocks)
        .into_par_iter()
        .map(|k| {
            let first = k * BLOCK_TRIALS + 1;
            let end = ((k + 1) * BLOCK_TRIALS).min(n_trials);
            let mut counts = CountsTable::new();
            for t in TrialStream::with_range(source, n_trials, seed, first, end)? {
                counts.record(&t);
            }
            Ok(counts)
        })
        .try_reduce(CountsTable::new, |mut x, y| {
            x.merge(&y);
            Ok(x)
        })
}
