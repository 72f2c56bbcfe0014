//! Pool-based active learning loop.
//!
//! Each round retrains the classifier from scratch on the labelled set,
//! scores every unlabelled candidate once, labels the top `B` through the
//! oracle (concurrently) and moves them into the labelled set. The density
//! term of information-density scoring is taken over the round-start
//! unlabelled pool.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::capacity::hosting_capacity;
use super::strategy::{select_top, QueryStrategy};
use crate::error::{Error, Result};
use crate::learner::{accuracy, ClassifierParams, Hyper, LabeledEntry, LabeledPool};
use crate::scenario::{DerTotals, Scenario};

/// Candidate as seen by the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolItem {
    pub id: u64,
    pub features: Vec<f64>,
    pub totals: DerTotals,
}

impl PoolItem {
    pub fn from_scenarios(pool: &[Scenario], index: &std::collections::HashMap<u32, usize>) -> Vec<PoolItem> {
        pool.iter()
            .map(|s| PoolItem {
                id: s.id,
                features: s.features(index),
                totals: s.totals(),
            })
            .collect()
    }
}

/// Query size `B` and number of rounds `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub query_size: usize,
    pub rounds: usize,
}

impl Budget {
    pub fn new(query_size: usize, rounds: usize) -> Self {
        Budget { query_size, rounds }
    }

    pub fn total(&self) -> usize {
        self.query_size * self.rounds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub strategy: QueryStrategy,
    pub budget: Budget,
    pub hyper: Hyper,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub queried: Vec<u64>,
    pub labels: Vec<u8>,
    /// Accuracy of this round's classifier on the labels it was trained on.
    pub train_accuracy: Option<f64>,
    pub labeled_total: usize,
    /// Best combined capacity among feasible labels so far (0 if none).
    pub cumulative_combined: f64,
    /// Best EV-plus-PV installed kW among feasible labels so far (0 if none).
    pub cumulative_total_kw: f64,
    pub cumulative_ev_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHistory {
    pub strategy: QueryStrategy,
    pub budget: Budget,
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    /// Wall-clock time; not serialized so that histories stay reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl EpisodeHistory {
    pub fn labels_requested(&self) -> usize {
        self.rounds.iter().map(|r| r.queried.len()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub theta: ClassifierParams,
    pub labeled: LabeledPool,
    pub history: EpisodeHistory,
}

/// Runs one episode. `oracle` labels the candidate at a pool position and
/// may be called concurrently.
pub fn run_episode<F>(items: &[PoolItem], oracle: F, config: &EpisodeConfig) -> Result<EpisodeResult>
where
    F: Fn(usize) -> Result<u8> + Sync,
{
    if items.is_empty() {
        return Err(Error::EmptyPool);
    }
    config.strategy.validate()?;
    let started = Instant::now();
    let dim = items[0].features.len();
    let ids: Vec<u64> = items.iter().map(|i| i.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let hyper = Hyper { seed: config.seed, ..config.hyper };

    let mut labeled = LabeledPool::new(items.len());
    let mut theta = ClassifierParams::cold_start(dim);
    let mut rounds = Vec::with_capacity(config.budget.rounds);
    let mut seen: HashSet<usize> = HashSet::new();

    for round in 0..config.budget.rounds {
        if labeled.unlabeled.is_empty() {
            break;
        }
        let mut train_accuracy = None;
        if config.strategy.kind.needs_training() {
            let xs = labeled.features();
            let ys = labeled.labels();
            theta = crate::learner::train(&xs, &ys, dim, &hyper)?;
            if !xs.is_empty() {
                train_accuracy = Some(accuracy(&theta, &xs, &ys)?);
            }
        }

        let candidates: Vec<&[f64]> = labeled
            .unlabeled
            .iter()
            .map(|&i| items[i].features.as_slice())
            .collect();
        let cand_ids: Vec<u64> = labeled.unlabeled.iter().map(|&i| ids[i]).collect();
        let scores = config.strategy.score(&theta, &candidates, &mut rng)?;
        let picked: Vec<usize> = select_top(&scores, &cand_ids, config.budget.query_size)
            .into_iter()
            .map(|pos| labeled.unlabeled[pos])
            .collect();

        let labels: Vec<u8> = picked.par_iter().map(|&i| oracle(i)).collect::<Result<_>>()?;

        for (&i, &label) in picked.iter().zip(&labels) {
            debug_assert!(seen.insert(i), "scenario queried twice");
            labeled.entries.push(LabeledEntry {
                scenario_id: items[i].id,
                pool_index: i,
                features: items[i].features.clone(),
                label,
                round,
                totals: items[i].totals,
            });
        }
        let picked_set: HashSet<usize> = picked.iter().copied().collect();
        labeled.unlabeled.retain(|i| !picked_set.contains(i));

        let hc = hosting_capacity(&labeled.entries).ok();
        rounds.push(RoundRecord {
            round,
            queried: picked.iter().map(|&i| items[i].id).collect(),
            labels,
            train_accuracy,
            labeled_total: labeled.len(),
            cumulative_combined: hc.as_ref().map_or(0.0, |h| h.max_combined),
            cumulative_total_kw: hc.as_ref().map_or(0.0, |h| h.max_total_kw),
            cumulative_ev_count: hc.as_ref().map_or(0, |h| h.max_ev_count),
        });
    }

    Ok(EpisodeResult {
        theta,
        labeled,
        history: EpisodeHistory {
            strategy: config.strategy,
            budget: config.budget,
            seed: config.seed,
            rounds,
            wall_time: started.elapsed(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::active::strategy::StrategyKind;

    fn grid_items(n: usize) -> Vec<PoolItem> {
        (0..n)
            .map(|i| {
                let x = (i % 20) as f64 / 5.0;
                let y = (i / 20) as f64 / 5.0;
                PoolItem {
                    id: i as u64,
                    features: vec![x, y],
                    totals: DerTotals { ev_count: 0, ev_kw: x + y, pv_kw: 0.0 },
                }
            })
            .collect()
    }

    fn config(kind: StrategyKind, b: usize, k: usize) -> EpisodeConfig {
        EpisodeConfig {
            strategy: QueryStrategy::new(kind),
            budget: Budget::new(b, k),
            hyper: Hyper { epochs: 50, ..Hyper::default() },
            seed: 3,
        }
    }

    #[test]
    fn budget_and_no_requery() {
        let items = grid_items(400);
        let oracle = |i: usize| Ok(u8::from(items[i].features.iter().sum::<f64>() < 4.0));
        for kind in [StrategyKind::Uniform, StrategyKind::Entropy, StrategyKind::InfoDensity] {
            let res = run_episode(&items, oracle, &config(kind, 7, 5)).unwrap();
            assert_eq!(res.history.labels_requested(), 35);
            let ids: HashSet<u64> = res.labeled.entries.iter().map(|e| e.scenario_id).collect();
            assert_eq!(ids.len(), 35);
            assert_eq!(res.labeled.unlabeled.len(), 365);
            let curve: Vec<f64> = res.history.rounds.iter().map(|r| r.cumulative_total_kw).collect();
            assert!(curve.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn exhausts_pool() {
        let items = grid_items(50);
        let oracle = |i: usize| Ok(u8::from(i.is_multiple_of(3)));
        let res = run_episode(&items, oracle, &config(StrategyKind::Entropy, 20, 10)).unwrap();
        assert_eq!(res.history.labels_requested(), 50);
        assert_eq!(res.history.rounds.len(), 3);
        assert!(res.labeled.unlabeled.is_empty());
    }

    #[test]
    fn deterministic_history() {
        let items = grid_items(200);
        let oracle = |i: usize| Ok(u8::from(items[i].features[0] + 2.0 * items[i].features[1] < 5.0));
        for kind in [StrategyKind::Uniform, StrategyKind::InfoDensity] {
            let a = run_episode(&items, oracle, &config(kind, 10, 4)).unwrap();
            let b = run_episode(&items, oracle, &config(kind, 10, 4)).unwrap();
            assert_eq!(a.history.rounds, b.history.rounds);
            assert_eq!(a.theta, b.theta);
        }
    }

    #[test]
    fn cold_start_entropy_takes_smallest_ids() {
        let items = grid_items(100);
        let oracle = |_| Ok(1);
        let res = run_episode(&items, oracle, &config(StrategyKind::Entropy, 5, 1)).unwrap();
        assert_eq!(res.history.rounds[0].queried, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn empty_pool() {
        assert!(matches!(
            run_episode(&[], |_| Ok(0), &config(StrategyKind::Uniform, 1, 1)),
            Err(Error::EmptyPool)
        ));
    }

    #[test]
    fn oracle_errors_propagate() {
        let items = grid_items(10);
        let res = run_episode(&items, |_| Err(Error::NoFeasibleScenario), &config(StrategyKind::Uniform, 2, 2));
        assert!(res.is_err());
    }
}
