//! Probabilistic classifier that drives querying, and a linear separator
//! used for boundary export.

pub mod mlp;
pub mod svm;

use serde::{Deserialize, Serialize};

use crate::scenario::DerTotals;

pub use mlp::{accuracy, train, ClassifierParams, Hyper};
pub use svm::{fit_boundary, Hyperplane, SvmOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEntry {
    pub scenario_id: u64,
    /// Position of the scenario in the original pool.
    pub pool_index: usize,
    pub features: Vec<f64>,
    pub label: u8,
    pub round: usize,
    pub totals: DerTotals,
}

/// Labelled set plus the indices of the pool still unlabelled.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledPool {
    pub entries: Vec<LabeledEntry>,
    pub unlabeled: Vec<usize>,
}

impl LabeledPool {
    /// Everything unlabelled.
    pub fn new(pool_size: usize) -> Self {
        LabeledPool {
            entries: Vec::new(),
            unlabeled: (0..pool_size).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|e| e.features.clone()).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.label).collect()
    }

    /// Moves `entry` from the unlabelled set into the labelled set.
    /// Returns false if its pool index was not unlabelled.
    pub fn push(&mut self, entry: LabeledEntry) -> bool {
        match self.unlabeled.iter().position(|&i| i == entry.pool_index) {
            Some(pos) => {
                self.unlabeled.remove(pos);
                self.entries.push(entry);
                true
            }
            None => false,
        }
    }

    /// Train on the current labels.
    pub fn train(&self, dim: usize, hyper: &Hyper) -> crate::Result<ClassifierParams> {
        train(&self.features(), &self.labels(), dim, hyper)
    }

    pub fn fit_boundary(&self, options: &SvmOptions) -> crate::Result<Hyperplane> {
        fit_boundary(&self.features(), &self.labels(), options)
    }
}
