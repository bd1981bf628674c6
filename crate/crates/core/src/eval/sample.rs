use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::NerDataset;

pub const N_SPLITS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    /// Cap on entity mentions per type.
    pub n_per_type: usize,
    pub seed: u64,
    pub split_index: usize,
}

/// Draws sentences in a seeded random order and keeps a sentence only if
/// none of its types would exceed `n_per_type` mentions. The pass stops once
/// every type holds `min(n_per_type, available)` mentions. If the cap never
/// binds the whole dataset is returned. Kept sentences stay in corpus order.
pub fn sample_few_shot(dataset: &NerDataset, spec: &SampleSpec) -> NerDataset {
    let cap = spec.n_per_type;
    let name = format!("{}.n{}.split{}", dataset.name, cap, spec.split_index);
    let totals = dataset.total_mentions();
    if totals.values().all(|&t| t <= cap) {
        let all: Vec<usize> = (0..dataset.len()).collect();
        return dataset.subset(name, &all);
    }
    let targets: Vec<(String, usize)> = totals.iter().map(|(t, &n)| (t.clone(), n.min(cap))).collect();

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ spec.split_index as u64);
    order.shuffle(&mut rng);

    let mut counts: indexmap::IndexMap<String, usize> = totals.keys().map(|t| (t.clone(), 0)).collect();
    let mut kept = Vec::new();
    for idx in order {
        if targets.iter().all(|(t, target)| counts[t] >= *target) {
            break;
        }
        let mentions = dataset.sentences[idx].mention_counts();
        if mentions.iter().all(|(t, n)| counts[t] + n <= cap) {
            for (t, n) in mentions {
                counts[&t] += n;
            }
            kept.push(idx);
        }
    }
    kept.sort_unstable();
    dataset.subset(name, &kept)
}

/// The five evaluation splits, `split_index` 0 through 4.
pub fn make_splits(dataset: &NerDataset, n_per_type: usize, base_seed: u64) -> Vec<NerDataset> {
    (0..N_SPLITS)
        .map(|split_index| {
            sample_few_shot(
                dataset,
                &SampleSpec {
                    n_per_type,
                    seed: base_seed,
                    split_index,
                },
            )
        })
        .collect()
}

/// Sentence ids of a sample, for reproducibility manifests.
pub fn manifest(dataset: &NerDataset) -> Vec<String> {
    dataset.sentences.iter().map(|s| s.id().to_string()).collect()
}
