use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sample::{sample_few_shot, SampleSpec};
use crate::corpus::NerDataset;
use crate::error::{Error, Result};

/// Which development data a run assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DevRegime {
    /// Fixed hyperparameters, no dev data.
    #[default]
    NoDev,
    /// As many random held-out sentences as a 10-per-type training sample has.
    SmallDev,
    /// 10 mentions per type sampled from the held-out pool.
    TenPerType,
    /// The whole held-out pool.
    AllDev,
}

impl DevRegime {
    pub fn name(self) -> &'static str {
        match self {
            DevRegime::NoDev => "no_dev",
            DevRegime::SmallDev => "small_dev",
            DevRegime::TenPerType => "ten_per_type",
            DevRegime::AllDev => "all_dev",
        }
    }
}

const HELD_OUT_FRACTION: f64 = 0.1;
const DEV_PER_TYPE: usize = 10;

/// Splits `dataset` into `(train, dev)`. Every regime except `no_dev` first
/// isolates a seeded random 10% held-out pool; train is the remainder.
pub fn carve_dev(dataset: &NerDataset, regime: DevRegime, seed: u64) -> Result<(NerDataset, NerDataset)> {
    let train_name = format!("{}.train", dataset.name);
    let dev_name = format!("{}.dev", dataset.name);
    if regime == DevRegime::NoDev {
        let mut train = dataset.clone();
        train.name = train_name;
        return Ok((train, dataset.subset(dev_name, &[])));
    }
    let infeasible = |message: String| Error::DevRegime {
        regime: regime.name().to_string(),
        message,
    };
    if dataset.len() < 2 {
        return Err(infeasible(format!("needs at least 2 sentences, found {}", dataset.len())));
    }
    let pool_size = ((dataset.len() as f64 * HELD_OUT_FRACTION).round() as usize).max(1);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (pool, rest) = order.split_at(pool_size);
    let mut rest = rest.to_vec();
    rest.sort_unstable();
    let train = dataset.subset(train_name, &rest);

    let mut dev_idx: Vec<usize> = match regime {
        DevRegime::NoDev => unreachable!(),
        DevRegime::AllDev => pool.to_vec(),
        DevRegime::TenPerType => {
            let mut sorted = pool.to_vec();
            sorted.sort_unstable();
            let pool_ds = dataset.subset("pool", &sorted);
            let picked = sample_few_shot(
                &pool_ds,
                &SampleSpec {
                    n_per_type: DEV_PER_TYPE,
                    seed,
                    split_index: 0,
                },
            );
            let ids: std::collections::HashSet<&str> = picked.sentences.iter().map(|s| s.id()).collect();
            sorted
                .into_iter()
                .filter(|&i| ids.contains(dataset.sentences[i].id()))
                .collect()
        }
        DevRegime::SmallDev => {
            let size = sample_few_shot(
                &train,
                &SampleSpec {
                    n_per_type: DEV_PER_TYPE,
                    seed,
                    split_index: 0,
                },
            )
            .len();
            if pool.len() < size {
                return Err(infeasible(format!(
                    "held-out pool has {} sentences, needs {size}",
                    pool.len()
                )));
            }
            pool[..size].to_vec()
        }
    };
    dev_idx.sort_unstable();
    Ok((train, dataset.subset(dev_name, &dev_idx)))
}
