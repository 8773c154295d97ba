use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::models::EncodedBatch;
use crate::subword::SubwordVocab;

/// Fraction of selected positions replaced by the mask piece; the next 10%
/// get a random piece and the rest keep the original.
const MASK_SHARE: f64 = 0.8;
const RANDOM_SHARE: f64 = 0.1;

/// Number of positions to select: `round(rate · eligible)`, at least one.
pub fn masked_count(eligible: usize, rate: f64) -> usize {
    ((rate * eligible as f64).round() as usize).clamp(1, eligible.max(1))
}

/// Selects positions over the whole batch for masked-LM training. Eligible
/// positions are unpadded pieces other than `[CLS]`, `[SEP]` and padding.
pub fn apply_mlm_masking(
    batch: &EncodedBatch,
    vocab: &SubwordVocab,
    mask_rate: f64,
    seed: u64,
) -> Result<EncodedBatch, TrainError> {
    if !(mask_rate > 0.0 && mask_rate < 1.0) {
        return Err(TrainError::InvalidPlan(format!("mask rate {mask_rate} outside (0, 1)")));
    }
    if batch.mlm_targets.is_some() {
        return Err(TrainError::InvalidPlan("batch already carries MLM targets".into()));
    }
    let ids = vocab.special_ids();
    let eligible: Vec<usize> = (0..batch.indices.len())
        .filter(|&i| {
            let p = batch.indices[i];
            batch.attention_mask[i] == 1 && p != ids.cls && p != ids.sep && p != ids.pad
        })
        .collect();
    if eligible.is_empty() {
        return Err(TrainError::NoEligiblePositions);
    }
    let ordinary: Vec<usize> = (0..vocab.len()).filter(|&i| !ids.contains(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = sample(&mut rng, eligible.len(), masked_count(eligible.len(), mask_rate)).into_vec();
    chosen.sort_unstable();

    let mut out = batch.clone();
    let mut targets = vec![-1i64; batch.indices.len()];
    for k in chosen {
        let pos = eligible[k];
        targets[pos] = batch.indices[pos] as i64;
        let u: f64 = rng.gen();
        if u < MASK_SHARE {
            out.indices[pos] = ids.mask;
        } else if u < MASK_SHARE + RANDOM_SHARE && !ordinary.is_empty() {
            out.indices[pos] = ordinary[rng.gen_range(0..ordinary.len())];
        }
    }
    out.mlm_targets = Some(targets);
    Ok(out)
}
