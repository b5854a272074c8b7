use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// Draws a P x K batch: `ids_per_batch` identities, `per_id` distinct
/// samples of each. Returns indices into `labels`, grouped by identity.
pub fn pk_sample<R: Rng + ?Sized>(
    labels: &[usize],
    ids_per_batch: usize,
    per_id: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if ids_per_batch == 0 || per_id == 0 {
        return Err(Error::Batch("P and K must be positive".into()));
    }
    // BTreeMap gives a label order independent of hashing.
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let eligible: Vec<&Vec<usize>> = by_label.values().filter(|v| v.len() >= per_id).collect();
    if eligible.len() < ids_per_batch {
        return Err(Error::Batch(format!(
            "need {ids_per_batch} identities with >= {per_id} samples, found {}",
            eligible.len()
        )));
    }
    let mut batch = Vec::with_capacity(ids_per_batch * per_id);
    for pick in index::sample(rng, eligible.len(), ids_per_batch) {
        let members = eligible[pick];
        batch.extend(index::sample(rng, members.len(), per_id).into_iter().map(|j| members[j]));
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn labels(ids: usize, per: usize) -> Vec<usize> {
        (0..ids).flat_map(|i| std::iter::repeat_n(i, per)).collect()
    }

    #[test]
    fn default_batch_shape() {
        let labels = labels(100, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = pk_sample(&labels, 32, 4, &mut rng).unwrap();
        assert_eq!(batch.len(), 128);
        assert_eq!(batch.iter().collect::<HashSet<_>>().len(), 128);
        let mut per: BTreeMap<usize, usize> = BTreeMap::new();
        for &i in &batch {
            *per.entry(labels[i]).or_default() += 1;
        }
        assert_eq!(per.len(), 32);
        assert!(per.values().all(|&c| c == 4));
    }

    #[test]
    fn exhausts_single_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut batch = pk_sample(&[5, 5], 1, 2, &mut rng).unwrap();
        batch.sort();
        assert_eq!(batch, vec![0, 1]);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let labels = labels(40, 6);
        let a = pk_sample(&labels, 8, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = pk_sample(&labels, 8, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn insufficient_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(pk_sample(&labels(3, 4), 4, 4, &mut rng), Err(Error::Batch(_))));
        assert!(matches!(pk_sample(&labels(5, 3), 2, 4, &mut rng), Err(Error::Batch(_))));
    }
}
