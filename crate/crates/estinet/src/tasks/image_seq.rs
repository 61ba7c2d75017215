//! Image-sequence datasets: sequences of digit images labeled through the
//! sum or lookup function. Hidden digit labels ride along for evaluation
//! only; training never sees them.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blackbox::{bb_sum, LookupTable};

use super::mnist::MnistData;
use super::DataError;

#[derive(Debug, Clone)]
pub struct ImageSequenceSample {
    /// Indexes into the backing image corpus, one per position.
    pub image_indices: Vec<u32>,
    /// Gold digits, for evaluation of the argument extractor only.
    pub hidden_digits: Vec<u8>,
    /// Task label: the sum, or the lookup digit.
    pub label: f64,
}

#[derive(Debug, Clone)]
pub struct ImageSequenceDataset {
    pub samples: Vec<ImageSequenceSample>,
    pub k: usize,
    pub warning: Option<String>,
}

fn sample_sequences(
    corpus: &MnistData,
    k: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
    label_fn: impl Fn(&[u8]) -> f64,
) -> Vec<ImageSequenceSample> {
    (0..n)
        .map(|_| {
            let image_indices: Vec<u32> =
                (0..k).map(|_| rng.random_range(0..corpus.len()) as u32).collect();
            let hidden_digits: Vec<u8> =
                image_indices.iter().map(|&i| corpus.labels[i as usize]).collect();
            let label = label_fn(&hidden_digits);
            ImageSequenceSample { image_indices, hidden_digits, label }
        })
        .collect()
}

/// Sequences of `k` uniformly sampled images labeled with their digit sum.
pub fn gen_image_addition(
    corpus: &MnistData,
    k: usize,
    n: usize,
    seed: u64,
) -> Result<ImageSequenceDataset, DataError> {
    if k == 0 || n == 0 {
        return Err(DataError::Invalid("k and n must be positive".into()));
    }
    if corpus.is_empty() {
        return Err(DataError::Invalid("empty image corpus".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample_sequences(corpus, k, n, &mut rng, |digits| {
        let ds: Vec<usize> = digits.iter().map(|&d| d as usize).collect();
        bb_sum(&ds).expect("corpus labels are digits") as f64
    });
    Ok(ImageSequenceDataset { samples, k, warning: None })
}

/// Sequences labeled through a seeded random lookup table. A different
/// `table_seed` yields the replacement table for the swap experiment.
pub fn gen_image_lookup(
    corpus: &MnistData,
    k: usize,
    n: usize,
    seed: u64,
    table_seed: u64,
) -> Result<(ImageSequenceDataset, LookupTable), DataError> {
    if k == 0 || n == 0 {
        return Err(DataError::Invalid("k and n must be positive".into()));
    }
    if corpus.is_empty() {
        return Err(DataError::Invalid("empty image corpus".into()));
    }
    let warning = (k > 4).then(|| {
        format!("lookup table of dimension {k} holds 10^{k} entries")
    });
    let table = LookupTable::random(k, table_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample_sequences(corpus, k, n, &mut rng, |digits| {
        let ds: Vec<usize> = digits.iter().map(|&d| d as usize).collect();
        table.get(&ds).expect("corpus labels are digits") as f64
    });
    Ok((ImageSequenceDataset { samples, k, warning }, table))
}

/// Relabel an existing dataset with a different table, keeping the image
/// sequences fixed (the replaced-table evaluation).
pub fn relabel_with_table(
    dataset: &ImageSequenceDataset,
    table: &LookupTable,
) -> Result<ImageSequenceDataset, DataError> {
    let samples = dataset
        .samples
        .iter()
        .map(|s| {
            let ds: Vec<usize> = s.hidden_digits.iter().map(|&d| d as usize).collect();
            let label = table
                .get(&ds)
                .map_err(|e| DataError::Invalid(e.to_string()))?
                as f64;
            Ok(ImageSequenceSample {
                image_indices: s.image_indices.clone(),
                hidden_digits: s.hidden_digits.clone(),
                label,
            })
        })
        .collect::<Result<_, DataError>>()?;
    Ok(ImageSequenceDataset { samples, k: dataset.k, warning: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::digits::generate_digit_corpus;

    #[test]
    fn addition_labels_match_digit_sums() {
        let corpus = generate_digit_corpus(200, 1);
        let ds = gen_image_addition(&corpus, 10, 50, 2).unwrap();
        for s in &ds.samples {
            let expected: f64 = s.hidden_digits.iter().map(|&d| d as f64).sum();
            assert_eq!(s.label, expected);
            assert_eq!(s.image_indices.len(), 10);
        }
    }

    #[test]
    fn all_zero_sequence_sums_to_zero() {
        // A corpus of only zeros forces every label to 0.
        let mut corpus = generate_digit_corpus(50, 3);
        corpus.labels.iter_mut().for_each(|l| *l = 0);
        let ds = gen_image_addition(&corpus, 5, 10, 4).unwrap();
        assert!(ds.samples.iter().all(|s| s.label == 0.0));
    }

    #[test]
    fn lookup_labels_match_the_generated_table() {
        let corpus = generate_digit_corpus(100, 5);
        let (ds, table) = gen_image_lookup(&corpus, 2, 40, 6, 7).unwrap();
        for s in &ds.samples {
            let args: Vec<usize> = s.hidden_digits.iter().map(|&d| d as usize).collect();
            assert_eq!(s.label, table.get(&args).unwrap() as f64);
        }
    }

    #[test]
    fn same_seeds_give_identical_table_and_dataset() {
        let corpus = generate_digit_corpus(100, 5);
        let (a, ta) = gen_image_lookup(&corpus, 3, 20, 8, 9).unwrap();
        let (b, tb) = gen_image_lookup(&corpus, 3, 20, 8, 9).unwrap();
        assert_eq!(ta, tb);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.image_indices, y.image_indices);
            assert_eq!(x.label, y.label);
        }
    }

    #[test]
    fn k4_table_has_ten_thousand_entries_and_k5_warns() {
        let corpus = generate_digit_corpus(20, 2);
        let (_, table) = gen_image_lookup(&corpus, 4, 5, 1, 1).unwrap();
        assert_eq!(table.size(), 10_000);
        let (ds, _) = gen_image_lookup(&corpus, 5, 5, 1, 1).unwrap();
        assert!(ds.warning.is_some());
        assert!(gen_image_lookup(&corpus, 0, 5, 1, 1).is_err());
    }

    #[test]
    fn relabeling_changes_labels_not_sequences() {
        let corpus = generate_digit_corpus(100, 5);
        let (ds, _) = gen_image_lookup(&corpus, 2, 30, 8, 9).unwrap();
        let replacement = LookupTable::random(2, 999);
        let swapped = relabel_with_table(&ds, &replacement).unwrap();
        for (a, b) in ds.samples.iter().zip(&swapped.samples) {
            assert_eq!(a.image_indices, b.image_indices);
            let args: Vec<usize> = a.hidden_digits.iter().map(|&d| d as usize).collect();
            assert_eq!(b.label, replacement.get(&args).unwrap() as f64);
        }
    }
}
