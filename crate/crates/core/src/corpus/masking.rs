use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sentence::Dataset;
use crate::error::{Error, Result};

/// Seeded priority order over sentence indices. Fraction `f` keeps the first
/// `round(f * n)` entries, so larger fractions keep a superset of smaller ones.
pub fn annotation_priority(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Keeps token labels on a seeded random `round(fraction * |dataset|)` subset
/// of sentences and strips them from the rest. Sentence labels are untouched.
pub fn mask_token_annotation(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::config(format!(
            "annotation fraction {fraction} outside [0, 1]"
        )));
    }
    if !dataset.all_token_labeled() {
        return Err(Error::contract(
            "annotation masking needs every sentence to carry token labels",
        ));
    }
    let n = dataset.len();
    let keep_count = (fraction * n as f64).round() as usize;
    let mut keep = vec![false; n];
    for &i in annotation_priority(n, seed).iter().take(keep_count) {
        keep[i] = true;
    }
    let sentences = dataset
        .iter()
        .zip(keep)
        .map(|(s, k)| {
            if k {
                s.clone()
            } else {
                s.without_token_labels()
            }
        })
        .collect();
    Ok(Dataset::new(sentences))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;

    fn toy(n: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| {
                    let labels = vec![i % 2 == 0, false];
                    Sentence::from_token_labels(vec![format!("w{i}"), "x".into()], labels).unwrap()
                })
                .collect(),
        )
    }

    #[test]
    fn full_fraction_is_identity() {
        let d = toy(7);
        assert_eq!(mask_token_annotation(&d, 1.0, 3).unwrap(), d);
    }

    #[test]
    fn zero_fraction_strips_everything_but_sentence_labels() {
        let d = toy(7);
        let m = mask_token_annotation(&d, 0.0, 3).unwrap();
        assert!(!m.any_token_labeled());
        let before: Vec<bool> = d.iter().map(|s| s.sentence_label()).collect();
        let after: Vec<bool> = m.iter().map(|s| s.sentence_label()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn fraction_selects_exact_count_deterministically() {
        let d = toy(10);
        let a = mask_token_annotation(&d, 0.2, 42).unwrap();
        let b = mask_token_annotation(&d, 0.2, 42).unwrap();
        let kept: Vec<usize> = (0..10)
            .filter(|&i| a.sentences[i].has_token_labels())
            .collect();
        assert_eq!(kept.len(), 2);
        assert_eq!(a, b);
        // oracle: the first two indices of the seeded priority order
        let mut expected = annotation_priority(10, 42)[..2].to_vec();
        expected.sort();
        assert_eq!(kept, expected);
    }

    #[test]
    fn larger_fractions_keep_supersets() {
        let d = toy(25);
        let mut prev: Vec<bool> = vec![false; 25];
        for f in [0.0, 0.1, 0.2, 0.5, 0.8, 1.0] {
            let m = mask_token_annotation(&d, f, 9).unwrap();
            let cur: Vec<bool> = m.iter().map(|s| s.has_token_labels()).collect();
            assert!(prev.iter().zip(&cur).all(|(p, c)| !p || *c), "fraction {f}");
            prev = cur;
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(mask_token_annotation(&toy(3), 1.5, 0).is_err());
        assert!(mask_token_annotation(&toy(3), -0.1, 0).is_err());
        let partial = mask_token_annotation(&toy(4), 0.5, 0).unwrap();
        assert!(mask_token_annotation(&partial, 0.5, 0).is_err());
    }
}
