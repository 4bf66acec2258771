use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::model::DropoutMasks;

/// Inverted-dropout masks: each entry is 0 with probability `p` and
/// `1 / (1 - p)` otherwise. Outside training every mask is all ones.
pub fn make_dropout_masks(
    shapes: &[Vec<usize>],
    p: f64,
    seed: u64,
    training: bool,
) -> Result<Vec<Tensor>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    masks_from_rng(shapes, p, &mut rng, training)
}

fn masks_from_rng(
    shapes: &[Vec<usize>],
    p: f64,
    rng: &mut ChaCha8Rng,
    training: bool,
) -> Result<Vec<Tensor>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!(
            "dropout probability {p} outside [0, 1)"
        )));
    }
    let keep = 1.0 / (1.0 - p);
    shapes
        .iter()
        .map(|shape| {
            let n = shape.iter().product();
            let data = if training && p > 0.0 {
                (0..n)
                    .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                    .collect()
            } else {
                vec![1.0; n]
            };
            Tensor::new(shape.clone(), data)
        })
        .collect()
}

/// Masks for one sentence of `n` tokens: one over each word embedding and one
/// over each contextual vector `h_i`, all drawn independently.
pub fn sentence_dropout_masks(
    n: usize,
    word_dim: usize,
    hidden_dim: usize,
    p: f64,
    seed: u64,
) -> Result<DropoutMasks> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let word = masks_from_rng(&vec![vec![word_dim]; n], p, &mut rng, true)?;
    let hidden = masks_from_rng(&vec![vec![hidden_dim]; n], p, &mut rng, true)?;
    Ok(DropoutMasks { word, hidden })
}

/// Mixes a base seed with stream coordinates (epoch, position, ...) into an
/// independent-looking seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut x = base;
    for &p in parts {
        x = splitmix(x ^ splitmix(p.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    x
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
