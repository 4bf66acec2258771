use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamStore, Tensor};
use crate::corpus::EmbeddingTable;
use crate::error::{Error, Result};
use crate::model::{param_specs, Architecture, LayerSizes, ModelParams, ParamRole};

/// Glorot/Xavier uniform limit `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

fn glorot(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let (rows, cols) = (shape[0], shape[1]);
    let limit = glorot_limit(rows, cols);
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

/// Random initial parameters: Glorot-uniform matrices, zero biases, and
/// forget-gate biases of 1. Deterministic per seed.
pub fn init_params(sizes: LayerSizes, arch: Architecture, seed: u64) -> Result<ModelParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for spec in param_specs(&sizes, arch) {
        let tensor = match spec.role {
            ParamRole::Weight | ParamRole::Embedding => glorot(&mut rng, &spec.shape),
            ParamRole::Bias => Tensor::zeros(&spec.shape),
            ParamRole::RecurrentBias => {
                let hidden = spec.shape[0] / 4;
                let mut t = Tensor::zeros(&spec.shape);
                t.data_mut()[hidden..2 * hidden]
                    .iter_mut()
                    .for_each(|v| *v = 1.0);
                t
            }
        };
        store.insert(spec.name, tensor)?;
    }
    ModelParams::from_store(sizes, arch, store)
}

/// Replaces the word embedding matrix with pretrained rows; rows absent from
/// the embedding file are filled with Glorot-uniform draws.
pub fn apply_pretrained(
    params: &mut ModelParams,
    mut table: EmbeddingTable,
    seed: u64,
) -> Result<()> {
    let current = params.store.get(params.word_embeddings);
    if table.matrix.shape() != current.shape() {
        return Err(Error::TensorShape {
            name: "word_embeddings".into(),
            expected: current.shape().to_vec(),
            found: table.matrix.shape().to_vec(),
        });
    }
    let limit = glorot_limit(current.shape()[0], current.shape()[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    table.initialize_missing(limit, &mut rng);
    *params.store.get_mut(params.word_embeddings) = table.matrix;
    Ok(())
}
