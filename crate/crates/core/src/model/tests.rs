use super::*;
use crate::autodiff::{Graph, Tensor};
use crate::corpus::{build_vocabs, Dataset, Sentence};
use crate::trainer::init_params;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn tiny_sizes() -> LayerSizes {
    LayerSizes {
        word_vocab: 12,
        char_vocab: 10,
        word_emb: 5,
        char_emb: 4,
        char_hidden: 3,
        char_proj: 4,
        word_hidden: 5,
        hidden: 4,
        attn_hidden: 3,
        sent_hidden: 4,
        lm_hidden: 3,
        char_lm_hidden: 3,
    }
}

fn input(words: &[usize], chars: &[&[usize]]) -> EncodedInput {
    EncodedInput {
        word_ids: words.to_vec(),
        char_ids: chars.iter().map(|c| c.to_vec()).collect(),
    }
}

fn values(g: &Graph, ids: &[crate::autodiff::NodeId]) -> Vec<Vec<f64>> {
    ids.iter().map(|&i| g.value(i).data().to_vec()).collect()
}

#[test]
fn zero_cell_stays_at_zero() {
    let p = ModelParams::zeros(tiny_sizes(), Architecture::Attention).unwrap();
    let mut g = Graph::new();
    let cell = CellNodes::bind(&mut g, &p, p.word_fwd);
    let x = g
        .constant(Tensor::vector(vec![
            0.3, -1.0, 2.0, 0.5, 0.1, 0.0, 1.0, 1.0, -2.0,
        ]))
        .unwrap();
    let z = g.constant(Tensor::zeros(&[5])).unwrap();
    let (h, c) = recurrent_step(&mut g, &cell, x, z, z).unwrap();
    assert!(g.value(h).data().iter().all(|&v| v == 0.0));
    assert!(g.value(c).data().iter().all(|&v| v == 0.0));

    let bad = g.constant(Tensor::zeros(&[4])).unwrap();
    assert!(recurrent_step(&mut g, &cell, x, bad, z).is_err());
}

#[test]
fn bias_only_cell_matches_hand_evaluation() {
    let mut p = ModelParams::zeros(tiny_sizes(), Architecture::Attention).unwrap();
    let n = 5;
    // gate blocks: input, forget, output, candidate
    let (bi, bf, bo, bc) = (0.4, 1.0, -0.3, 0.8);
    let b = p.store.get_mut(p.word_fwd.b);
    for k in 0..n {
        b.data_mut()[k] = bi;
        b.data_mut()[n + k] = bf;
        b.data_mut()[2 * n + k] = bo;
        b.data_mut()[3 * n + k] = bc;
    }
    let mut g = Graph::new();
    let cell = CellNodes::bind(&mut g, &p, p.word_fwd);
    let x = g.constant(Tensor::zeros(&[9])).unwrap();
    let z = g.constant(Tensor::zeros(&[5])).unwrap();
    let (h, c) = recurrent_step(&mut g, &cell, x, z, z).unwrap();
    let c_expected = sigmoid(bi) * bc.tanh();
    let h_expected = sigmoid(bo) * c_expected.tanh();
    for k in 0..n {
        assert!((g.value(c).data()[k] - c_expected).abs() < 1e-15);
        assert!((g.value(h).data()[k] - h_expected).abs() < 1e-15);
    }
}

#[test]
fn recurrent_output_is_bounded() {
    let p = init_params(tiny_sizes(), Architecture::Attention, 3).unwrap();
    let mut g = Graph::new();
    let cell = CellNodes::bind(&mut g, &p, p.word_fwd);
    let mut h = g.constant(Tensor::zeros(&[5])).unwrap();
    let mut c = h;
    for step in 0..20 {
        let x = g
            .constant(Tensor::vector(
                (0..9).map(|k| ((k * step) as f64).sin() * 50.0).collect(),
            ))
            .unwrap();
        (h, c) = recurrent_step(&mut g, &cell, x, h, c).unwrap();
        assert!(g.value(h).data().iter().all(|v| v.abs() < 1.0));
    }
}

#[test]
fn zero_params_give_zero_char_vectors_and_states() {
    let p = ModelParams::zeros(tiny_sizes(), Architecture::Attention).unwrap();
    let mut g = Graph::new();
    let enc = forward(
        &mut g,
        &p,
        &input(&[3, 4, 5], &[&[1, 2], &[3], &[4, 5, 6]]),
        None,
    )
    .unwrap();
    for ce in &enc.states.chars {
        assert!(g.value(ce.m).data().iter().all(|&v| v == 0.0));
    }
    for &h in &enc.states.h {
        assert!(g.value(h).data().iter().all(|&v| v == 0.0));
    }
    for &a in &enc.scores.a_hat {
        assert_eq!(g.scalar(a), 0.5);
    }
    assert_eq!(g.scalar(enc.output.y_hat), 0.5);
}

#[test]
fn single_character_and_single_token() {
    let p = init_params(tiny_sizes(), Architecture::Attention, 8).unwrap();
    let mut g = Graph::new();
    let enc = forward(&mut g, &p, &input(&[3], &[&[2]]), None).unwrap();
    let ce = &enc.states.chars[0];
    assert_eq!(ce.fwd.len(), 1);
    assert_eq!(ce.bwd.len(), 1);
    assert_eq!(enc.states.h_fwd.len(), 1);
    assert_eq!(enc.states.h_bwd.len(), 1);

    // one step from the zero state, computed independently
    let mut g2 = Graph::new();
    let cell = CellNodes::bind(&mut g2, &p, p.char_fwd);
    let x = g2.param_row(&p.store, p.char_embeddings, 2).unwrap();
    let z = g2.constant(Tensor::zeros(&[3])).unwrap();
    let (h, _) = recurrent_step(&mut g2, &cell, x, z, z).unwrap();
    assert_eq!(g.value(ce.fwd[0]).data(), g2.value(h).data());
    assert!(g.value(enc.scores.a_hat[0]).item() > 0.0);
    assert_eq!(g.value(enc.output.a_tilde).data(), &[1.0]);

    let mut g3 = Graph::new();
    let nodes = CoreNodes::bind(&mut g3, &p);
    assert!(encode_chars(&mut g3, &p, &nodes, &[]).is_err());
    assert!(forward(&mut g3, &p, &input(&[], &[]), None).is_err());
}

#[test]
fn capitalization_changes_char_vector() {
    let sents = Dataset::new(vec![Sentence::from_token_labels(
        vec!["Red".into(), "red".into()],
        vec![false, false],
    )
    .unwrap()]);
    let (words, chars) = build_vocabs(&sents, 1).unwrap();
    let sizes = LayerSizes {
        word_vocab: words.len(),
        char_vocab: chars.len(),
        ..tiny_sizes()
    };
    let p = init_params(sizes, Architecture::Attention, 2).unwrap();
    let inp = EncodedInput::new(&sents.sentences[0], &words, &chars);
    assert_eq!(inp.word_ids[0], inp.word_ids[1]);
    assert_ne!(inp.char_ids[0], inp.char_ids[1]);
    let mut g = Graph::new();
    let enc = forward(&mut g, &p, &inp, None).unwrap();
    assert_ne!(
        g.value(enc.states.chars[0].m).data(),
        g.value(enc.states.chars[1].m).data()
    );
}

#[test]
fn reversal_swaps_directions_under_mirrored_cells() {
    let mut p = init_params(tiny_sizes(), Architecture::Attention, 4).unwrap();
    let fwd = p.store.get(p.word_fwd.w).clone();
    let fb = p.store.get(p.word_fwd.b).clone();
    *p.store.get_mut(p.word_bwd.w) = fwd;
    *p.store.get_mut(p.word_bwd.b) = fb;
    let words = [3usize, 7, 4, 9];
    let chars: [&[usize]; 4] = [&[1, 2], &[3], &[4, 5, 6], &[7, 1]];
    let rev_words: Vec<usize> = words.iter().rev().copied().collect();
    let rev_chars: Vec<&[usize]> = chars.iter().rev().copied().collect();

    let mut g = Graph::new();
    let a = forward(&mut g, &p, &input(&words, &chars), None).unwrap();
    let b = forward(&mut g, &p, &input(&rev_words, &rev_chars), None).unwrap();
    let n = words.len();
    for i in 0..n {
        assert_eq!(
            g.value(a.states.h_fwd[i]).data(),
            g.value(b.states.h_bwd[n - 1 - i]).data()
        );
        assert_eq!(
            g.value(a.states.h_bwd[i]).data(),
            g.value(b.states.h_fwd[n - 1 - i]).data()
        );
    }
}

#[test]
fn token_scores_depend_only_on_h() {
    let p = init_params(tiny_sizes(), Architecture::Attention, 9).unwrap();
    let mut g = Graph::new();
    let nodes = CoreNodes::bind(&mut g, &p);
    let h = g
        .constant(Tensor::vector(vec![0.1, -0.4, 0.7, 0.2]))
        .unwrap();
    let h2 = g
        .constant(Tensor::vector(vec![0.1, -0.4, 0.7, 0.2]))
        .unwrap();
    let states = WordStates {
        chars: vec![],
        x: vec![],
        h_fwd: vec![],
        h_bwd: vec![],
        h: vec![h, h2],
    };
    let scores = score_tokens(&mut g, &nodes, &states).unwrap();
    assert_eq!(g.scalar(scores.a_hat[0]), g.scalar(scores.a_hat[1]));
}

#[test]
fn token_score_is_monotone_in_output_bias() {
    let mut p = init_params(tiny_sizes(), Architecture::Attention, 9).unwrap();
    let inp = input(&[3, 4], &[&[1], &[2, 3]]);
    let mut prev = vec![0.0, 0.0];
    for bias in [-20.0, -2.0, 0.0, 2.0, 20.0, 40.0] {
        p.store.get_mut(p.attn_out.b).data_mut()[0] = bias;
        let mut g = Graph::new();
        let enc = forward(&mut g, &p, &inp, None).unwrap();
        let cur: Vec<f64> = enc.scores.a_hat.iter().map(|&a| g.scalar(a)).collect();
        assert!(cur.iter().zip(&prev).all(|(c, p)| c >= p));
        assert!(cur.iter().all(|&c| c > 0.0 && c <= 1.0));
        prev = cur;
    }
    assert!(prev.iter().all(|&c| c > 1.0 - 1e-12));
}

fn normalize(a_hat: &[f64]) -> Vec<f64> {
    let p = ModelParams::zeros(tiny_sizes(), Architecture::Attention).unwrap();
    let mut g = Graph::new();
    let nodes = CoreNodes::bind(&mut g, &p);
    let a_hat_vec = g.constant(Tensor::vector(a_hat.to_vec())).unwrap();
    let h: Vec<_> = (0..a_hat.len())
        .map(|i| {
            g.constant(Tensor::vector(vec![i as f64, 1.0, -1.0, 0.5]))
                .unwrap()
        })
        .collect();
    let states = WordStates {
        chars: vec![],
        x: vec![],
        h_fwd: vec![],
        h_bwd: vec![],
        h,
    };
    let scores = TokenScores {
        e: vec![],
        a_hat: vec![],
        a_hat_vec,
    };
    let out = attend_and_classify(&mut g, &p, &nodes, &states, &scores).unwrap();
    g.value(out.a_tilde).data().to_vec()
}

#[test]
fn attention_normalization_examples() {
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    assert!(close(&normalize(&[0.2, 0.2, 0.6]), &[0.2, 0.2, 0.6]));
    for c in [0.01, 0.3, 0.99] {
        assert!(close(&normalize(&[c; 4]), &[0.25; 4]));
    }
    assert!(close(&normalize(&[0.1, 0.3]), &[0.25, 0.75]));
}

#[test]
fn zero_lm_heads_are_uniform() {
    let p = ModelParams::zeros(tiny_sizes(), Architecture::Attention).unwrap();
    let mut g = Graph::new();
    let enc = forward(
        &mut g,
        &p,
        &input(&[3, 4, 5, 6], &[&[1], &[2], &[3], &[4]]),
        None,
    )
    .unwrap();
    let lm = word_lm_heads(&mut g, &p, &enc.states).unwrap();
    let v = tiny_sizes().word_vocab as f64;
    for &row in lm.fwd.iter().chain(&lm.bwd) {
        assert!(g
            .value(row)
            .data()
            .iter()
            .all(|lp| (lp.exp() - 1.0 / v).abs() < 1e-15));
    }
    let clm = char_lm_head(&mut g, &p, &enc.states).unwrap();
    assert_eq!(clm.iter().map(|(i, _)| *i).collect::<Vec<_>>(), vec![1, 2]);
    for (_, row) in clm {
        assert!(g
            .value(row)
            .data()
            .iter()
            .all(|lp| (lp.exp() - 1.0 / v).abs() < 1e-15));
    }
}

#[test]
fn lm_rows_are_distributions_and_forward_head_sees_only_prefix() {
    let p = init_params(tiny_sizes(), Architecture::Attention, 21).unwrap();
    let chars: [&[usize]; 5] = [&[1, 2], &[3], &[4, 5], &[6], &[7, 8]];
    let mut g = Graph::new();
    let enc = forward(&mut g, &p, &input(&[3, 4, 5, 6, 7], &chars), None).unwrap();
    let lm = word_lm_heads(&mut g, &p, &enc.states).unwrap();
    for &row in lm.fwd.iter().chain(&lm.bwd) {
        let total: f64 = g.value(row).data().iter().map(|lp| lp.exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    // edit token i+2 = 3 (word and characters)
    let edited_chars: [&[usize]; 5] = [&[1, 2], &[3], &[4, 5], &[9, 9, 9], &[7, 8]];
    let mut g2 = Graph::new();
    let enc2 = forward(&mut g2, &p, &input(&[3, 4, 5, 11, 7], &edited_chars), None).unwrap();
    let lm2 = word_lm_heads(&mut g2, &p, &enc2.states).unwrap();
    for i in 0..=2 {
        assert_eq!(
            g.value(lm.fwd[i]).data(),
            g2.value(lm2.fwd[i]).data(),
            "position {i}"
        );
    }
    assert_ne!(g.value(lm.fwd[3]).data(), g2.value(lm2.fwd[3]).data());
}

#[test]
fn char_lm_ignores_the_middle_word() {
    let p = init_params(tiny_sizes(), Architecture::Attention, 13).unwrap();
    let mut g = Graph::new();
    let a = forward(
        &mut g,
        &p,
        &input(&[3, 4, 5], &[&[1, 2], &[3, 4], &[5]]),
        None,
    )
    .unwrap();
    let b = forward(
        &mut g,
        &p,
        &input(&[3, 9, 5], &[&[1, 2], &[8, 8, 7], &[5]]),
        None,
    )
    .unwrap();
    let pa = char_lm_position(&mut g, &p, &a.states, 1).unwrap();
    let pb = char_lm_position(&mut g, &p, &b.states, 1).unwrap();
    assert_eq!(g.value(pa).data(), g.value(pb).data());
    assert!(char_lm_position(&mut g, &p, &a.states, 0).is_err());
    assert!(char_lm_position(&mut g, &p, &a.states, 2).is_err());

    let two = forward(&mut g, &p, &input(&[3, 4], &[&[1], &[2]]), None).unwrap();
    assert!(char_lm_head(&mut g, &p, &two.states).unwrap().is_empty());
}

#[test]
fn omitting_lm_heads_leaves_inference_unchanged() {
    let p = init_params(tiny_sizes(), Architecture::Attention, 17).unwrap();
    let core = p.without_lm_heads();
    let inp = input(&[3, 4, 5], &[&[1, 2], &[3, 4], &[5]]);
    let mut g1 = Graph::new();
    let a = forward(&mut g1, &p, &inp, None).unwrap();
    let mut g2 = Graph::new();
    let b = forward(&mut g2, &core, &inp, None).unwrap();
    assert_eq!(values(&g1, &a.scores.a_hat), values(&g2, &b.scores.a_hat));
    assert_eq!(g1.value(a.output.a_tilde), g2.value(b.output.a_tilde));
    assert_eq!(g1.value(a.output.s), g2.value(b.output.s));
    assert_eq!(g1.value(a.output.y_hat), g2.value(b.output.y_hat));
    assert!(word_lm_heads(&mut g2, &core, &b.states).is_err());
}

#[test]
fn all_ones_masks_match_inference_path() {
    let p = init_params(tiny_sizes(), Architecture::Attention, 23).unwrap();
    let inp = input(&[3, 4, 5], &[&[1, 2], &[3, 4], &[5]]);
    let masks = DropoutMasks {
        word: vec![Tensor::filled(&[5], 1.0); 3],
        hidden: vec![Tensor::filled(&[4], 1.0); 3],
    };
    let mut g1 = Graph::new();
    let a = forward(&mut g1, &p, &inp, None).unwrap();
    let mut g2 = Graph::new();
    let b = forward(&mut g2, &p, &inp, Some(&masks)).unwrap();
    assert_eq!(g1.value(a.output.y_hat), g2.value(b.output.y_hat));
    assert_eq!(values(&g1, &a.states.h), values(&g2, &b.states.h));

    let short = DropoutMasks {
        word: masks.word[..2].to_vec(),
        hidden: masks.hidden.clone(),
    };
    assert!(forward(&mut g2, &p, &inp, Some(&short)).is_err());
}

#[test]
fn last_state_architecture_reads_final_states() {
    let p = init_params(tiny_sizes(), Architecture::LastState, 29).unwrap();
    let mut g = Graph::new();
    let enc = forward(&mut g, &p, &input(&[3, 4, 5], &[&[1], &[2], &[3]]), None).unwrap();
    let y = g.scalar(enc.output.y_hat);
    assert!(y > 0.0 && y < 1.0);

    // recompute the head by hand from [h→_N; h←_1]
    let mut g2 = Graph::new();
    let last = g2.constant(g.value(enc.states.h_fwd[2]).clone()).unwrap();
    let first = g2.constant(g.value(enc.states.h_bwd[0]).clone()).unwrap();
    let cat = g2.concat(&[last, first]).unwrap();
    let w = g2.param(&p.store, p.sent_hidden.w);
    let b = g2.param(&p.store, p.sent_hidden.b);
    let z = g2.matmul(w, cat).unwrap();
    let z = g2.add(z, b).unwrap();
    let z = g2.tanh(z).unwrap();
    let w = g2.param(&p.store, p.sent_out.w);
    let b = g2.param(&p.store, p.sent_out.b);
    let o = g2.matmul(w, z).unwrap();
    let o = g2.add(o, b).unwrap();
    let o = g2.sigmoid(o).unwrap();
    assert_eq!(g2.scalar(o), y);
}

#[test]
fn lm_targets_include_boundaries() {
    let inp = input(&[5], &[&[1]]);
    assert_eq!(inp.forward_lm_targets(), vec![crate::corpus::EOS]);
    assert_eq!(inp.backward_lm_targets(), vec![crate::corpus::BOS]);
    let inp = input(&[5, 6, 7], &[&[1], &[1], &[1]]);
    assert_eq!(inp.forward_lm_targets(), vec![6, 7, crate::corpus::EOS]);
    assert_eq!(inp.backward_lm_targets(), vec![crate::corpus::BOS, 5, 6]);
}
