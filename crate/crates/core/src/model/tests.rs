use super::*;
use crate::graph::{node_key, NodeKind};
use crate::ingest::{NewsRecord, NULL_TAG};
use crate::nn::{dot, gradient_check, gradient_check_steps, lstm_sequence};
use crate::skipgram::EmbeddingTable;
use rand::Rng;

/// Small bank: 8 news over 3 topics, 6 tags, 2 level-1 categories; words
/// `w0..w5` are known, `zz` is not.
pub(crate) fn fixture(cfg: &ModelConfig, seed: u64) -> (NewsBank, Vec<NewsRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = EmbeddingTable::new(cfg.dim);
    let mut words = EmbeddingTable::new(cfg.word_dim);
    let mut rand_vec = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    for t in 0..6 {
        nodes.insert(&node_key(NodeKind::Tag, &format!("g{t}")), &rand_vec(cfg.dim)).unwrap();
    }
    for c in ["a", "b"] {
        nodes.insert(&node_key(NodeKind::Cat1, c), &rand_vec(cfg.dim)).unwrap();
        nodes.insert(&node_key(NodeKind::Cat2, &format!("{c}2")), &rand_vec(cfg.dim)).unwrap();
    }
    for w in 0..6 {
        words.insert(&format!("w{w}"), &rand_vec(cfg.word_dim)).unwrap();
    }
    let news: Vec<NewsRecord> = (0..8)
        .map(|i| {
            let cat = if i % 2 == 0 { "a" } else { "b" };
            let mut tag_ids: Vec<String> = (0..1 + i % 3).map(|k| format!("g{}", (i + k) % 6)).collect();
            tag_ids.resize(9, NULL_TAG.into());
            NewsRecord {
                news_id: format!("n{i}"),
                topic_id: format!("t{}", i % 3),
                content: (0..2 + i % 4).map(|k| if k == 1 { "zz".into() } else { format!("w{}", (i + k) % 6) }).collect(),
                cat1_id: cat.into(),
                cat2_id: format!("{cat}2"),
                poster_id: "p".into(),
                tag_ids,
            }
        })
        .collect();
    (NewsBank::build(&news, &nodes, &words, cfg).unwrap(), news)
}

fn small_cfg() -> ModelConfig {
    ModelConfig {
        dim: 8,
        word_dim: 6,
        max_words: 4,
        filters: 4,
        width: 3,
        hidden: 5,
        attn_dim: 3,
        fc_hidden: 6,
        ensi_depth: 2,
        seed: 11,
        ..ModelConfig::default()
    }
}

fn sample(rng: &mut ChaCha8Rng, n_news: usize) -> SampleInput {
    let mut item = || {
        let news = rng.gen_range(0..n_news);
        let depth = rng.gen_range(0..=2);
        NewsRef {
            news,
            env: (0..depth).map(|k| (news + 1 + k) % n_news).collect(),
        }
    };
    let candidate = item();
    let history = (0..HISTORY_LEN).map(|_| item()).collect();
    SampleInput {
        candidate,
        history,
        concentration: (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)),
        label: rng.gen_range(0..CLASSES),
    }
}

fn zeroed(mut p: ModelParams) -> ModelParams {
    for b in p.parameters_mut() {
        b.value.fill(0.0);
    }
    p
}

#[test]
fn news_input_layout() {
    let cfg = ModelConfig {
        max_words: 64,
        ..small_cfg()
    };
    let (bank, news) = fixture(&cfg, 1);
    let p = ModelParams::new(cfg.clone()).unwrap();
    // n3 has 1 + 3 % 3 = 1 real tag
    let m = bank.inputs[3].matrix(&p).unwrap();
    assert_eq!(m.len(), 75 * cfg.dim);
    assert_eq!(news[3].real_tags().count(), 1);
    for col in 65..73 {
        assert!(m[col * cfg.dim..(col + 1) * cfg.dim].iter().all(|v| *v == 0.0));
    }
    assert!(m[64 * cfg.dim..65 * cfg.dim].iter().any(|v| *v != 0.0));
    // the unknown word in slot 1 and all padding slots are zero columns
    assert!(!bank.inputs[3].known[1]);
    assert!(m[cfg.dim..2 * cfg.dim].iter().all(|v| *v == 0.0));
    assert!(m[5 * cfg.dim..64 * cfg.dim].iter().all(|v| *v == 0.0));
}

#[test]
fn empty_content_and_unresolvable_nodes() {
    let cfg = small_cfg();
    let (_, news) = fixture(&cfg, 1);
    let mut nodes = EmbeddingTable::new(cfg.dim);
    let words = EmbeddingTable::new(cfg.word_dim);
    let mut empty = news[0].clone();
    empty.content.clear();
    assert!(matches!(
        build_news_input(&empty, &nodes, &words, &cfg),
        Err(Error::Coverage(_))
    ));
    for t in empty.real_tags() {
        nodes.insert(&node_key(NodeKind::Tag, t), &vec![0.5; cfg.dim]).unwrap();
    }
    nodes.insert(&node_key(NodeKind::Cat1, "a"), &vec![0.5; cfg.dim]).unwrap();
    assert!(build_news_input(&empty, &nodes, &words, &cfg).is_err());
    nodes.insert(&node_key(NodeKind::Cat2, "a2"), &vec![0.5; cfg.dim]).unwrap();
    let input = build_news_input(&empty, &nodes, &words, &cfg).unwrap();
    assert!(input.words.iter().all(|v| *v == 0.0));
    assert!(input.known.iter().all(|k| !k));
}

#[test]
fn word_space_map_values() {
    let cfg = small_cfg();
    let (bank, _) = fixture(&cfg, 2);
    let p = ModelParams::new(cfg.clone()).unwrap();
    let z = zeroed(p.clone());
    let input = &bank.inputs[0];
    assert!(word_space_map(&z, &input.words, &input.known).unwrap().iter().all(|v| *v == 0.0));
    let big = {
        let mut q = p.clone();
        q.word_map.value.data_mut().iter_mut().for_each(|v| *v *= 50.0);
        q
    };
    assert!(word_space_map(&big, &input.words, &input.known)
        .unwrap()
        .iter()
        .all(|v| *v > -1.0 && *v < 1.0));
    assert!(word_space_map(&p, &input.words[1..], &input.known).is_err());
}

#[test]
fn word_space_map_gradient() {
    let cfg = small_cfg();
    let (bank, _) = fixture(&cfg, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..10 {
        let p = ModelParams::new(ModelConfig { seed, ..cfg.clone() }).unwrap();
        let input = &bank.inputs[(seed as usize) % bank.len()];
        let r: Vec<f64> = (0..cfg.max_words * cfg.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = word_space_map(&p, &input.words, &input.known).unwrap();
        let (dim, wd) = (cfg.dim, cfg.word_dim);
        let mut dm = vec![0.0; dim * wd];
        let mut db = vec![0.0; dim];
        for j in (0..cfg.max_words).filter(|&j| input.known[j]) {
            let dz: Vec<f64> = (0..dim).map(|k| r[j * dim + k] * (1.0 - y[j * dim + k].powi(2))).collect();
            crate::nn::axpy(1.0, &dz, &mut db);
            outer_acc(&mut dm, &dz, &input.words[j * wd..(j + 1) * wd]);
        }
        let fm = |v: &[f64]| {
            let mut q = p.clone();
            q.word_map.value.data_mut().copy_from_slice(v);
            dot(&word_space_map(&q, &input.words, &input.known).unwrap(), &r)
        };
        let fb = |v: &[f64]| {
            let mut q = p.clone();
            q.word_bias.value.data_mut().copy_from_slice(v);
            dot(&word_space_map(&q, &input.words, &input.known).unwrap(), &r)
        };
        assert!(gradient_check(fm, &dm, p.word_map.value(), 1e-5) < 1e-4);
        assert!(gradient_check(fb, &db, p.word_bias.value(), 1e-5) < 1e-4);
    }
}

#[test]
fn news_representation_shapes() {
    let cfg = small_cfg();
    let p = zeroed(ModelParams::new(cfg.clone()).unwrap());
    let n = cfg.channels() * cfg.columns() * cfg.dim;
    let (rep, ..) = p.news_representation(&vec![0.3; n]).unwrap();
    assert_eq!(rep, vec![0.0; cfg.filters]);
    let mut q = p.clone();
    q.conv_bias.value.data_mut().copy_from_slice(&[0.5, -0.5, 0.25, 0.0]);
    let (rep, ..) = q.news_representation(&vec![0.0; n]).unwrap();
    assert_eq!(rep, vec![0.5, 0.0, 0.25, 0.0]);
    assert!(p.news_representation(&vec![0.0; n - cfg.columns() * cfg.dim]).is_err());

    for (depth, channels) in [(1, 2), (5, 6), (9, 10)] {
        let p = ModelParams::new(ModelConfig { ensi_depth: depth, ..cfg.clone() }).unwrap();
        assert_eq!(p.conv_filters.value.shape()[1], channels);
    }
}

#[test]
fn user_representation_variants() {
    let cfg = ModelConfig {
        attention: false,
        ..small_cfg()
    };
    let p = ModelParams::new(cfg.clone()).unwrap();
    assert!(p.attention.is_none());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let hist: Vec<Vec<f64>> = (0..HISTORY_LEN)
        .map(|_| (0..cfg.filters).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let cand = vec![0.2; cfg.filters];
    let (rep, _) = p.user_representation(&hist, &cand, (0.3, 0.4)).unwrap();
    let (hs, _) = lstm_sequence(&p.lstm, &hist).unwrap();
    assert_eq!(&rep[..cfg.hidden], &hs[HISTORY_LEN - 1][..]);
    assert_eq!(&rep[cfg.hidden..], &[0.3, 0.4]);

    let no_gf = ModelParams::new(ModelConfig { concentration: false, ..small_cfg() }).unwrap();
    let (rep, _) = no_gf.user_representation(&hist, &cand, (0.3, 0.4)).unwrap();
    assert_eq!(&rep[cfg.hidden..], &[0.0, 0.0]);

    let z = zeroed(ModelParams::new(small_cfg()).unwrap());
    let (rep, _) = z.user_representation(&hist, &cand, (0.3, 0.4)).unwrap();
    assert!(rep[..cfg.hidden].iter().all(|v| *v == 0.0));
    assert!(p.user_representation(&hist[..4], &cand, (0.0, 0.0)).is_err());
}

#[test]
fn head_probabilities() {
    let cfg = small_cfg();
    let p = ModelParams::new(cfg.clone()).unwrap();
    let user = vec![0.4; cfg.user_dim()];
    let news = vec![0.7; cfg.filters];
    let z = zeroed(p.clone());
    assert!(z.predict_probs(&user, &news).unwrap().iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
    let probs = p.predict_probs(&user, &news).unwrap();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(probs.iter().all(|v| *v > 0.0));
    let argmax = |v: &[f64]| (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    let mut shifted = p.clone();
    shifted.fc2_b.value.data_mut().iter_mut().for_each(|b| *b += 3.7);
    assert_eq!(argmax(&shifted.predict_probs(&user, &news).unwrap()), argmax(&probs));
}

#[test]
fn similarity_matrix() {
    let cfg = small_cfg();
    let (bank, _) = fixture(&cfg, 5);
    assert_eq!(batch_similarity(&bank, &[2]), vec![0.0]);
    // n0 and n3 share topic t0
    assert_eq!(batch_similarity(&bank, &[0, 3]), vec![0.0, 1.0, 1.0, 0.0]);
    let mut lonely = bank.clone();
    lonely.attrs[0] = NewsAttrs {
        topic: "x".into(),
        cat1: "x".into(),
        tags: vec!["x".into()],
    };
    assert_eq!(batch_similarity(&lonely, &[0, 1]), vec![0.0; 4]);
}

fn total_loss(p: &ModelParams, bank: &NewsBank, batch: &[SampleInput], loss: &LossConfig) -> f64 {
    let probs: Vec<Vec<f64>> = batch.iter().map(|s| p.predict(bank, s).unwrap()).collect();
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let cands: Vec<usize> = batch.iter().map(|s| s.candidate.news).collect();
    batch_loss(&probs, &labels, &batch_similarity(bank, &cands), loss).unwrap().0.total
}

/// Runs the batch forward and backward, leaving gradients in `p`.
fn accumulate(p: &mut ModelParams, bank: &NewsBank, batch: &[SampleInput], loss: &LossConfig) {
    let caches: Vec<SampleCache> = batch.iter().map(|s| p.forward(bank, s).unwrap()).collect();
    let probs: Vec<Vec<f64>> = caches.iter().map(|c| c.probs.clone()).collect();
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let cands: Vec<usize> = batch.iter().map(|s| s.candidate.news).collect();
    let (_, grads) = batch_loss(&probs, &labels, &batch_similarity(bank, &cands), loss).unwrap();
    p.zero_grad();
    for (c, g) in caches.iter().zip(&grads) {
        p.backward(bank, c, g);
    }
}

#[test]
fn end_to_end_gradient_every_block() {
    let loss = LossConfig {
        c1: 0.1,
        c2: 0.5,
        alpha: class_weights(&[40, 20, 10, 5, 3, 2]),
    };
    for (attention, concentration) in [(true, true), (false, false)] {
        for seed in 0..10 {
            let cfg = ModelConfig {
                attention,
                concentration,
                seed,
                ..small_cfg()
            };
            let (bank, _) = fixture(&cfg, 100 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
            let batch: Vec<SampleInput> = (0..3).map(|_| sample(&mut rng, bank.len())).collect();
            let mut p = ModelParams::new(cfg).unwrap();
            // fan-in scaled init plus random biases; attention is widened
            // because at init its scores barely vary and its gradients sit at
            // the round-off floor
            for b in [&mut p.word_bias, &mut p.conv_bias, &mut p.fc1_b, &mut p.fc2_b] {
                b.value.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.3..0.3));
            }
            if let Some(a) = &mut p.attention {
                for b in [&mut a.wq, &mut a.wk, &mut a.v] {
                    b.value.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-2.0..2.0));
                }
            }
            accumulate(&mut p, &bank, &batch, &loss);
            let names: Vec<&str> = p.parameters().iter().map(|(n, _)| *n).collect();
            for (k, name) in names.iter().enumerate() {
                let (grad, point) = {
                    let blk = p.parameters()[k].1;
                    (blk.grad.data().to_vec(), blk.value.data().to_vec())
                };
                let f = |v: &[f64]| {
                    let mut q = p.clone();
                    q.parameters_mut()[k].value.data_mut().copy_from_slice(v);
                    total_loss(&q, &bank, &batch, &loss)
                };
                let err = gradient_check_steps(f, &grad, &point, &[1e-5, 1e-4, 1e-3]);
                assert!(
                    err < 1e-4,
                    "block {name} seed {seed} attention {attention}: relative error {err}"
                );
            }
        }
    }
}

#[test]
fn vanilla_variant_has_no_dangling_parameters() {
    let cfg = ModelConfig {
        attention: false,
        concentration: false,
        ..small_cfg()
    };
    let (bank, _) = fixture(&cfg, 6);
    let mut p = ModelParams::new(cfg).unwrap();
    assert!(p.parameters().iter().all(|(n, _)| !n.starts_with("attn")));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let batch: Vec<SampleInput> = (0..3).map(|_| sample(&mut rng, bank.len())).collect();
    accumulate(&mut p, &bank, &batch, &LossConfig::default());
    for (name, blk) in p.parameters() {
        if name != "lstm_b" || blk.grad.data().iter().any(|g| *g != 0.0) {
            assert!(blk.grad.data().iter().any(|g| *g != 0.0), "{name} receives no gradient");
        }
    }
}

#[test]
fn forward_is_pure() {
    let cfg = small_cfg();
    let (bank, _) = fixture(&cfg, 7);
    let p = ModelParams::new(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = sample(&mut rng, bank.len());
    let a = p.predict(&bank, &s).unwrap();
    let b = p.predict(&bank, &s).unwrap();
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn checkpoint_round_trip() {
    let cfg = ModelConfig {
        ensi_depth: 9,
        attention: false,
        ..small_cfg()
    };
    let p = ModelParams::new(cfg).unwrap();
    let ck = p.to_checkpoint();
    assert_eq!(ck.meta("channels"), Some("10"));
    assert_eq!(ck.tensor("conv_filters").unwrap().shape()[1], 10);
    let back = ModelParams::from_checkpoint(&Checkpoint::from_bytes(&ck.to_bytes()).unwrap()).unwrap();
    assert_eq!(back, p);
    let mut broken = ck.clone();
    broken.tensors.pop();
    assert!(ModelParams::from_checkpoint(&broken).is_err());
}






