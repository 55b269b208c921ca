//! Randomized invariants, each a function of one seed so the proptest suite
//! and the acceptance harness run the same checks.

#![allow(dead_code)]

use pamn_core::attention::run_progressive_attention;
use pamn_core::belief::predict;
use pamn_core::checkpoint::Checkpoint;
use pamn_core::encoding::{build_dual_memory, embed_qa, ffn};
use pamn_core::fusion::{dmf_weights, fuse};
use pamn_core::synth::{evidence_step, generate, oracle_answer, SynthWorld};
use pamn_core::tape::Tape;
use pamn_core::tensor::argmax;
use pamn_core::train::{train, TrainOutcome};
use pamn_core::{forward, EpisodeFeatures, ModelConfig, SynthSpec, Tensor, TrainConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{random_config, random_episode, random_params};

pub type Property = fn(u64) -> Result<(), TestCaseError>;

fn values(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::new(vec![rows, cols], values(rng, rows * cols, scale)).unwrap()
}

fn fixture(seed: u64) -> (EpisodeFeatures, pamn_core::ModelParams, ModelConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ep = random_episode(&mut rng, seed as usize);
    let cfg = random_config(&mut rng);
    let params = random_params(&ep, &cfg, &mut rng);
    (ep, params, cfg)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn tiny_outcome(seed: u64, data: &[pamn_core::EpisodeRecord]) -> TrainOutcome {
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 2,
        seed,
        model: ModelConfig {
            memory_dim: 3,
            hops_mu: 1,
            hops_mg: 1,
            pool_size: 3,
            pool_stride: 2,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    train(&data[..3], &data[3..], &cfg).unwrap()
}

pub fn construction_requires_matching_length(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let shape: Vec<usize> = (0..pick.random_range(0..4)).map(|_| pick.random_range(1usize..5)).collect();
    let extra = pick.random_range(0usize..3);
    let n: usize = shape.iter().product();
    let ok = Tensor::new(shape.clone(), vec![0.5; n]);
    prop_assert!(ok.is_ok());
    prop_assert_eq!(ok.unwrap().data().len(), n);
    if extra > 0 {
        prop_assert!(Tensor::new(shape.clone(), vec![0.5; n + extra]).is_err());
    }
    let mut empty = shape;
    empty.push(0);
    prop_assert!(Tensor::new(empty, vec![]).is_err());
    Ok(())
}

pub fn softmax_sums_to_one_and_ignores_shifts(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let rows = pick.random_range(1usize..5);
    let cols = pick.random_range(1usize..9);
    let shift = pick.random_range(-50.0f64..50.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = matrix(&mut rng, rows, cols, 30.0);
    let z = x.softmax(1).unwrap();
    for row in z.rows() {
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(row.iter().all(|&p| p >= 0.0));
    }
    let shifted = x.map(|v| v + shift).softmax(1).unwrap();
    prop_assert!(close(z.data(), shifted.data(), 1e-9));
    Ok(())
}

pub fn softmax_is_monotone_in_each_score(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let n = pick.random_range(2usize..9);
    let bump = pick.random_range(1e-3f64..5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = values(&mut rng, n, 5.0);
    let i = rng.random_range(0..n);
    let before = Tensor::vector(x.clone()).softmax(0).unwrap();
    let mut y = x;
    y[i] += bump;
    let after = Tensor::vector(y).softmax(0).unwrap();
    prop_assert!(after.data()[i] > before.data()[i]);
    Ok(())
}

pub fn pooling_yields_ceil_rows(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let t = pick.random_range(1usize..=64);
    let stride = pick.random_range(1..=t);
    let size = pick.random_range(1usize..=64);
    let cols = pick.random_range(1usize..4);
    let x = Tensor::full(&[t, cols], 1.0);
    let p = x.avg_pool_1d(size, stride).unwrap();
    prop_assert_eq!(p.shape(), &[t.div_ceil(stride), cols][..]);
    prop_assert!(p.data().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    Ok(())
}

pub fn ops_stay_finite_and_pure(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let m = pick.random_range(1usize..6);
    let k = pick.random_range(1usize..6);
    let n = pick.random_range(1usize..6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = matrix(&mut rng, m, k, 10.0);
    let b = matrix(&mut rng, k, n, 10.0);
    let run = || {
        let c = a.matmul(&b).unwrap();
        let s = c.softmax(1).unwrap();
        let r = c.relu().add(&s).unwrap().normalize_last();
        let p = r.avg_pool_1d(2, 1).unwrap();
        let t = p.transpose().unwrap().sum_axis(0).unwrap();
        vec![c, s, r, p, t]
    };
    let first = run();
    for t in &first {
        prop_assert!(t.is_finite());
        prop_assert_eq!(t.data().len(), t.shape().iter().product::<usize>());
    }
    let second = run();
    for (x, y) in first.iter().zip(&second) {
        prop_assert_eq!(
            x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            y.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
    Ok(())
}

pub fn tape_gradients_match_shapes_and_finite_differences(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let m = pick.random_range(1usize..4);
    let k = pick.random_range(1usize..4);
    let n = pick.random_range(2usize..4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = matrix(&mut rng, m, k, 1.0);
    let b = matrix(&mut rng, k, n, 1.0);
    let label = rng.random_range(0..n);
    let loss_of = |a: &Tensor| -> f64 {
        let tape = Tape::new();
        let x = tape.leaf(a.clone()).matmul(tape.leaf(b.clone())).unwrap();
        let h = x.relu().add(x.scale(0.3)).unwrap().sum_axis(0).unwrap();
        h.normalize_last().scale(2.0).cross_entropy(label).unwrap().value().item().unwrap()
    };
    let tape = Tape::new();
    let av = tape.leaf(a.clone());
    let bv = tape.leaf(b.clone());
    let x = av.matmul(bv).unwrap();
    let h = x.relu().add(x.scale(0.3)).unwrap().sum_axis(0).unwrap();
    let loss = h.normalize_last().scale(2.0).cross_entropy(label).unwrap();
    let grads = tape.backward(loss).unwrap();
    let ga = grads.wrt(av);
    prop_assert_eq!(ga.shape(), a.shape());
    let gb = grads.wrt(bv);
    prop_assert_eq!(gb.shape(), b.shape());
    let step = 1e-5;
    for i in 0..a.numel() {
        let mut plus = a.data().to_vec();
        let mut minus = a.data().to_vec();
        plus[i] += step;
        minus[i] -= step;
        let fd = (loss_of(&Tensor::new(a.shape().to_vec(), plus).unwrap())
            - loss_of(&Tensor::new(a.shape().to_vec(), minus).unwrap()))
            / (2.0 * step);
        // ReLU kinks inside the stencil break the finite difference.
        let near_kink = x.value().data().iter().any(|v| v.abs() < 1e-4);
        if !near_kink {
            let rel = (ga.data()[i] - fd).abs() / ga.data()[i].abs().max(fd.abs()).max(1e-6);
            prop_assert!(rel <= 1e-4, "coordinate {} analytic {} numeric {}", i, ga.data()[i], fd);
        }
    }
    Ok(())
}

pub fn shared_embedding_maps_equal_inputs_equally(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let dq = pick.random_range(1usize..7);
    let d = pick.random_range(1usize..7);
    let slot = pick.random_range(0usize..5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut answers = matrix(&mut rng, 5, dq, 1.0).to_rows();
    let q = values(&mut rng, dq, 1.0);
    answers[slot] = q.clone();
    let tape = Tape::new();
    let (u, g) = embed_qa(
        tape.leaf(Tensor::vector(q)),
        tape.leaf(Tensor::from_rows(&answers).unwrap()),
        tape.leaf(matrix(&mut rng, dq, d, 1.0)),
        tape.leaf(Tensor::vector(values(&mut rng, d, 1.0))),
    )
    .unwrap();
    let (u, g) = (u.value(), g.value());
    prop_assert_eq!(u.data(), g.row(slot));
    Ok(())
}

pub fn ffn_commutes_with_row_permutations(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let t = pick.random_range(1usize..10);
    let din = pick.random_range(1usize..6);
    let h = pick.random_range(1usize..6);
    let d = pick.random_range(1usize..6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = matrix(&mut rng, t, din, 1.0);
    let (w1, b1) = (matrix(&mut rng, din, h, 1.0), Tensor::vector(values(&mut rng, h, 1.0)));
    let (w2, b2) = (matrix(&mut rng, h, d, 1.0), Tensor::vector(values(&mut rng, d, 1.0)));
    let mut perm: Vec<usize> = (0..t).collect();
    for i in (1..t).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let rows = x.to_rows();
    let permuted = Tensor::from_rows(&perm.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>()).unwrap();
    let tape = Tape::new();
    let run = |x: &Tensor| {
        ffn(tape.leaf(x.clone()), tape.leaf(w1.clone()), tape.leaf(b1.clone()), tape.leaf(w2.clone()), tape.leaf(b2.clone()))
            .unwrap()
            .value()
    };
    let out = run(&x);
    let out_p = run(&permuted);
    for (j, &i) in perm.iter().enumerate() {
        prop_assert_eq!(out_p.row(j), out.row(i));
    }
    Ok(())
}

pub fn dual_memory_banks_have_pooled_shape(seed: u64) -> Result<(), TestCaseError> {
    let (ep, params, cfg) = fixture(seed);
    let cfg = ModelConfig { video_only: false, subtitle_only: false, ..cfg };
    let params = if params.check_compatible(&cfg).is_ok() { params } else {
        random_params(&ep, &cfg, &mut ChaCha8Rng::seed_from_u64(seed))
    };
    let tape = Tape::new();
    let vars = params.on_tape(&tape);
    let mem = build_dual_memory(&tape, &ep, &vars, &cfg).unwrap();
    let want = vec![ep.seq_len().div_ceil(cfg.pool_stride), cfg.memory_dim];
    prop_assert_eq!(mem.video.unwrap().shape(), want.clone());
    prop_assert_eq!(mem.subtitle.unwrap().shape(), want);
    Ok(())
}

pub fn attention_stages_keep_shape_discipline(seed: u64) -> Result<(), TestCaseError> {
    let (ep, params, cfg) = fixture(seed);
    let tape = Tape::new();
    let vars = params.on_tape(&tape);
    let (u, g) = embed_qa(
        tape.leaf(ep.question.clone()),
        tape.leaf(ep.answers.clone()),
        vars.get("embed.w_ug").unwrap(),
        vars.get("embed.b_ug").unwrap(),
    )
    .unwrap();
    let fresh = build_dual_memory(&tape, &ep, &vars, &cfg).unwrap();
    let out = run_progressive_attention(fresh, u, g, &vars, &cfg).unwrap();
    let n = ep.seq_len().div_ceil(cfg.pool_stride);
    for (_, bank) in out.after_question.banks() {
        prop_assert_eq!(bank.shape(), vec![n, cfg.memory_dim]);
    }
    for (_, bank) in out.after_answers.banks() {
        prop_assert_eq!(bank.shape(), vec![5, n, cfg.memory_dim]);
    }
    Ok(())
}

pub fn every_attention_row_is_a_distribution(seed: u64) -> Result<(), TestCaseError> {
    let (ep, params, cfg) = fixture(seed);
    let p = forward(&ep, &params, &cfg).unwrap();
    let check = |row: &[f64]| (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9 && row.iter().all(|&a| a >= 0.0);
    for h in &p.trace.attention.question_hops {
        for row in [&h.video, &h.subtitle].into_iter().flatten() {
            prop_assert!(check(row));
        }
    }
    for h in &p.trace.attention.answer_hops {
        for rows in [&h.video, &h.subtitle].into_iter().flatten() {
            prop_assert_eq!(rows.len(), 5);
            for row in rows {
                prop_assert!(check(row));
            }
        }
    }
    prop_assert!(check(&p.trace.fusion.question_stage));
    for pair in &p.trace.fusion.answer_stage {
        prop_assert!(check(pair));
    }
    Ok(())
}

pub fn fusion_is_convex_and_swap_equivariant(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let d = pick.random_range(1usize..8);
    let per_answer = pick.random_bool(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape: &[usize] = if per_answer { &[5, d] } else { &[d] };
    let n = shape.iter().product();
    let tape = Tape::new();
    let u = tape.leaf(Tensor::vector(values(&mut rng, d, 2.0)));
    let ov = tape.leaf(Tensor::new(shape.to_vec(), values(&mut rng, n, 2.0)).unwrap());
    let os = tape.leaf(Tensor::new(shape.to_vec(), values(&mut rng, n, 2.0)).unwrap());
    let w = dmf_weights(u, ov, os, false).unwrap();
    let o = fuse(w, ov, os).unwrap().data();
    for ((x, a), b) in o.iter().zip(ov.data()).zip(os.data()) {
        prop_assert!(*x >= a.min(b) - 1e-12 && *x <= a.max(b) + 1e-12);
    }
    let w_swap = dmf_weights(u, os, ov, false).unwrap();
    let pairs = w.value().data().chunks(2).map(|p| [p[1], p[0]]).collect::<Vec<_>>().concat();
    prop_assert!(close(&w_swap.data(), &pairs, 1e-12));
    prop_assert!(close(&fuse(w_swap, os, ov).unwrap().data(), &o, 1e-12));
    Ok(())
}

pub fn fusion_weights_ignore_a_common_score_offset(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let d = pick.random_range(1usize..8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tape = Tape::new();
    let uv = values(&mut rng, d, 2.0);
    let (a, b, shift) = (values(&mut rng, d, 2.0), values(&mut rng, d, 2.0), values(&mut rng, d, 3.0));
    let add = |x: &[f64]| Tensor::vector(x.iter().zip(&shift).map(|(p, q)| p + q).collect());
    let u = tape.leaf(Tensor::vector(uv));
    let w = dmf_weights(u, tape.leaf(Tensor::vector(a.clone())), tape.leaf(Tensor::vector(b.clone())), false).unwrap();
    let w_shift = dmf_weights(u, tape.leaf(add(&a)), tape.leaf(add(&b)), false).unwrap();
    prop_assert!(close(&w.data(), &w_shift.data(), 1e-9));
    Ok(())
}

pub fn belief_history_is_zero_then_unit(seed: u64) -> Result<(), TestCaseError> {
    let (ep, params, cfg) = fixture(seed);
    let p = forward(&ep, &params, &cfg).unwrap();
    let h = &p.trace.belief.history;
    prop_assert_eq!(h.len(), 4);
    prop_assert_eq!(&h[0].belief, &vec![0.0; 5]);
    let normalized = [cfg.normalize_u_step, !cfg.no_mu_correction, !cfg.no_mg_correction];
    for (snap, &on) in h[1..].iter().zip(&normalized) {
        let n = norm(&snap.belief);
        if on && n > 0.0 {
            prop_assert!((n - 1.0).abs() <= 1e-9, "{:?} norm {}", snap.step, n);
        }
    }
    // A skipped step leaves the belief untouched, so it still carries the
    // norm of the last step that ran.
    if cfg.normalize_u_step {
        for snap in &h[1..] {
            let n = norm(&snap.belief);
            prop_assert!(n == 0.0 || (n - 1.0).abs() <= 1e-9);
        }
    }
    Ok(())
}

pub fn prediction_is_argmax_of_belief(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let n = pick.random_range(2usize..6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = values(&mut rng, 5, 3.0);
    if n < 5 {
        // Force ties to exercise the lowest-index rule.
        b[n] = b[0];
    }
    let (z, y) = predict(&Tensor::vector(b.clone()));
    prop_assert_eq!(y, argmax(&b));
    prop_assert_eq!(y, argmax(z.data()));
    Ok(())
}

pub fn normalization_preserves_argmax(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let c = pick.random_range(-3.0f64..3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Vec<f64> = values(&mut rng, 5, 3.0).into_iter().map(|v| v + c).collect();
    if !(norm(&b) > 0.0) {
        return Ok(());
    }
    let unit = Tensor::vector(b.clone()).normalize_last();
    prop_assert_eq!(argmax(unit.data()), argmax(&b));
    Ok(())
}

pub fn zero_betas_reduce_to_question_only(seed: u64) -> Result<(), TestCaseError> {
    let (ep, params, cfg) = fixture(seed);
    let zero = ModelConfig { beta_mu: 0.0, beta_mg: 0.0, no_mu_correction: false, no_mg_correction: false, ..cfg.clone() };
    let off = ModelConfig { no_mu_correction: true, no_mg_correction: true, ..cfg };
    let (a, b) = (forward(&ep, &params, &zero).unwrap(), forward(&ep, &params, &off).unwrap());
    prop_assert_eq!(a.predicted, b.predicted);
    // Without a normalized u-step the zero-gain corrections still rescale
    // the belief, which moves z but never its argmax.
    if off.normalize_u_step {
        prop_assert!(close(&a.probabilities, &b.probabilities, 1e-12));
    }
    Ok(())
}

pub fn forward_is_bitwise_deterministic(seed: u64) -> Result<(), TestCaseError> {
    let (ep, params, cfg) = fixture(seed);
    prop_assert_eq!(forward(&ep, &params, &cfg).unwrap(), forward(&ep, &params, &cfg).unwrap());
    Ok(())
}

pub fn training_is_deterministic(seed: u64) -> Result<(), TestCaseError> {
    let spec = SynthSpec { seq_len: 4, min_gap: 1, seed, ..SynthSpec::tiny() };
    let data = generate(&spec, 4).unwrap();
    let a = tiny_outcome(seed, &data);
    let b = tiny_outcome(seed, &data);
    prop_assert_eq!(&a.params, &b.params);
    prop_assert_eq!(a.best_epoch, b.best_epoch);
    let strip = |o: &TrainOutcome| o.metrics.iter().map(|m| (m.epoch, m.train_loss.to_bits(), m.val_acc.to_bits())).collect::<Vec<_>>();
    prop_assert_eq!(strip(&a), strip(&b));
    Ok(())
}

pub fn checkpoint_paths_are_unique_and_stable(seed: u64) -> Result<(), TestCaseError> {
    let (_, params, cfg) = fixture(seed);
    let ckpt = Checkpoint {
        config: TrainConfig { model: cfg, ..TrainConfig::default() },
        params,
        best_epoch: Some(seed as usize % 7),
        best_val_acc: Some((seed % 1000) as f64 / 1000.0),
    };
    let bytes = ckpt.to_bytes().unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    let paths: Vec<&str> = ckpt.params.paths().collect();
    let mut unique = paths.clone();
    unique.dedup();
    prop_assert_eq!(&paths, &unique);
    prop_assert_eq!(paths, back.params.paths().collect::<Vec<_>>());
    prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    Ok(())
}

pub fn generation_is_pure_and_noise_free_solvable(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let t = pick.random_range(7usize..24);
    let ratio = pick.random_range(0.0f64..=1.0);
    let spec = SynthSpec { seq_len: t, noise_std: 0.0, seed, evidence_modality_ratio: ratio, ..SynthSpec::tiny() };
    let a = generate(&spec, 3).unwrap();
    prop_assert_eq!(&a, &generate(&spec, 3).unwrap());
    let world = SynthWorld::new(&spec).unwrap();
    for rec in &a {
        prop_assert!(rec.evidence_slot < t);
        prop_assert_eq!(evidence_step(&world, &rec.features, rec.evidence_modality), rec.evidence_slot);
        let (answer, modality, step) = oracle_answer(&world, &rec.features);
        prop_assert_eq!(answer, rec.features.label);
        prop_assert_eq!(modality, rec.evidence_modality);
        prop_assert_eq!(step, rec.evidence_slot);
    }
    Ok(())
}

pub fn spec_ranges_are_enforced(seed: u64) -> Result<(), TestCaseError> {
    let mut pick = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let ratio = pick.random_range(-1.0f64..2.0);
    let noise = pick.random_range(-1.0f64..1.0);
    let spec = SynthSpec { evidence_modality_ratio: ratio, noise_std: noise, ..SynthSpec::tiny() };
    let valid = (0.0..=1.0).contains(&ratio) && noise >= 0.0;
    prop_assert_eq!(spec.validate().is_ok(), valid);
    Ok(())
}

pub const PROPERTIES: &[(&str, Property)] = &[
    ("construction_requires_matching_length", construction_requires_matching_length),
    ("softmax_sums_to_one_and_ignores_shifts", softmax_sums_to_one_and_ignores_shifts),
    ("softmax_is_monotone_in_each_score", softmax_is_monotone_in_each_score),
    ("pooling_yields_ceil_rows", pooling_yields_ceil_rows),
    ("ops_stay_finite_and_pure", ops_stay_finite_and_pure),
    ("tape_gradients_match_shapes_and_finite_differences", tape_gradients_match_shapes_and_finite_differences),
    ("shared_embedding_maps_equal_inputs_equally", shared_embedding_maps_equal_inputs_equally),
    ("ffn_commutes_with_row_permutations", ffn_commutes_with_row_permutations),
    ("dual_memory_banks_have_pooled_shape", dual_memory_banks_have_pooled_shape),
    ("attention_stages_keep_shape_discipline", attention_stages_keep_shape_discipline),
    ("every_attention_row_is_a_distribution", every_attention_row_is_a_distribution),
    ("fusion_is_convex_and_swap_equivariant", fusion_is_convex_and_swap_equivariant),
    ("fusion_weights_ignore_a_common_score_offset", fusion_weights_ignore_a_common_score_offset),
    ("belief_history_is_zero_then_unit", belief_history_is_zero_then_unit),
    ("prediction_is_argmax_of_belief", prediction_is_argmax_of_belief),
    ("normalization_preserves_argmax", normalization_preserves_argmax),
    ("zero_betas_reduce_to_question_only", zero_betas_reduce_to_question_only),
    ("forward_is_bitwise_deterministic", forward_is_bitwise_deterministic),
    ("training_is_deterministic", training_is_deterministic),
    ("checkpoint_paths_are_unique_and_stable", checkpoint_paths_are_unique_and_stable),
    ("generation_is_pure_and_noise_free_solvable", generation_is_pure_and_noise_free_solvable),
    ("spec_ranges_are_enforced", spec_ranges_are_enforced),
];
