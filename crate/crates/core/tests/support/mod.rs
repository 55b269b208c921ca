//! Straight-line reference implementation of the forward pass over plain
//! nested vectors, plus random tiny fixtures. It shares nothing with the
//! crate except the parameter registry it reads weights from.

#![allow(dead_code)]

use pamn_core::{EpisodeFeatures, ModelConfig, ModelParams, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod props;

pub type Mat = Vec<Vec<f64>>;

/// Every quantity the crate's trace exposes, recomputed by hand.
#[derive(Debug)]
pub struct Reference {
    /// Per question hop: `(video α, subtitle α)`.
    pub question_alpha: Vec<(Option<Vec<f64>>, Option<Vec<f64>>)>,
    /// Per answer hop: `(video 5 × N, subtitle 5 × N)`.
    pub answer_alpha: Vec<(Option<Mat>, Option<Mat>)>,
    pub dmf_mu: Vec<f64>,
    pub dmf_mg: Mat,
    /// Belief after init, u, Mu and Mg.
    pub beliefs: [Vec<f64>; 4],
    pub z: Vec<f64>,
    pub predicted: usize,
}

fn weight(params: &ModelParams, path: &str) -> Mat {
    let t = params.get(path).unwrap_or_else(|| panic!("missing {path}"));
    t.to_rows()
}

fn bias(params: &ModelParams, path: &str) -> Vec<f64> {
    params.get(path).unwrap_or_else(|| panic!("missing {path}")).data().to_vec()
}

fn affine(x: &[f64], w: &Mat, b: &[f64]) -> Vec<f64> {
    let mut out = b.to_vec();
    for (i, xi) in x.iter().enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            *o += xi * w[i][j];
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn unit(x: &[f64]) -> Vec<f64> {
    let n = dot(x, x).sqrt();
    if n < 1e-12 {
        x.to_vec()
    } else {
        x.iter().map(|v| v / n).collect()
    }
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn score(mem_row: &[f64], query: &[f64], cosine: bool) -> f64 {
    if cosine {
        dot(&unit(mem_row), &unit(query))
    } else {
        dot(mem_row, query)
    }
}

fn memory(stream: &Mat, params: &ModelParams, prefix: &str, cfg: &ModelConfig) -> Mat {
    let (w1, b1) = (weight(params, &format!("{prefix}.w1")), bias(params, &format!("{prefix}.b1")));
    let (w2, b2) = (weight(params, &format!("{prefix}.w2")), bias(params, &format!("{prefix}.b2")));
    let hidden: Mat = stream
        .iter()
        .map(|x| {
            let h: Vec<f64> = affine(x, &w1, &b1).into_iter().map(|v| v.max(0.0)).collect();
            affine(&h, &w2, &b2)
        })
        .collect();
    let t = stream.len();
    let slots = (t + cfg.pool_stride - 1) / cfg.pool_stride;
    let mut bank = Vec::new();
    for n in 0..slots {
        let start = n * cfg.pool_stride;
        let end = usize::min(start + cfg.pool_size, t);
        let mut row = vec![0.0; cfg.memory_dim];
        for h in &hidden[start..end] {
            for (r, v) in row.iter_mut().zip(h) {
                *r += v;
            }
        }
        let count = (end - start) as f64;
        bank.push(row.into_iter().map(|v| v / count).collect());
    }
    bank
}

/// One attend-and-update hop of a single `N × d` bank.
fn hop(bank: &Mat, query: &[f64], w: &Mat, b: &[f64], cosine: bool) -> (Mat, Vec<f64>) {
    let scores: Vec<f64> = bank.iter().map(|m| score(m, query, cosine)).collect();
    let alpha = softmax(&scores);
    let next = bank
        .iter()
        .zip(&alpha)
        .map(|(m, a)| {
            let scaled: Vec<f64> = m.iter().map(|v| a * v).collect();
            affine(&scaled, w, b)
        })
        .collect();
    (next, alpha)
}

fn readout(bank: &Mat, mean: bool) -> Vec<f64> {
    let mut o = vec![0.0; bank[0].len()];
    for row in bank {
        for (a, v) in o.iter_mut().zip(row) {
            *a += v;
        }
    }
    if mean {
        let n = bank.len() as f64;
        o.iter_mut().for_each(|v| *v /= n);
    }
    o
}

/// Returns the fused vector and the `(video, subtitle)` weights.
fn fuse(video: Option<&Vec<f64>>, subtitle: Option<&Vec<f64>>, u: &[f64], cfg: &ModelConfig) -> (Vec<f64>, Vec<f64>) {
    match (video, subtitle) {
        (Some(v), Some(s)) => {
            let w = if cfg.no_dmf {
                vec![0.5, 0.5]
            } else {
                softmax(&[score(v, u, cfg.cosine_attention), score(s, u, cfg.cosine_attention)])
            };
            let o = (0..v.len()).map(|k| w[0] * v[k] + w[1] * s[k]).collect();
            (o, w)
        }
        (Some(v), None) => (v.clone(), vec![1.0, 0.0]),
        (None, Some(s)) => (s.clone(), vec![0.0, 1.0]),
        (None, None) => unreachable!("a bank is always in use"),
    }
}

fn prefix(cfg: &ModelConfig, modality: &str) -> String {
    if cfg.tie_ffn {
        "ffn.shared".into()
    } else {
        format!("ffn.{modality}")
    }
}

pub fn reference_forward(ep: &EpisodeFeatures, params: &ModelParams, cfg: &ModelConfig) -> Reference {
    let w_ug = weight(params, "embed.w_ug");
    let b_ug = bias(params, "embed.b_ug");
    let u = affine(ep.question.data(), &w_ug, &b_ug);
    let g: Mat = ep.answers.rows().map(|a| affine(a, &w_ug, &b_ug)).collect();

    let use_v = !cfg.subtitle_only;
    let use_s = !cfg.video_only;
    let fresh_v = use_v.then(|| memory(&ep.video.to_rows(), params, &prefix(cfg, "video"), cfg));
    let fresh_s = use_s.then(|| memory(&ep.subtitle.to_rows(), params, &prefix(cfg, "subtitle"), cfg));

    // Question stage.
    let mut question_alpha = Vec::new();
    let (mut mv, mut ms) = (fresh_v.clone(), fresh_s.clone());
    for k in 1..=cfg.hops_mu {
        let mut step = (None, None);
        if let Some(bank) = &mv {
            let p = format!("attn.u.video.hop{k}");
            let (next, a) = hop(bank, &u, &weight(params, &format!("{p}.w")), &bias(params, &format!("{p}.b")), cfg.cosine_attention);
            mv = Some(next);
            step.0 = Some(a);
        }
        if let Some(bank) = &ms {
            let p = format!("attn.u.subtitle.hop{k}");
            let (next, a) = hop(bank, &u, &weight(params, &format!("{p}.w")), &bias(params, &format!("{p}.b")), cfg.cosine_attention);
            ms = Some(next);
            step.1 = Some(a);
        }
        question_alpha.push(step);
    }
    let (mu_v, mu_s) = (mv.clone(), ms.clone());

    // Answer stage, one bank per answer, all starting from the same memory.
    let (start_v, start_s) = if cfg.no_pa { (fresh_v, fresh_s) } else { (mu_v.clone(), mu_s.clone()) };
    let mut banks_v: Option<Vec<Mat>> = start_v.map(|b| vec![b; 5]);
    let mut banks_s: Option<Vec<Mat>> = start_s.map(|b| vec![b; 5]);
    let mut answer_alpha = Vec::new();
    for k in 1..=cfg.hops_mg {
        let mut step = (None, None);
        for (banks, name, slot) in [(&mut banks_v, "video", 0), (&mut banks_s, "subtitle", 1)] {
            if let Some(per_answer) = banks.as_mut() {
                let p = format!("attn.g.{name}.hop{k}");
                let (w, b) = (weight(params, &format!("{p}.w")), bias(params, &format!("{p}.b")));
                let mut rows = Vec::new();
                for (i, bank) in per_answer.iter_mut().enumerate() {
                    let (next, a) = hop(bank, &g[i], &w, &b, cfg.cosine_attention);
                    *bank = next;
                    rows.push(a);
                }
                if slot == 0 {
                    step.0 = Some(rows);
                } else {
                    step.1 = Some(rows);
                }
            }
        }
        answer_alpha.push(step);
    }

    let o_mu_v = mu_v.as_ref().map(|b| readout(b, cfg.readout_mean));
    let o_mu_s = mu_s.as_ref().map(|b| readout(b, cfg.readout_mean));
    let (o_mu, dmf_mu) = fuse(o_mu_v.as_ref(), o_mu_s.as_ref(), &u, cfg);
    let mut o_mg = Vec::new();
    let mut dmf_mg = Vec::new();
    for i in 0..5 {
        let v = banks_v.as_ref().map(|b| readout(&b[i], cfg.readout_mean));
        let s = banks_s.as_ref().map(|b| readout(&b[i], cfg.readout_mean));
        let (o, w) = fuse(v.as_ref(), s.as_ref(), &u, cfg);
        o_mg.push(o);
        dmf_mg.push(w);
    }

    let init = vec![0.0; 5];
    let mut b: Vec<f64> = (0..5).map(|i| dot(&g[i], &u)).collect();
    if cfg.normalize_u_step {
        b = unit(&b);
    }
    let after_u = b.clone();
    if !cfg.no_mu_correction {
        b = unit(&(0..5).map(|i| b[i] + cfg.beta_mu * dot(&g[i], &o_mu)).collect::<Vec<_>>());
    }
    let after_mu = b.clone();
    if !cfg.no_mg_correction {
        b = unit(&(0..5).map(|i| b[i] + cfg.beta_mg * dot(&g[i], &o_mg[i])).collect::<Vec<_>>());
    }
    let z = softmax(&b);
    let mut predicted = 0;
    for i in 1..5 {
        if z[i] > z[predicted] {
            predicted = i;
        }
    }
    Reference {
        question_alpha,
        answer_alpha,
        dmf_mu,
        dmf_mg,
        beliefs: [init, after_u, after_mu, b],
        z,
        predicted,
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

/// A random episode with small widths and `T` in `1..=12`.
pub fn random_episode(rng: &mut ChaCha8Rng, id: usize) -> EpisodeFeatures {
    let t = rng.random_range(1..=12);
    let (dq, dv, ds) = (rng.random_range(2..=6), rng.random_range(2..=6), rng.random_range(2..=6));
    let question = Tensor::vector((0..dq).map(|_| rng.random_range(-1.0..1.0)).collect());
    EpisodeFeatures::new(
        format!("r{id}"),
        uniform(rng, t, dv),
        uniform(rng, t, ds),
        question,
        uniform(rng, 5, dq),
        rng.random_range(0..5),
    )
    .unwrap()
}

/// A random small architecture with a random mix of switches.
pub fn random_config(rng: &mut ChaCha8Rng) -> ModelConfig {
    let modality = rng.random_range(0..4);
    ModelConfig {
        memory_dim: rng.random_range(1..=6),
        ffn_hidden: rng.random_bool(0.3).then(|| rng.random_range(1..=5)),
        hops_mu: rng.random_range(1..=3),
        hops_mg: rng.random_range(1..=3),
        pool_size: rng.random_range(1..=5),
        pool_stride: rng.random_range(1..=4),
        beta_mu: rng.random_range(0.0..2.0),
        beta_mg: rng.random_range(0.0..2.0),
        no_pa: rng.random_bool(0.3),
        no_dmf: rng.random_bool(0.3),
        no_mu_correction: rng.random_bool(0.2),
        no_mg_correction: rng.random_bool(0.2),
        video_only: modality == 0,
        subtitle_only: modality == 1,
        cosine_attention: rng.random_bool(0.2),
        readout_mean: rng.random_bool(0.2),
        tie_ffn: false,
        normalize_u_step: rng.random_bool(0.8),
    }
}

/// Parameters with every entry, biases included, drawn from `[-1, 1)`.
pub fn random_params(ep: &EpisodeFeatures, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> ModelParams {
    let dims = pamn_core::train::input_dims(ep);
    let mut params = ModelParams::init(dims, cfg, rng.random()).unwrap();
    for (_, t) in params.iter_mut() {
        let data = (0..t.numel()).map(|_| rng.random_range(-1.0..1.0)).collect();
        *t = Tensor::new(t.shape().to_vec(), data).unwrap();
    }
    params
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest deviation between the crate's trace and the reference over every
/// compared quantity, or an error naming a structural mismatch.
pub fn compare(ep: &EpisodeFeatures, params: &ModelParams, cfg: &ModelConfig) -> Result<f64, String> {
    let got = pamn_core::forward(ep, params, cfg).map_err(|e| e.to_string())?;
    let want = reference_forward(ep, params, cfg);
    let mut worst = 0.0f64;
    let mut track = |what: &str, a: &[f64], b: &[f64]| -> Result<(), String> {
        if a.len() != b.len() {
            return Err(format!("{what}: length {} vs {}", a.len(), b.len()));
        }
        worst = worst.max(max_abs_diff(a, b));
        Ok(())
    };
    let t = &got.trace;
    if t.attention.question_hops.len() != want.question_alpha.len()
        || t.attention.answer_hops.len() != want.answer_alpha.len()
    {
        return Err("hop counts differ".into());
    }
    for (h, (wv, ws)) in t.attention.question_hops.iter().zip(&want.question_alpha) {
        for (name, a, b) in [("u video", &h.video, wv), ("u subtitle", &h.subtitle, ws)] {
            match (a, b) {
                (Some(a), Some(b)) => track(name, a, b)?,
                (None, None) => {}
                _ => return Err(format!("{name}: bank presence differs")),
            }
        }
    }
    for (h, (wv, ws)) in t.attention.answer_hops.iter().zip(&want.answer_alpha) {
        for (name, a, b) in [("g video", &h.video, wv), ("g subtitle", &h.subtitle, ws)] {
            match (a, b) {
                (Some(a), Some(b)) => track(name, &a.concat(), &b.concat())?,
                (None, None) => {}
                _ => return Err(format!("{name}: bank presence differs")),
            }
        }
    }
    track("dmf Mu", &t.fusion.question_stage, &want.dmf_mu)?;
    track("dmf Mg", &t.fusion.answer_stage.concat(), &want.dmf_mg.concat())?;
    if t.belief.history.len() != 4 {
        return Err(format!("belief history has {} entries", t.belief.history.len()));
    }
    for (snap, b) in t.belief.history.iter().zip(&want.beliefs) {
        track("belief", &snap.belief, b)?;
    }
    track("z", &got.probabilities, &want.z)?;
    if got.predicted != want.predicted {
        return Err(format!("predicted {} vs {}", got.predicted, want.predicted));
    }
    Ok(worst)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
