//! Planted-evidence two-modality QA generator.
//!
//! Every episode hides one fact `R_m (key + value)` in one stream `m`. The
//! question carries the key plus a cue naming `m`, and the correct answer is
//! the value. The evidence stream also holds facts that pair every wrong
//! answer with an unrelated key, far from the evidence step. The other stream
//! holds a decoy that pairs the question key with a wrong answer, plus facts for
//! the remaining answers. Answering therefore needs both temporal selection and
//! cue-driven modality selection.
//!
//! Keys and answer values are drawn from small fixed vocabularies of
//! orthonormal directions shared by the whole world, so the model can learn
//! them instead of matching fresh random directions in every episode.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::encoding::{EpisodeFeatures, Modality, NUM_ANSWERS};
use crate::error::{Error, Result};
use crate::tensor::{argmax, Tensor};

/// Generator settings. The episode stream is a pure function of this value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    #[serde(rename = "T")]
    pub seq_len: usize,
    pub video_dim: usize,
    pub subtitle_dim: usize,
    pub question_dim: usize,
    /// Probability that an episode's evidence sits in the video stream.
    pub evidence_modality_ratio: f64,
    /// Wrong-answer facts planted per stream, at most four.
    pub distractor_count: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// Minimum temporal distance between a key-carrying fact and the facts
    /// around it.
    pub min_gap: usize,
    /// Magnitude of the evidence fact and of the decoy.
    pub signal_scale: f64,
    /// Magnitude of the remaining wrong-answer facts, relative to `signal_scale`.
    pub distractor_scale: f64,
    /// Number of distinct key symbols facts are drawn from.
    pub key_vocab: usize,
    /// Number of distinct answer symbols.
    pub answer_vocab: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seq_len: 64,
            video_dim: 32,
            subtitle_dim: 32,
            question_dim: 32,
            evidence_modality_ratio: 0.5,
            distractor_count: 4,
            noise_std: 0.05,
            seed: 7,
            min_gap: 24,
            signal_scale: 100.0,
            distractor_scale: 0.1,
            key_vocab: 12,
            answer_vocab: 12,
        }
    }
}

impl SynthSpec {
    /// Eight steps over 16-wide streams with the smallest vocabularies that
    /// still fit four distractors, for fast tests.
    pub fn tiny() -> Self {
        SynthSpec {
            seq_len: 8,
            video_dim: 16,
            subtitle_dim: 16,
            question_dim: 16,
            min_gap: 3,
            key_vocab: 9,
            answer_vocab: 5,
            ..SynthSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.seq_len == 0 {
            return fail("T must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.evidence_modality_ratio) {
            return fail(format!(
                "evidence_modality_ratio must lie in [0, 1] (got {})",
                self.evidence_modality_ratio
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return fail(format!("noise_std must be >= 0 (got {})", self.noise_std));
        }
        if !(self.signal_scale.is_finite() && self.signal_scale > 0.0) {
            return fail(format!("signal_scale must be > 0 (got {})", self.signal_scale));
        }
        if !(self.distractor_scale.is_finite() && self.distractor_scale >= 0.0) {
            return fail(format!("distractor_scale must be >= 0 (got {})", self.distractor_scale));
        }
        if self.distractor_count > NUM_ANSWERS - 1 {
            return fail(format!("distractor_count must be <= 4 (got {})", self.distractor_count));
        }
        if self.key_vocab < 1 + 2 * self.distractor_count {
            return fail(format!(
                "key_vocab {} must be >= {} (one question key plus one per distractor fact)",
                self.key_vocab,
                1 + 2 * self.distractor_count
            ));
        }
        if self.answer_vocab < NUM_ANSWERS {
            return fail(format!("answer_vocab {} must be >= {NUM_ANSWERS}", self.answer_vocab));
        }
        let needed = self.required_question_dim();
        if self.question_dim < needed {
            return fail(format!(
                "question_dim {} is too small for {} orthogonal directions",
                self.question_dim, needed
            ));
        }
        for (name, dim) in [("video_dim", self.video_dim), ("subtitle_dim", self.subtitle_dim)] {
            if dim < self.question_dim {
                return fail(format!("{name} {dim} must be >= question_dim {}", self.question_dim));
            }
        }
        if self.distractor_count > 0 && self.min_gap > (self.seq_len - 1).div_ceil(2) {
            return fail(format!("min_gap {} leaves no room in T = {}", self.min_gap, self.seq_len));
        }
        Ok(())
    }

    /// Two cues plus both vocabularies, all mutually orthogonal.
    pub fn required_question_dim(&self) -> usize {
        2 + self.key_vocab + self.answer_vocab
    }

    pub fn dim(&self, modality: Modality) -> usize {
        match modality {
            Modality::Video => self.video_dim,
            Modality::Subtitle => self.subtitle_dim,
        }
    }
}

/// An episode plus the ground truth of where its evidence was planted.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub features: EpisodeFeatures,
    /// Timestep of the evidence fact.
    pub evidence_slot: usize,
    pub evidence_modality: Modality,
}

/// Episode-independent structure shared by a whole generated dataset.
#[derive(Clone, Debug)]
pub struct SynthWorld {
    /// Per stream, a `D_m × D_q` matrix with orthonormal columns.
    pub video_projection: Tensor,
    pub subtitle_projection: Tensor,
    pub video_cue: Vec<f64>,
    pub subtitle_cue: Vec<f64>,
    pub keys: Vec<Vec<f64>>,
    pub answers: Vec<Vec<f64>>,
}

impl SynthWorld {
    pub fn new(spec: &SynthSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(0);
        let video_projection = orthonormal_columns(&mut rng, spec.video_dim, spec.question_dim);
        let subtitle_projection = orthonormal_columns(&mut rng, spec.subtitle_dim, spec.question_dim);
        let mut symbols =
            orthonormal_set(&mut rng, spec.question_dim, 2 + spec.key_vocab + spec.answer_vocab, &[]);
        let answers = symbols.split_off(2 + spec.key_vocab);
        let keys = symbols.split_off(2);
        Ok(SynthWorld {
            video_projection,
            subtitle_projection,
            video_cue: symbols[0].clone(),
            subtitle_cue: symbols[1].clone(),
            keys,
            answers,
        })
    }

    pub fn projection(&self, modality: Modality) -> &Tensor {
        match modality {
            Modality::Video => &self.video_projection,
            Modality::Subtitle => &self.subtitle_projection,
        }
    }

    pub fn cue(&self, modality: Modality) -> &[f64] {
        match modality {
            Modality::Video => &self.video_cue,
            Modality::Subtitle => &self.subtitle_cue,
        }
    }

    /// `R_m x` for a question-space vector `x`.
    pub fn project(&self, modality: Modality, x: &[f64]) -> Vec<f64> {
        self.projection(modality).rows().map(|row| dot(row, x)).collect()
    }

    /// `R_mᵀ y` for a stream-space vector `y`.
    pub fn unproject(&self, modality: Modality, y: &[f64]) -> Vec<f64> {
        let r = self.projection(modality);
        let cols = r.shape()[1];
        let mut out = vec![0.0; cols];
        for (row, &yi) in r.rows().zip(y) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v * yi;
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// `count` unit vectors orthogonal to each other and to every vector in
/// `against` (which must already be orthonormal), by Gram-Schmidt on Gaussian
/// draws.
fn orthonormal_set(rng: &mut ChaCha8Rng, dim: usize, count: usize, against: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = against.to_vec();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut v = gaussian(rng, dim);
        // Two passes keep the result orthogonal to working precision.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v.clone());
        out.push(v);
    }
    out
}

fn orthonormal_columns(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let columns = orthonormal_set(rng, rows, cols, &[]);
    let data = (0..rows).flat_map(|r| columns.iter().map(move |c| c[r])).collect();
    Tensor::new(vec![rows, cols], data).expect("positive extents")
}

/// Timesteps at distance `>= gap` from `anchor`.
fn far_from(anchor: usize, gap: usize, len: usize) -> Vec<usize> {
    (0..len).filter(|&t| t.abs_diff(anchor) >= gap).collect()
}

fn add_fact(stream: &mut [Vec<f64>], t: usize, fact: Vec<f64>, scale: f64) {
    stream[t].iter_mut().zip(fact).for_each(|(x, f)| *x += scale * f);
}

fn sum(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn episode(spec: &SynthSpec, world: &SynthWorld, index: usize) -> Result<EpisodeRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64 + 1);

    let t_len = spec.seq_len;
    let dc = spec.distractor_count;
    let evidence_modality = if rng.random_bool(spec.evidence_modality_ratio) {
        Modality::Video
    } else {
        Modality::Subtitle
    };
    let other = evidence_modality.other();

    let keys: Vec<&Vec<f64>> = world.keys.choose_multiple(&mut rng, 1 + 2 * dc).collect();
    let values: Vec<&Vec<f64>> = world.answers.choose_multiple(&mut rng, NUM_ANSWERS).collect();
    let key = keys[0];
    let evidence_keys = &keys[1..1 + dc];
    let other_keys = &keys[1 + dc..];

    // values[0] is correct; its position after shuffling is the label.
    let mut order: Vec<usize> = (0..NUM_ANSWERS).collect();
    order.shuffle(&mut rng);
    let label = order.iter().position(|&i| i == 0).expect("permutation");
    let wrong = &values[1..];

    let mut streams: [Vec<Vec<f64>>; 2] = Modality::BOTH.map(|m| {
        (0..t_len)
            .map(|_| gaussian(&mut rng, spec.dim(m)).into_iter().map(|x| x * spec.noise_std).collect())
            .collect()
    });
    let scale = spec.signal_scale;
    let weak = scale * spec.distractor_scale;

    let evidence_slot = rng.random_range(0..t_len);
    let ev = &mut streams[evidence_modality as usize];
    add_fact(ev, evidence_slot, world.project(evidence_modality, &sum(key, values[0])), scale);
    let far = far_from(evidence_slot, spec.min_gap, t_len);
    for (k, w) in evidence_keys.iter().zip(wrong) {
        let t = *far.choose(&mut rng).ok_or_else(no_room(spec))?;
        add_fact(ev, t, world.project(evidence_modality, &sum(k, w)), weak);
    }

    let decoy_slot = rng.random_range(0..t_len);
    let od = &mut streams[other as usize];
    if dc > 0 {
        add_fact(od, decoy_slot, world.project(other, &sum(key, wrong[0])), scale);
        let far = far_from(decoy_slot, spec.min_gap, t_len);
        let rest = std::iter::once(values[0]).chain(wrong[1..].iter().copied());
        for (k, w) in other_keys.iter().zip(rest).take(dc) {
            let t = *far.choose(&mut rng).ok_or_else(no_room(spec))?;
            add_fact(od, t, world.project(other, &sum(k, w)), weak);
        }
    }

    let mut question = sum(key, world.cue(evidence_modality));
    let answers: Vec<Vec<f64>> = order.iter().map(|&i| values[i].clone()).collect();
    let q_noise = gaussian(&mut rng, spec.question_dim);
    question.iter_mut().zip(q_noise).for_each(|(q, n)| *q += spec.noise_std * n);

    let [video, subtitle] = streams;
    let features = EpisodeFeatures::new(
        format!("ep{index:06}"),
        Tensor::from_rows(&video)?,
        Tensor::from_rows(&subtitle)?,
        Tensor::vector(question),
        Tensor::from_rows(&answers)?,
        label,
    )?;
    Ok(EpisodeRecord {
        features,
        evidence_slot,
        evidence_modality,
    })
}

fn no_room(spec: &SynthSpec) -> impl FnOnce() -> Error + '_ {
    move || Error::Config(format!("min_gap {} leaves no room in T = {}", spec.min_gap, spec.seq_len))
}

/// `count` episodes; episode `i` depends only on `(spec, i)`.
pub fn generate(spec: &SynthSpec, count: usize) -> Result<Vec<EpisodeRecord>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be ≥ 1".into()));
    }
    let world = SynthWorld::new(spec)?;
    (0..count).map(|i| episode(spec, &world, i)).collect()
}

/// Closed-form solver that knows the world: pick the stream named by the
/// cue, find the step most similar to the projected question, then the
/// answer most similar to that step. Returns `(answer, modality, step)`.
pub fn oracle_answer(world: &SynthWorld, ep: &EpisodeFeatures) -> (usize, Modality, usize) {
    let q = ep.question.data();
    let modality = if dot(q, &world.video_cue) >= dot(q, &world.subtitle_cue) {
        Modality::Video
    } else {
        Modality::Subtitle
    };
    let step = evidence_step(world, ep, modality);
    let x = world.unproject(modality, ep.stream(modality).row(step));
    let scores: Vec<f64> = ep.answers.rows().map(|a| dot(a, &x)).collect();
    (argmax(&scores), modality, step)
}

/// Timestep of `modality` most similar to the projected question.
pub fn evidence_step(world: &SynthWorld, ep: &EpisodeFeatures, modality: Modality) -> usize {
    let rq = world.project(modality, ep.question.data());
    let sims: Vec<f64> = ep.stream(modality).rows().map(|x| dot(x, &rq)).collect();
    argmax(&sims)
}

/// Pooling windows (as `[start, end)`) that contain timestep `t`.
pub fn windows_containing(t: usize, seq_len: usize, size: usize, stride: usize) -> Vec<usize> {
    let slots = seq_len.div_ceil(stride);
    (0..slots)
        .filter(|&n| {
            let start = n * stride;
            t >= start && t < (start + size).min(seq_len)
        })
        .collect()
}

/// Seeded disjoint partition into `ratios.len()` parts. Part sizes follow
/// largest-remainder rounding with ties going to the earlier part, and every
/// part keeps the dataset's original order.
pub fn split<T: Clone>(dataset: &[T], ratios: &[f64], seed: u64) -> Result<Vec<Vec<T>>> {
    let sizes = split_sizes(dataset.len(), ratios)?;
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for size in sizes {
        let mut chosen = idx[start..start + size].to_vec();
        chosen.sort_unstable();
        parts.push(chosen.into_iter().map(|i| dataset[i].clone()).collect());
        start += size;
    }
    Ok(parts)
}

/// Largest-remainder apportionment of `n` items.
pub fn split_sizes(n: usize, ratios: &[f64]) -> Result<Vec<usize>> {
    if ratios.is_empty() || ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::InvalidArgument(format!("ratios must be finite and >= 0 (got {ratios:?})")));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("ratios must sum to 1 (got {total})")));
    }
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in order {
        if left == 0 {
            break;
        }
        if ratios[i] > 0.0 {
            sizes[i] += 1;
            left -= 1;
        }
    }
    Ok(sizes)
}
