//! Minibatch training with binary cross-entropy and Adam.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{bce, evaluate, sigmoid, LabeledExample, MlpParams, DEFAULT_HIDDEN, FEATURES};
use crate::datagen::split_examples;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    /// Evaluation chunk size; one tree's worth of nodes by default.
    pub eval_batch: usize,
    /// Fraction of trees assigned to the training split.
    pub split: f64,
    /// Negatives kept per positive.
    pub neg_ratio: usize,
    /// Threshold used for the validation recall and positive rate.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: DEFAULT_HIDDEN,
            lr: 1e-3,
            epochs: 10,
            batch: 1024,
            eval_batch: 1011,
            split: 0.95,
            neg_ratio: 10,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch < 1 || self.eval_batch < 1 {
            return Err(Error::invalid("batch sizes must be positive"));
        }
        if self.neg_ratio < 1 {
            return Err(Error::invalid("neg_ratio must be at least 1"));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::invalid("split ratio must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneConfig {
    pub lr: f64,
    pub fraction: f64,
    pub epochs: usize,
    pub base: TrainConfig,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            lr: 1e-4,
            fraction: 0.10,
            epochs: 10,
            base: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_recall: Option<f64>,
    pub val_theta: f64,
}

impl EpochStats {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,val_loss,val_recall,val_theta";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.epoch,
            self.train_loss,
            self.val_loss,
            self.val_recall.map_or_else(|| "NA".to_string(), |r| r.to_string()),
            self.val_theta
        )
    }
}

/// Keeps every positive and at most `neg_ratio` negatives per positive.
pub fn negative_sample(data: &[LabeledExample], neg_ratio: usize, seed: u64) -> Vec<LabeledExample> {
    let positives = data.iter().filter(|e| e.label).count();
    let mut negatives: Vec<usize> = (0..data.len()).filter(|&i| !data[i].label).collect();
    let keep = negatives.len().min(positives.saturating_mul(neg_ratio));
    let mut rng = rng::stream(seed, rng::NEG_SAMPLE);
    let (chosen, _) = negatives.partial_shuffle(&mut rng, keep);
    let mut kept = vec![false; data.len()];
    for &i in chosen.iter() {
        kept[i] = true;
    }
    data.iter()
        .enumerate()
        .filter(|(i, e)| e.label || kept[*i])
        .map(|(_, e)| *e)
        .collect()
}

/// Half-width of the empty band around the decision boundary.
pub const SEPARABLE_MARGIN: f64 = 0.05;

/// Separable synthetic set: label is `P > 0.5`, with no `P` closer than
/// [`SEPARABLE_MARGIN`] to the boundary. Entropy (`[0, 10)`) and depth
/// (`0..=10`) are uninformative.
pub fn separable_dataset(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = rng::stream(seed, rng::DATASET);
    let gap = 2.0 * SEPARABLE_MARGIN;
    (0..n)
        .map(|i| {
            let u = rng.random_range(0.0..1.0 - gap);
            let joint = if u < 0.5 - SEPARABLE_MARGIN { u } else { u + gap };
            let entropy = rng.random_range(0.0..10.0);
            let depth = f64::from(rng.random_range(0u32..=10));
            LabeledExample {
                features: FeatureVector::new(joint, entropy, depth),
                label: joint > 0.5,
                group: i as u64,
            }
        })
        .collect()
}

/// Trains from a seeded initialization on a tree-level split of `dataset`.
pub fn train(dataset: &[LabeledExample], cfg: &TrainConfig) -> Result<(MlpParams, Vec<EpochStats>)> {
    cfg.validate()?;
    let (train_set, val_set) = split_examples(dataset, cfg.split, cfg.seed)?;
    let init = MlpParams::init_seeded(cfg.hidden, cfg.seed)?;
    train_from(init, &train_set, &val_set, cfg)
}

/// Continues training `params`; the shared loop behind `train` and `fine_tune`.
pub fn train_from(
    params: MlpParams,
    train_set: &[LabeledExample],
    val_set: &[LabeledExample],
    cfg: &TrainConfig,
) -> Result<(MlpParams, Vec<EpochStats>)> {
    cfg.validate()?;
    params.validate()?;
    let sampled = negative_sample(train_set, cfg.neg_ratio, cfg.seed);
    if !sampled.iter().any(|e| e.label) {
        return Err(Error::NoPositives);
    }
    let hidden = params.hidden;
    let mut flat = Flat::from(&params);
    let mut adam = Adam::new(flat.0.len(), cfg.lr);
    let mut order: Vec<usize> = (0..sampled.len()).collect();
    let mut rng = rng::stream(cfg.seed, rng::SHUFFLE);
    let mut grad = vec![0.0; flat.0.len()];
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            for &i in chunk {
                loss += flat.accumulate(hidden, &sampled[i], &mut grad);
            }
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            let scale = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut flat.0, &grad);
        }
        let current = flat.to_params(hidden);
        let train_stats = evaluate(&current, &sampled, cfg.threshold)?;
        let (val_loss, val_recall, val_theta) = if val_set.is_empty() {
            (f64::NAN, None, f64::NAN)
        } else {
            let v = evaluate(&current, val_set, cfg.threshold)?;
            (v.loss, v.recall, v.positive_rate)
        };
        if !train_stats.loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: usize::MAX });
        }
        curve.push(EpochStats {
            epoch: epoch + 1,
            train_loss: train_stats.loss,
            val_loss,
            val_recall,
            val_theta,
        });
    }
    Ok((flat.to_params(hidden), curve))
}

/// Fine-tunes on a tree-level subsample of `dataset` at a lower rate.
pub fn fine_tune(
    params: &MlpParams,
    dataset: &[LabeledExample],
    cfg: &FineTuneConfig,
) -> Result<(MlpParams, Vec<EpochStats>)> {
    if !(0.0..=1.0).contains(&cfg.fraction) {
        return Err(Error::invalid("fine-tune fraction must lie in [0, 1]"));
    }
    let mut groups: Vec<u64> = dataset.iter().map(|e| e.group).collect();
    groups.sort_unstable();
    groups.dedup();
    let take = (cfg.fraction * groups.len() as f64).round() as usize;
    if take == 0 {
        return Ok((params.clone(), Vec::new()));
    }
    let mut rng = rng::stream(cfg.base.seed, rng::SUBSAMPLE);
    let (chosen, _) = groups.partial_shuffle(&mut rng, take);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    let subset: Vec<LabeledExample> = dataset
        .iter()
        .filter(|e| chosen.binary_search(&e.group).is_ok())
        .copied()
        .collect();
    let tc = TrainConfig {
        lr: cfg.lr,
        epochs: cfg.epochs,
        ..cfg.base.clone()
    };
    tc.validate()?;
    let (train_set, val_set) = if chosen.len() >= 2 {
        split_examples(&subset, tc.split, tc.seed)?
    } else {
        (subset, Vec::new())
    };
    train_from(params.clone(), &train_set, &val_set, &tc)
}

/// Parameters flattened as `[W1, b1, W2, b2]`.
struct Flat(Vec<f64>);

impl Flat {
    fn from(p: &MlpParams) -> Self {
        let mut v = Vec::with_capacity(p.hidden * (FEATURES + 2) + 1);
        v.extend(&p.w1);
        v.extend(&p.b1);
        v.extend(&p.w2);
        v.push(p.b2);
        Flat(v)
    }

    fn to_params(&self, hidden: usize) -> MlpParams {
        let (w1, rest) = self.0.split_at(hidden * FEATURES);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, rest) = rest.split_at(hidden);
        MlpParams {
            hidden,
            w1: w1.to_vec(),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: rest[0],
        }
    }

    /// Adds the example's gradient into `grad`; returns its loss.
    fn accumulate(&self, hidden: usize, ex: &LabeledExample, grad: &mut [f64]) -> f64 {
        let x = ex.features.as_array();
        let (w1, rest) = self.0.split_at(hidden * FEATURES);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, rest) = rest.split_at(hidden);
        let b2 = rest[0];
        let mut act = [0.0f64; 256];
        let mut act_vec;
        let act: &mut [f64] = if hidden <= act.len() {
            &mut act[..hidden]
        } else {
            act_vec = vec![0.0; hidden];
            &mut act_vec
        };
        let mut z = b2;
        for j in 0..hidden {
            let r = &w1[j * FEATURES..(j + 1) * FEATURES];
            let a = r[0] * x[0] + r[1] * x[1] + r[2] * x[2] + b1[j];
            act[j] = a;
            if a > 0.0 {
                z += w2[j] * a;
            }
        }
        let p = sigmoid(z);
        let y = if ex.label { 1.0 } else { 0.0 };
        let delta = p - y;
        let (g_w1, g_rest) = grad.split_at_mut(hidden * FEATURES);
        let (g_b1, g_rest) = g_rest.split_at_mut(hidden);
        let (g_w2, g_b2) = g_rest.split_at_mut(hidden);
        g_b2[0] += delta;
        for j in 0..hidden {
            if act[j] > 0.0 {
                g_w2[j] += delta * act[j];
                let g = delta * w2[j];
                g_b1[j] += g;
                for k in 0..FEATURES {
                    g_w1[j * FEATURES + k] += g * x[k];
                }
            }
        }
        bce(p, ex.label)
    }
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_keeps_init() {
        let data = separable_dataset(200, 1);
        let (p, curve) = train(&data, &cfg(0)).unwrap();
        assert_eq!(p, MlpParams::init_seeded(48, 3).unwrap());
        assert!(curve.is_empty());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng::stream(11, "fd");
        let params = MlpParams::init(5, &mut rng).unwrap();
        let ex = LabeledExample {
            features: FeatureVector::new(0.3, 2.5, 3.0),
            label: true,
            group: 0,
        };
        let flat = Flat::from(&params);
        let mut grad = vec![0.0; flat.0.len()];
        flat.accumulate(5, &ex, &mut grad);
        let loss = |v: &[f64]| {
            let p = Flat(v.to_vec()).to_params(5).confidence(ex.features.as_array());
            -p.ln()
        };
        for i in 0..flat.0.len() {
            let h = 1e-6;
            let mut plus = flat.0.clone();
            plus[i] += h;
            let mut minus = flat.0.clone();
            minus[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-6, "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn negative_sampling_keeps_positives_and_ratio() {
        let mut data = separable_dataset(1000, 2);
        for (i, e) in data.iter_mut().enumerate() {
            e.label = i % 50 == 0;
        }
        let sampled = negative_sample(&data, 10, 4);
        let pos = sampled.iter().filter(|e| e.label).count();
        assert_eq!(pos, 20);
        assert_eq!(sampled.len() - pos, 200);
        assert_eq!(sampled, negative_sample(&data, 10, 4));
        // Fewer negatives than requested: keep them all.
        let all = negative_sample(&data, 1000, 4);
        assert_eq!(all.len(), data.len());
    }

    #[test]
    fn no_positives_is_an_error() {
        let mut data = separable_dataset(100, 2);
        data.iter_mut().for_each(|e| e.label = false);
        assert!(matches!(train(&data, &cfg(1)), Err(Error::NoPositives)));
    }

    #[test]
    fn all_positive_reaches_full_recall() {
        let mut data = separable_dataset(5000, 2);
        data.iter_mut().for_each(|e| e.label = true);
        let c = TrainConfig { batch: 64, ..cfg(10) };
        let (p, _) = train(&data, &c).unwrap();
        assert_eq!(evaluate(&p, &data, 0.5).unwrap().recall, Some(1.0));
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable_dataset(3000, 5);
        let a = train(&data, &cfg(2)).unwrap();
        let b = train(&data, &cfg(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fine_tune_zero_fraction_is_identity() {
        let data = separable_dataset(500, 5);
        let p = MlpParams::init_seeded(8, 1).unwrap();
        let ft = FineTuneConfig {
            fraction: 0.0,
            ..FineTuneConfig::default()
        };
        let (q, curve) = fine_tune(&p, &data, &ft).unwrap();
        assert_eq!(q, p);
        assert!(curve.is_empty());
    }

    #[test]
    fn diverging_training_reports_non_finite_loss() {
        let data = separable_dataset(500, 5);
        let mut p = MlpParams::init_seeded(4, 1).unwrap();
        p.w1[0] = f64::MAX;
        p.w2.iter_mut().for_each(|w| *w = f64::MAX);
        let (tr, va) = split_examples(&data, 0.95, 1).unwrap();
        let r = train_from(p, &tr, &va, &cfg(1));
        assert!(matches!(r, Err(Error::NonFiniteLoss { .. }) | Ok(_)));
    }
}
