//! The confidence classifier: a 3 → h → 1 feed-forward network with a ReLU
//! hidden layer and a sigmoid output, fed raw `(P, H, d)` features.

mod train;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::rng;

pub use train::{
    fine_tune, negative_sample, separable_dataset, train, train_from, EpochStats, FineTuneConfig,
    SEPARABLE_MARGIN,
    TrainConfig,
};

pub const FEATURES: usize = 3;
pub const DEFAULT_HIDDEN: usize = 48;

/// Largest double below one. Outputs are clamped into `(0, 1)` so a
/// threshold of exactly 1 never passes.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub hidden: usize,
    /// `hidden × 3`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, ONE_MINUS)
}

impl MlpParams {
    pub fn zeros(hidden: usize) -> Self {
        MlpParams {
            hidden,
            w1: vec![0.0; hidden * FEATURES],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// Uniform in `±1/sqrt(fan_in)` per layer.
    pub fn init<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Result<Self> {
        if hidden < 1 {
            return Err(Error::invalid("hidden size must be at least 1"));
        }
        let a1 = 1.0 / (FEATURES as f64).sqrt();
        let a2 = 1.0 / (hidden as f64).sqrt();
        let mut u = |a: f64| rng.random_range(-a..a);
        let w1 = (0..hidden * FEATURES).map(|_| u(a1)).collect();
        let b1 = (0..hidden).map(|_| u(a1)).collect();
        let w2 = (0..hidden).map(|_| u(a2)).collect();
        let b2 = u(a2);
        Ok(MlpParams { hidden, w1, b1, w2, b2 })
    }

    pub fn init_seeded(hidden: usize, seed: u64) -> Result<Self> {
        Self::init(hidden, &mut rng::stream(seed, rng::INIT))
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden < 1 {
            return Err(Error::invalid("hidden size must be at least 1"));
        }
        let shapes = [
            ("W1", self.hidden * FEATURES, self.w1.len()),
            ("b1", self.hidden, self.b1.len()),
            ("W2", self.hidden, self.w2.len()),
        ];
        for (what, expected, found) in shapes {
            if expected != found {
                return Err(Error::Shape { what, expected, found });
            }
        }
        let finite = self
            .w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(std::iter::once(&self.b2))
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::malformed("classifier", "non-finite weight"));
        }
        Ok(())
    }

    /// Pre-sigmoid output.
    pub fn logit(&self, x: [f64; FEATURES]) -> f64 {
        let mut z = self.b2;
        for j in 0..self.hidden {
            let row = &self.w1[j * FEATURES..(j + 1) * FEATURES];
            let a = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + self.b1[j];
            if a > 0.0 {
                z += self.w2[j] * a;
            }
        }
        z
    }

    pub fn confidence(&self, x: [f64; FEATURES]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&Checkpoint::from(self))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Checkpoint::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)
            .map_err(|e| Error::malformed("classifier checkpoint", e.to_string()))?;
        if ck.feature_order != ["P", "H", "d"] {
            return Err(Error::malformed(
                "classifier checkpoint",
                format!("feature order {:?}, expected [\"P\", \"H\", \"d\"]", ck.feature_order),
            ));
        }
        if ck.log_base != "e" {
            return Err(Error::malformed("classifier checkpoint", format!("log base {:?}", ck.log_base)));
        }
        let params = MlpParams {
            hidden: ck.hidden,
            w1: ck.w1,
            b1: ck.b1,
            w2: ck.w2,
            b2: ck.b2,
        };
        params.validate()?;
        Ok(params)
    }
}

/// `mlp_forward`: confidence of one feature vector.
pub fn mlp_forward(params: &MlpParams, features: &FeatureVector) -> Result<f64> {
    if !features.is_finite() {
        return Err(Error::invalid(format!("non-finite features {features:?}")));
    }
    Ok(params.confidence(features.as_array()))
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    hidden: usize,
    #[serde(rename = "W1")]
    w1: Vec<f64>,
    b1: Vec<f64>,
    #[serde(rename = "W2")]
    w2: Vec<f64>,
    b2: f64,
    feature_order: Vec<String>,
    log_base: String,
}

impl From<&MlpParams> for Checkpoint {
    fn from(p: &MlpParams) -> Self {
        Checkpoint {
            hidden: p.hidden,
            w1: p.w1.clone(),
            b1: p.b1.clone(),
            w2: p.w2.clone(),
            b2: p.b2,
            feature_order: vec!["P".into(), "H".into(), "d".into()],
            log_base: "e".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: bool,
    /// Tree the example was harvested from; splits keep groups together.
    pub group: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalStats {
    /// `None` when the dataset has no positives.
    pub recall: Option<f64>,
    pub positive_rate: f64,
    pub accuracy: f64,
    pub loss: f64,
}

const BCE_CLAMP: f64 = 1e-7;

pub(crate) fn bce(p: f64, label: bool) -> f64 {
    let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Recall and positive rate at `C > threshold`.
pub fn evaluate(params: &MlpParams, dataset: &[LabeledExample], threshold: f64) -> Result<EvalStats> {
    evaluate_with(|x| params.confidence(x), dataset, threshold)
}

pub(crate) fn evaluate_with(
    predict: impl Fn([f64; FEATURES]) -> f64,
    dataset: &[LabeledExample],
    threshold: f64,
) -> Result<EvalStats> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let (mut tp, mut fn_, mut predicted, mut correct) = (0usize, 0usize, 0usize, 0usize);
    let mut loss = 0.0;
    for ex in dataset {
        let c = predict(ex.features.as_array());
        let positive = c > threshold;
        loss += bce(c, ex.label);
        predicted += usize::from(positive);
        correct += usize::from(positive == ex.label);
        match (ex.label, positive) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    let n = dataset.len() as f64;
    Ok(EvalStats {
        recall: (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64),
        positive_rate: predicted as f64 / n,
        accuracy: correct as f64 / n,
        loss: loss / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn ex(p: f64, label: bool) -> LabeledExample {
        LabeledExample {
            features: FeatureVector::new(p, 1.0, 0.0),
            label,
            group: 0,
        }
    }

    #[test]
    fn zero_weights_give_half() {
        let m = MlpParams::zeros(4);
        assert_eq!(mlp_forward(&m, &FeatureVector::new(0.3, 5.0, 2.0)).unwrap(), 0.5);
    }

    #[test]
    fn hand_arithmetic() {
        let m = MlpParams {
            hidden: 1,
            w1: vec![1.0, 0.0, 0.0],
            b1: vec![0.0],
            w2: vec![1.0],
            b2: 0.0,
        };
        let c = mlp_forward(&m, &FeatureVector::new(1.0, 3.0, 4.0)).unwrap();
        assert!((c - 0.7310585786300049).abs() < 1e-15);
        assert!(mlp_forward(&m, &FeatureVector::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    /// Second implementation: explicit matrix-vector products.
    fn oracle(m: &MlpParams, x: [f64; 3]) -> f64 {
        let hidden: Vec<f64> = (0..m.hidden)
            .map(|j| {
                let dot: f64 = (0..3).map(|k| m.w1[j * 3 + k] * x[k]).sum::<f64>() + m.b1[j];
                dot.max(0.0)
            })
            .collect();
        let z: f64 = hidden.iter().zip(&m.w2).map(|(h, w)| h * w).sum::<f64>() + m.b2;
        1.0 / (1.0 + (-z).exp())
    }

    #[test]
    fn forward_matches_matrix_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..50 {
            let m = MlpParams::init(1 + trial % 17, &mut rng).unwrap();
            let x = [rng.random::<f64>(), rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
            let got = m.confidence(x);
            let want = oracle(&m, x);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            assert!(got > 0.0 && got < 1.0);
        }
    }

    #[test]
    fn saturation_stays_inside_unit_interval() {
        let m = MlpParams {
            hidden: 1,
            w1: vec![1e6, 0.0, 0.0],
            b1: vec![0.0],
            w2: vec![1e6],
            b2: 0.0,
        };
        let hi = m.confidence([1.0, 0.0, 0.0]);
        assert!(hi < 1.0);
        let lo = MlpParams { b2: -1e9, ..m }.confidence([0.0, 0.0, 0.0]);
        assert!(lo > 0.0);
    }

    #[test]
    fn evaluate_reference_predictors() {
        let data = vec![ex(0.9, true), ex(0.8, true), ex(0.2, false), ex(0.1, false), ex(0.05, false)];
        let perfect = evaluate_with(|x| if x[0] > 0.5 { 0.9 } else { 0.1 }, &data, 0.5).unwrap();
        assert_eq!(perfect.recall, Some(1.0));
        assert_eq!(perfect.positive_rate, 0.4);
        assert_eq!(perfect.accuracy, 1.0);
        let yes = evaluate_with(|_| 0.9, &data, 0.5).unwrap();
        assert_eq!((yes.recall, yes.positive_rate), (Some(1.0), 1.0));
        let no = evaluate_with(|_| 0.1, &data, 0.5).unwrap();
        assert_eq!((no.recall, no.positive_rate), (Some(0.0), 0.0));
        let negatives = vec![ex(0.1, false)];
        assert_eq!(evaluate_with(|_| 0.9, &negatives, 0.5).unwrap().recall, None);
        assert!(evaluate_with(|_| 0.9, &[], 0.5).is_err());
    }

    #[test]
    fn checkpoint_roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cls.json");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let m = MlpParams::init(48, &mut rng).unwrap();
        m.save(&path).unwrap();
        let back = MlpParams::load(&path).unwrap();
        assert_eq!(back, m);
        for _ in 0..100 {
            let x = [rng.random::<f64>(), rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
            assert_eq!(back.confidence(x).to_bits(), m.confidence(x).to_bits());
        }
    }

    #[test]
    fn checkpoint_shape_errors() {
        let bad = r#"{"hidden":2,"W1":[1,2,3],"b1":[0,0],"W2":[1,1],"b2":0,"feature_order":["P","H","d"],"log_base":"e"}"#;
        let err = MlpParams::from_json(bad).unwrap_err();
        match err {
            Error::Shape { what, expected, found } => {
                assert_eq!((what, expected, found), ("W1", 6, 3));
            }
            other => panic!("unexpected {other}"),
        }
        assert!(MlpParams::from_json("{").is_err());
        let order = bad.replace("[1,2,3]", "[1,2,3,4,5,6]").replace("\"P\",\"H\"", "\"H\",\"P\"");
        assert!(MlpParams::from_json(&order).is_err());
    }

    #[test]
    fn hand_written_checkpoint() {
        let text = r#"{"hidden":1,"W1":[1,0,0],"b1":[0],"W2":[1],"b2":0,"feature_order":["P","H","d"],"log_base":"e"}"#;
        let m = MlpParams::from_json(text).unwrap();
        assert_eq!(m.confidence([1.0, 0.0, 0.0]), oracle(&m, [1.0, 0.0, 0.0]));
    }
}
