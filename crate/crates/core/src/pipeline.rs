//! The bundled end-to-end run behind the golden outputs: model pair,
//! corpus, classifier, benchmarks, sweeps, heatmap, op counts, surfaces and
//! the small side studies. Every output is a pure function of the manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::bench::{
    confidence_surface, depth_accept_curve, gen_prompts, heatmap, run_benchmark, surface_csv, BenchReport,
    SurfaceGrid, NA, SWEEP_HEADER,
};
use crate::classifier::{evaluate, fine_tune, train, FineTuneConfig, MlpParams, TrainConfig, EpochStats};
use crate::config::Config;
use crate::datagen::{collect_labeled_trees, split_examples};
use crate::drafting::{ChainStop, DraftConfig, Strategy};
use crate::error::{Error, Result};
use crate::features::{entropy, truncated_entropy};
use crate::models::{dirichlet_row, entropy_histogram, DraftMode, ModelPair, ModelPairSpec};
use crate::opcount::{flops_csv, flops_report, orderings, FlopsRow};
use crate::rng;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Every knob of the bundled run. `Default` is the checked-in configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub pair: ModelPairSpec,
    pub top_cap: usize,
    pub entropy_m: usize,
    pub collect_prompts: usize,
    pub collect_prompt_len: usize,
    pub collect_prompt_seed: u64,
    pub collect_k: usize,
    pub collect_d_max: usize,
    pub collect_count: usize,
    pub collect_seed: u64,
    pub train: TrainConfig,
    pub bench_prompts: usize,
    pub bench_prompt_len: usize,
    pub bench_prompt_seed: u64,
    pub gen_len: usize,
    pub bench_seed: u64,
    pub top_k: usize,
    pub d_max: usize,
    pub second_topk: bool,
    pub beta: f64,
    pub betas: Vec<f64>,
    pub eagle_ns: Vec<usize>,
    pub accept_betas: Vec<f64>,
    pub tau_ratio: f64,
    pub gamma_ratio: f64,
    pub depth_tolerance: f64,
    pub heatmap_steps: usize,
    pub flops_vocab: usize,
    pub flops_m: usize,
    pub flops_k: usize,
    pub flops_reps: usize,
    pub flops_seed: u64,
    pub gap_vocab: usize,
    pub gap_m: usize,
    pub gap_reps: usize,
    pub gap_seed: u64,
    pub chain_max_len: usize,
    pub chain_stops: Vec<ChainStop>,
    pub side_prompts: usize,
    pub top_ms: Vec<usize>,
    pub hiddens: Vec<usize>,
    pub finetune_pair_seed: u64,
    pub finetune_eps: f64,
    pub finetune_count: usize,
    pub finetune: FineTuneConfig,
}

pub const BUNDLED_SCHEDULE: &str = "0.001:0.15,0.003:0.15,0.01:0.15,0.03:0.15,0.1:0.15,0.3:0.1,1:0.15";

impl Default for PipelineConfig {
    fn default() -> Self {
        let train = TrainConfig {
            lr: 0.01,
            neg_ratio: 3,
            seed: 42,
            ..TrainConfig::default()
        };
        PipelineConfig {
            pair: ModelPairSpec {
                vocab: 1024,
                order: 2,
                seed: 42,
                concentration_schedule: ModelPairSpec::parse_schedule(BUNDLED_SCHEDULE).expect("valid schedule"),
                draft_noise: 0.3,
                noise_concentration: 0.1,
                draft_mode: DraftMode::MixturePerturb,
                spread_bins: 7,
            },
            top_cap: 20,
            entropy_m: 1000,
            collect_prompts: 200,
            collect_prompt_len: 8,
            collect_prompt_seed: 7,
            collect_k: 10,
            collect_d_max: 11,
            collect_count: 8880,
            collect_seed: 42,
            finetune: FineTuneConfig {
                base: train.clone(),
                ..FineTuneConfig::default()
            },
            train,
            bench_prompts: 200,
            bench_prompt_len: 8,
            bench_prompt_seed: 42,
            gen_len: 64,
            bench_seed: 42,
            top_k: 15,
            d_max: 10,
            second_topk: true,
            beta: 0.5,
            betas: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            eagle_ns: vec![20, 40, 60, 80],
            accept_betas: vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            tau_ratio: 0.98,
            gamma_ratio: 0.90,
            depth_tolerance: 0.02,
            heatmap_steps: 64,
            flops_vocab: 32000,
            flops_m: 1000,
            flops_k: 15,
            flops_reps: 10,
            flops_seed: 42,
            gap_vocab: 32000,
            gap_m: 1000,
            gap_reps: 10,
            gap_seed: 42,
            chain_max_len: 10,
            chain_stops: vec![ChainStop::None, ChainStop::DY_MAX, ChainStop::DY_JOINT, ChainStop::C2T_CHAIN],
            side_prompts: 50,
            top_ms: vec![16, 64, 256, 1000, 1024],
            hiddens: vec![2, 6, 12, 24, 36, 48],
            finetune_pair_seed: 43,
            finetune_eps: 0.4,
            finetune_count: 1000,
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    pub fn to_manifest(&self) -> Config {
        let mut c = Config::new();
        c.set("tool_version", TOOL_VERSION);
        c.set("pair.vocab", self.pair.vocab);
        c.set("pair.order", self.pair.order);
        c.set("pair.seed", self.pair.seed);
        c.set("pair.schedule", self.pair.schedule_string());
        c.set("pair.eps", self.pair.draft_noise);
        c.set("pair.noise_concentration", self.pair.noise_concentration);
        c.set("pair.draft_mode", self.pair.draft_mode);
        c.set("pair.spread_bins", self.pair.spread_bins);
        c.set("pair.top_cap", self.top_cap);
        c.set("pair.entropy_m", self.entropy_m);
        c.set("collect.prompts", self.collect_prompts);
        c.set("collect.prompt_len", self.collect_prompt_len);
        c.set("collect.prompt_seed", self.collect_prompt_seed);
        c.set("collect.K", self.collect_k);
        c.set("collect.d_max", self.collect_d_max);
        c.set("collect.count", self.collect_count);
        c.set("collect.seed", self.collect_seed);
        set_train(&mut c, "train", &self.train);
        c.set("bench.prompts", self.bench_prompts);
        c.set("bench.prompt_len", self.bench_prompt_len);
        c.set("bench.prompt_seed", self.bench_prompt_seed);
        c.set("bench.gen_len", self.gen_len);
        c.set("bench.seed", self.bench_seed);
        c.set("bench.K", self.top_k);
        c.set("bench.d_max", self.d_max);
        c.set("bench.second_topk", self.second_topk);
        c.set("bench.beta", self.beta);
        c.set("sweep.betas", join(&self.betas));
        c.set("sweep.eagle_ns", join(&self.eagle_ns));
        c.set("accept.betas", join(&self.accept_betas));
        c.set("accept.tau_ratio", self.tau_ratio);
        c.set("accept.gamma_ratio", self.gamma_ratio);
        c.set("accept.depth_tolerance", self.depth_tolerance);
        c.set("heatmap.steps", self.heatmap_steps);
        c.set("flops.V", self.flops_vocab);
        c.set("flops.M", self.flops_m);
        c.set("flops.K", self.flops_k);
        c.set("flops.reps", self.flops_reps);
        c.set("flops.seed", self.flops_seed);
        c.set("gap.V", self.gap_vocab);
        c.set("gap.M", self.gap_m);
        c.set("gap.reps", self.gap_reps);
        c.set("gap.seed", self.gap_seed);
        c.set("chain.max_len", self.chain_max_len);
        c.set("chain.stops", join(&self.chain_stops));
        c.set("side.prompts", self.side_prompts);
        c.set("topm.values", join(&self.top_ms));
        c.set("hidden.values", join(&self.hiddens));
        c.set("finetune.pair_seed", self.finetune_pair_seed);
        c.set("finetune.eps", self.finetune_eps);
        c.set("finetune.count", self.finetune_count);
        c.set("finetune.lr", self.finetune.lr);
        c.set("finetune.fraction", self.finetune.fraction);
        c.set("finetune.epochs", self.finetune.epochs);
        c
    }

    /// Inverse of [`to_manifest`](Self::to_manifest); absent keys keep the
    /// bundled values.
    pub fn from_manifest(c: &Config) -> Result<Self> {
        let d = PipelineConfig::default();
        let schedule = match c.raw("pair.schedule") {
            Some(s) => ModelPairSpec::parse_schedule(s)?,
            None => d.pair.concentration_schedule.clone(),
        };
        let pair = ModelPairSpec {
            vocab: c.get_or("pair.vocab", d.pair.vocab)?,
            order: c.get_or("pair.order", d.pair.order)?,
            seed: c.get_or("pair.seed", d.pair.seed)?,
            concentration_schedule: schedule,
            draft_noise: c.get_or("pair.eps", d.pair.draft_noise)?,
            noise_concentration: c.get_or("pair.noise_concentration", d.pair.noise_concentration)?,
            draft_mode: c.get_or("pair.draft_mode", d.pair.draft_mode)?,
            spread_bins: c.get_or("pair.spread_bins", d.pair.spread_bins)?,
        };
        pair.validate()?;
        let train = get_train(c, "train", &d.train)?;
        let cfg = PipelineConfig {
            pair,
            top_cap: c.get_or("pair.top_cap", d.top_cap)?,
            entropy_m: c.get_or("pair.entropy_m", d.entropy_m)?,
            collect_prompts: c.get_or("collect.prompts", d.collect_prompts)?,
            collect_prompt_len: c.get_or("collect.prompt_len", d.collect_prompt_len)?,
            collect_prompt_seed: c.get_or("collect.prompt_seed", d.collect_prompt_seed)?,
            collect_k: c.get_or("collect.K", d.collect_k)?,
            collect_d_max: c.get_or("collect.d_max", d.collect_d_max)?,
            collect_count: c.get_or("collect.count", d.collect_count)?,
            collect_seed: c.get_or("collect.seed", d.collect_seed)?,
            finetune: FineTuneConfig {
                lr: c.get_or("finetune.lr", d.finetune.lr)?,
                fraction: c.get_or("finetune.fraction", d.finetune.fraction)?,
                epochs: c.get_or("finetune.epochs", d.finetune.epochs)?,
                base: train.clone(),
            },
            train,
            bench_prompts: c.get_or("bench.prompts", d.bench_prompts)?,
            bench_prompt_len: c.get_or("bench.prompt_len", d.bench_prompt_len)?,
            bench_prompt_seed: c.get_or("bench.prompt_seed", d.bench_prompt_seed)?,
            gen_len: c.get_or("bench.gen_len", d.gen_len)?,
            bench_seed: c.get_or("bench.seed", d.bench_seed)?,
            top_k: c.get_or("bench.K", d.top_k)?,
            d_max: c.get_or("bench.d_max", d.d_max)?,
            second_topk: c.get_or("bench.second_topk", d.second_topk)?,
            beta: c.get_or("bench.beta", d.beta)?,
            betas: c.get_list("sweep.betas")?.unwrap_or(d.betas),
            eagle_ns: c.get_list("sweep.eagle_ns")?.unwrap_or(d.eagle_ns),
            accept_betas: c.get_list("accept.betas")?.unwrap_or(d.accept_betas),
            tau_ratio: c.get_or("accept.tau_ratio", d.tau_ratio)?,
            gamma_ratio: c.get_or("accept.gamma_ratio", d.gamma_ratio)?,
            depth_tolerance: c.get_or("accept.depth_tolerance", d.depth_tolerance)?,
            heatmap_steps: c.get_or("heatmap.steps", d.heatmap_steps)?,
            flops_vocab: c.get_or("flops.V", d.flops_vocab)?,
            flops_m: c.get_or("flops.M", d.flops_m)?,
            flops_k: c.get_or("flops.K", d.flops_k)?,
            flops_reps: c.get_or("flops.reps", d.flops_reps)?,
            flops_seed: c.get_or("flops.seed", d.flops_seed)?,
            gap_vocab: c.get_or("gap.V", d.gap_vocab)?,
            gap_m: c.get_or("gap.M", d.gap_m)?,
            gap_reps: c.get_or("gap.reps", d.gap_reps)?,
            gap_seed: c.get_or("gap.seed", d.gap_seed)?,
            chain_max_len: c.get_or("chain.max_len", d.chain_max_len)?,
            chain_stops: c.get_list("chain.stops")?.unwrap_or(d.chain_stops),
            side_prompts: c.get_or("side.prompts", d.side_prompts)?,
            top_ms: c.get_list("topm.values")?.unwrap_or(d.top_ms),
            hiddens: c.get_list("hidden.values")?.unwrap_or(d.hiddens),
            finetune_pair_seed: c.get_or("finetune.pair_seed", d.finetune_pair_seed)?,
            finetune_eps: c.get_or("finetune.eps", d.finetune_eps)?,
            finetune_count: c.get_or("finetune.count", d.finetune_count)?,
        };
        if cfg.betas.is_empty() || cfg.eagle_ns.is_empty() || cfg.accept_betas.is_empty() {
            return Err(Error::invalid("sweep grids must be non-empty"));
        }
        Ok(cfg)
    }

    pub fn draft_config(&self) -> DraftConfig {
        DraftConfig {
            strategy: Strategy::C2t,
            top_k: self.top_k,
            d_max: self.d_max,
            beta: self.beta,
            second_topk: self.second_topk,
            max_len: self.chain_max_len,
            ..DraftConfig::default()
        }
    }

    pub fn bench_prompts(&self) -> Vec<Vec<crate::TokenId>> {
        gen_prompts(self.pair.vocab, self.bench_prompts, self.bench_prompt_len, self.bench_prompt_seed)
    }

    pub fn pair(&self) -> Result<ModelPair> {
        ModelPair::from_spec(&self.pair, self.top_cap, self.entropy_m)
    }
}

pub fn set_train(c: &mut Config, prefix: &str, t: &TrainConfig) {
    c.set(format!("{prefix}.hidden"), t.hidden);
    c.set(format!("{prefix}.lr"), t.lr);
    c.set(format!("{prefix}.epochs"), t.epochs);
    c.set(format!("{prefix}.batch"), t.batch);
    c.set(format!("{prefix}.eval_batch"), t.eval_batch);
    c.set(format!("{prefix}.split"), t.split);
    c.set(format!("{prefix}.neg_ratio"), t.neg_ratio);
    c.set(format!("{prefix}.threshold"), t.threshold);
    c.set(format!("{prefix}.seed"), t.seed);
}

pub fn get_train(c: &Config, prefix: &str, d: &TrainConfig) -> Result<TrainConfig> {
    let k = |name: &str| format!("{prefix}.{name}");
    let t = TrainConfig {
        hidden: c.get_or(&k("hidden"), d.hidden)?,
        lr: c.get_or(&k("lr"), d.lr)?,
        epochs: c.get_or(&k("epochs"), d.epochs)?,
        batch: c.get_or(&k("batch"), d.batch)?,
        eval_batch: c.get_or(&k("eval_batch"), d.eval_batch)?,
        split: c.get_or(&k("split"), d.split)?,
        neg_ratio: c.get_or(&k("neg_ratio"), d.neg_ratio)?,
        threshold: c.get_or(&k("threshold"), d.threshold)?,
        seed: c.get_or(&k("seed"), d.seed)?,
    };
    t.validate()?;
    Ok(t)
}

/// Criterion check of C2T against the best-τ EAGLE-2 grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Headline {
    pub baseline_n: usize,
    pub baseline_tau: f64,
    pub baseline_gamma: usize,
    /// `(β, mean τ, total γ, τ ratio, γ ratio, pass)`.
    pub rows: Vec<(f64, f64, usize, f64, f64, bool)>,
}

impl Headline {
    pub fn passed(&self) -> bool {
        self.rows.iter().any(|r| r.5)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("# baseline: eagle2 N with the best mean tau over the grid (ties to smaller N)\n");
        let _ = writeln!(
            s,
            "# baseline N={} mean_tau={} total_gamma={}",
            self.baseline_n, self.baseline_tau, self.baseline_gamma
        );
        s.push_str("beta,mean_tau,total_gamma,tau_ratio,gamma_ratio,pass\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.0, r.1, r.2, r.3, r.4, r.5);
        }
        s
    }
}

/// Picks the baseline from `eagle` (param N, τ, γ) and scores every C2T
/// point in `c2t` (β, τ, γ) whose β is listed in `betas`.
pub fn headline(
    eagle: &[(usize, f64, usize)],
    c2t: &[(f64, f64, usize)],
    betas: &[f64],
    tau_ratio: f64,
    gamma_ratio: f64,
) -> Result<Headline> {
    let base = eagle
        .iter()
        .fold(None::<&(usize, f64, usize)>, |best, e| match best {
            Some(b) if b.1 > e.1 || (b.1 == e.1 && b.0 <= e.0) => Some(b),
            _ => Some(e),
        })
        .ok_or_else(|| Error::invalid("empty EAGLE-2 grid"))?;
    let rows = c2t
        .iter()
        .filter(|c| betas.contains(&c.0))
        .map(|&(beta, tau, gamma)| {
            let tr = tau / base.1;
            let gr = gamma as f64 / base.2 as f64;
            (beta, tau, gamma, tr, gr, tr >= tau_ratio && gr <= gamma_ratio)
        })
        .collect();
    Ok(Headline {
        baseline_n: base.0,
        baseline_tau: base.1,
        baseline_gamma: base.2,
        rows,
    })
}

/// Largest step-to-step increase of a curve (0 for a non-increasing one).
pub fn max_inversion(curve: &[f64]) -> f64 {
    curve.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

pub fn curve_csv(curves: &[(&str, &[f64])]) -> String {
    let mut s = String::from("# rate(l) = rounds with tau >= l / rounds whose verified tree reaches level l\nrun,level,accept_rate\n");
    for (name, c) in curves {
        for (i, x) in c.iter().enumerate() {
            let _ = writeln!(s, "{name},{},{x}", i + 1);
        }
    }
    s
}

pub struct PipelineOutput {
    /// File name to contents, manifest included.
    pub files: BTreeMap<String, String>,
    pub headline: Headline,
    /// Depth curve of the C2T run at the default β.
    pub depth_curve: Vec<f64>,
    /// Depth curve of the EAGLE-2 baseline.
    pub baseline_depth_curve: Vec<f64>,
    pub flops: Vec<FlopsRow>,
    pub classifier: MlpParams,
}

struct HashWriter(Sha256);

impl io::Write for HashWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), |v| v.to_string())
}

/// Runs every stage; `log` receives one line per stage.
pub fn run_pipeline(cfg: &PipelineConfig, mut log: impl FnMut(&str)) -> Result<PipelineOutput> {
    let mut files = BTreeMap::new();
    let manifest = cfg.to_manifest();
    let mut names: Vec<&str> = vec![
        "pair.csv",
        "corpus_summary.csv",
        "classifier.json",
        "train_curve.csv",
        "bench_summary.csv",
        "bench_rounds.csv",
        "sweep.csv",
        "headline.csv",
        "heatmap.csv",
        "depth_curve.csv",
        "flops.csv",
        "surface.csv",
        "entropy_gap.csv",
        "chain.csv",
        "topm.csv",
        "hidden.csv",
        "finetune.csv",
    ];
    names.sort_unstable();
    let mut manifest = manifest;
    manifest.set("files", names.join(","));
    files.insert(MANIFEST_FILE.to_string(), manifest.to_string());

    log("model pair");
    let pair = cfg.pair()?;
    let hist = entropy_histogram(pair.target.model(), 2000, cfg.pair.seed);
    let mut s = String::from("key,value\n");
    let _ = writeln!(s, "vocab,{}", cfg.pair.vocab);
    let _ = writeln!(s, "order,{}", cfg.pair.order);
    let _ = writeln!(s, "seed,{}", cfg.pair.seed);
    let _ = writeln!(s, "schedule,{}", cfg.pair.schedule_string().replace(',', " "));
    let _ = writeln!(s, "eps,{}", cfg.pair.draft_noise);
    let _ = writeln!(s, "noise_concentration,{}", cfg.pair.noise_concentration);
    let _ = writeln!(s, "draft_mode,{}", cfg.pair.draft_mode);
    let _ = writeln!(s, "target_entropy_hist_2000_rows,{}", join(&hist).replace(',', " "));
    files.insert("pair.csv".into(), s);

    log("collect corpus");
    let cprompts = gen_prompts(cfg.pair.vocab, cfg.collect_prompts, cfg.collect_prompt_len, cfg.collect_prompt_seed);
    let corpus = collect_labeled_trees(&pair, &cprompts, cfg.collect_k, cfg.collect_d_max, cfg.collect_count, cfg.collect_seed)?;
    let mut hasher = HashWriter(Sha256::new());
    corpus.write_jsonl(&mut hasher)?;
    let digest = hex::encode(hasher.0.finalize());
    let positives: usize = corpus.taus.iter().sum();
    let mut s = String::from("key,value\n");
    let _ = writeln!(s, "trees,{}", corpus.taus.len());
    let _ = writeln!(s, "rows,{}", corpus.rows.len());
    let _ = writeln!(s, "positives,{positives}");
    let _ = writeln!(s, "mean_tau,{}", positives as f64 / corpus.taus.len().max(1) as f64);
    let _ = writeln!(s, "jsonl_sha256,{digest}");
    files.insert("corpus_summary.csv".into(), s);
    let examples = corpus.examples();
    drop(corpus);

    log("train classifier");
    let (clf, curve) = train(&examples, &cfg.train)?;
    files.insert("classifier.json".into(), clf.to_json()? + "\n");
    let mut s = String::from(EpochStats::CSV_HEADER);
    s.push('\n');
    for e in &curve {
        let _ = writeln!(s, "{}", e.csv_row());
    }
    files.insert("train_curve.csv".into(), s);

    log("benchmark and sweeps");
    let prompts = cfg.bench_prompts();
    let base = cfg.draft_config();
    let bench = |dc: &DraftConfig, p: &[Vec<crate::TokenId>]| -> Result<BenchReport> {
        run_benchmark(&pair, dc, Some(&clf), p, cfg.gen_len, cfg.bench_seed)
    };
    let main = bench(&base, &prompts)?;
    files.insert("bench_summary.csv".into(), main.summary_csv());
    files.insert("bench_rounds.csv".into(), main.rounds_csv());

    let mut sweep = String::from(SWEEP_HEADER);
    sweep.push('\n');
    let mut eagle = Vec::new();
    let mut eagle_reports = Vec::new();
    for &n in &cfg.eagle_ns {
        let r = bench(&DraftConfig { strategy: Strategy::Eagle2, top_n: n, ..base.clone() }, &prompts)?;
        let _ = writeln!(sweep, "eagle2,{n},{},{}", r.mean_tau(), r.total_gamma());
        eagle.push((n, r.mean_tau(), r.total_gamma()));
        eagle_reports.push(r);
    }
    let mut c2t = Vec::new();
    for &b in &cfg.betas {
        let r = if b == cfg.beta {
            main.clone()
        } else {
            bench(&DraftConfig { beta: b, ..base.clone() }, &prompts)?
        };
        let _ = writeln!(sweep, "c2t,{b},{},{}", r.mean_tau(), r.total_gamma());
        c2t.push((b, r.mean_tau(), r.total_gamma()));
    }
    files.insert("sweep.csv".into(), sweep);
    let head = headline(&eagle, &c2t, &cfg.accept_betas, cfg.tau_ratio, cfg.gamma_ratio)?;
    files.insert("headline.csv".into(), head.to_csv());

    let depth_curve = depth_accept_curve(&main);
    let best = eagle.iter().position(|e| e.0 == head.baseline_n).expect("baseline in grid");
    let eagle_curve = depth_accept_curve(&eagle_reports[best]);
    let c2t_name = format!("c2t beta={}", cfg.beta);
    let eagle_name = format!("eagle2 N={}", head.baseline_n);
    files.insert(
        "depth_curve.csv".into(),
        curve_csv(&[(&c2t_name, &depth_curve), (&eagle_name, &eagle_curve)]),
    );
    drop(eagle_reports);

    log("heatmap");
    let h = heatmap(&pair, &prompts, cfg.heatmap_steps)?;
    files.insert("heatmap.csv".into(), h.to_csv());

    log("op counts");
    let flops = flops_report(cfg.flops_vocab, cfg.flops_m, cfg.flops_k, cfg.flops_reps, cfg.flops_seed)?;
    let mut s = flops_csv(&flops);
    s.push_str("\n# per repetition: select_then_joint < joint_then_select, topm_entropy < full_entropy\nrep,selection_ordering,entropy_ordering\n");
    for (rep, a, b) in orderings(&flops) {
        let _ = writeln!(s, "{rep},{a},{b}");
    }
    files.insert("flops.csv".into(), s);

    log("confidence surface");
    files.insert("surface.csv".into(), surface_csv(&confidence_surface(&clf, &SurfaceGrid::default())));

    log("entropy truncation gap");
    files.insert("entropy_gap.csv".into(), entropy_gap_csv(cfg.gap_vocab, cfg.gap_m, cfg.gap_reps, cfg.gap_seed)?);

    log("chain mode");
    let mut s = String::from("chain_stop,max_len,mean_tau,total_gamma,rounds,recall,theta\n");
    for stop in &cfg.chain_stops {
        let dc = DraftConfig {
            strategy: Strategy::Chain,
            chain_stop: *stop,
            ..base.clone()
        };
        let r = bench(&dc, &prompts)?;
        let t = r.classifier;
        let _ = writeln!(
            s,
            "{stop},{},{},{},{},{},{}",
            cfg.chain_max_len,
            r.mean_tau(),
            r.total_gamma(),
            r.rounds.len(),
            opt(t.and_then(|t| t.recall())),
            opt(t.and_then(|t| t.theta()))
        );
    }
    files.insert("chain.csv".into(), s);

    let side = &prompts[..cfg.side_prompts.min(prompts.len())];
    log("top-M sensitivity");
    let mut s = String::from("M,mean_tau,total_gamma,recall,theta\n");
    for &m in &cfg.top_ms {
        let p = ModelPair {
            spec: pair.spec.clone(),
            target: pair.target.with_entropy_m(cfg.entropy_m),
            draft: pair.draft.with_entropy_m(m),
        };
        let r = run_benchmark(&p, &base, Some(&clf), side, cfg.gen_len, cfg.bench_seed)?;
        let t = r.classifier.unwrap_or_default();
        let _ = writeln!(s, "{m},{},{},{},{}", r.mean_tau(), r.total_gamma(), opt(t.recall()), opt(t.theta()));
    }
    files.insert("topm.csv".into(), s);

    log("hidden size sweep");
    let mut s = String::from("hidden,train_loss,val_loss,val_recall,val_theta,mean_tau,total_gamma\n");
    for &hidden in &cfg.hiddens {
        let tc = TrainConfig { hidden, ..cfg.train.clone() };
        let (params, curve) = train(&examples, &tc)?;
        let last = curve.last().copied();
        let r = run_benchmark(&pair, &base, Some(&params), side, cfg.gen_len, cfg.bench_seed)?;
        let _ = writeln!(
            s,
            "{hidden},{},{},{},{},{},{}",
            opt(last.map(|e| e.train_loss)),
            opt(last.map(|e| e.val_loss)),
            opt(last.and_then(|e| e.val_recall)),
            opt(last.map(|e| e.val_theta)),
            r.mean_tau(),
            r.total_gamma()
        );
    }
    files.insert("hidden.csv".into(), s);
    drop(examples);

    log("fine-tune on a second pair");
    files.insert("finetune.csv".into(), finetune_study(cfg, &clf, &cprompts)?);

    Ok(PipelineOutput {
        files,
        headline: head,
        depth_curve,
        baseline_depth_curve: eagle_curve,
        flops,
        classifier: clf,
    })
}

fn finetune_study(cfg: &PipelineConfig, clf: &MlpParams, prompts: &[Vec<crate::TokenId>]) -> Result<String> {
    let spec = ModelPairSpec {
        seed: cfg.finetune_pair_seed,
        draft_noise: cfg.finetune_eps,
        ..cfg.pair.clone()
    };
    let pair = ModelPair::from_spec(&spec, cfg.top_cap, cfg.entropy_m)?;
    let corpus = collect_labeled_trees(&pair, prompts, cfg.collect_k, cfg.collect_d_max, cfg.finetune_count, cfg.collect_seed)?;
    let examples = corpus.examples();
    drop(corpus);
    let (tune, val) = split_examples(&examples, cfg.train.split, cfg.train.seed)?;
    let (tuned, _) = fine_tune(clf, &tune, &cfg.finetune)?;
    let th = cfg.train.threshold;
    let frozen = evaluate(clf, &val, th)?;
    let after = evaluate(&tuned, &val, th)?;
    let mut s = String::from("# evaluated on the held-out trees of the second pair\nmodel,recall,theta,loss\n");
    for (name, e) in [("frozen", frozen), ("fine_tuned", after)] {
        let _ = writeln!(s, "{name},{},{},{}", opt(e.recall), e.positive_rate, e.loss);
    }
    Ok(s)
}

/// Truncated versus full entropy on Dirichlet(1) rows.
pub fn entropy_gap_csv(vocab: usize, m: usize, reps: usize, seed: u64) -> Result<String> {
    let mut r = rng::stream(seed, rng::DATASET);
    let mut s = String::from("# Dirichlet(1) rows, entropy in nats\nrep,V,M,full,truncated,gap,relative_gap\n");
    for rep in 0..reps {
        let row = dirichlet_row(&mut r, 1.0, vocab);
        let full = entropy(&row);
        let trunc = truncated_entropy(&row, m)?;
        let _ = writeln!(s, "{rep},{vocab},{m},{full},{trunc},{},{}", full - trunc, (full - trunc) / full);
    }
    Ok(s)
}

/// Writes every output file into `dir`.
pub fn write_outputs(out: &PipelineOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, body) in &out.files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// One mismatch found by [`compare_dir`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub file: String,
    pub reason: String,
}

/// Byte-compares `out` with the files listed in `dir`'s manifest.
pub fn compare_dir(out: &PipelineOutput, dir: &Path) -> Result<Vec<Mismatch>> {
    let manifest = Config::load(&dir.join(MANIFEST_FILE))?;
    let listed: Vec<String> = manifest
        .get_list("files")?
        .ok_or_else(|| Error::malformed("manifest", "no files entry"))?;
    let mut bad = Vec::new();
    for name in std::iter::once(MANIFEST_FILE.to_string()).chain(listed) {
        let path = dir.join(&name);
        let want = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(_) => {
                bad.push(Mismatch { file: name, reason: "missing in golden directory".into() });
                continue;
            }
        };
        match out.files.get(&name) {
            None => bad.push(Mismatch { file: name, reason: "not produced".into() }),
            Some(got) if *got != want => {
                let line = got.lines().zip(want.lines()).position(|(a, b)| a != b).map_or_else(
                    || got.lines().count().min(want.lines().count()) + 1,
                    |i| i + 1,
                );
                bad.push(Mismatch { file: name, reason: format!("differs at line {line}") });
            }
            Some(_) => {}
        }
    }
    Ok(bad)
}
