//! `c2t`: command-line front end for the drafting lab.
//!
//! Every subcommand reads an optional flat `key = value` config file
//! (`--config`); flags override file entries, which override defaults.
//! Each run writes a manifest of the resolved settings next to its output.
//! Relative output paths are placed under `$C2T_OUT_DIR` when it is set.
//!
//! Exit codes: 0 ok, 1 usage, 2 data error, 3 golden check failure.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use c2t_core::bench::{
    confidence_surface, gen_prompts, heatmap, run_benchmark, surface_csv, sweep, Grid, SurfaceGrid, SWEEP_HEADER,
};
use c2t_core::classifier::{fine_tune, train, EpochStats, FineTuneConfig, TrainConfig};
use c2t_core::config::Config;
use c2t_core::datagen::{collect_labeled_trees, Corpus};
use c2t_core::drafting::DEFAULT_STATIC_SHAPE;
use c2t_core::models::{entropy_histogram, gen_target, derive_draft, load_model, save_model, DraftMode, RowStorage};
use c2t_core::opcount::{flops_csv, flops_report};
use c2t_core::pipeline::{self, PipelineConfig, MANIFEST_FILE, TOOL_VERSION};
use c2t_core::{ChainStop, DraftConfig, MlpParams, ModelPair, ModelPairSpec, Strategy};

const OUT_DIR_ENV: &str = "C2T_OUT_DIR";

#[derive(Parser)]
#[command(name = "c2t", version, about = "Classifier-guided token-tree drafting lab")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Flat key = value file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct PairArgs {
    /// Directory written by `gen-model`; the bundled pair when omitted.
    #[arg(long)]
    pair: Option<PathBuf>,
    #[arg(long)]
    top_cap: Option<usize>,
    /// Entropy truncation M.
    #[arg(long)]
    entropy_m: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct PromptArgs {
    #[arg(long)]
    prompts: Option<usize>,
    #[arg(long)]
    prompt_len: Option<usize>,
    #[arg(long)]
    prompt_seed: Option<u64>,
}

#[derive(Args, Clone, Default)]
struct DraftArgs {
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long)]
    dmax: Option<usize>,
    /// EAGLE-2 rerank budget N.
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    second_topk: Option<bool>,
    /// `none`, `dymax`, `dyjoint`, `c2t-chain` or `kind:value`.
    #[arg(long)]
    chain_stop: Option<ChainStop>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Comma-separated per-layer node counts.
    #[arg(long)]
    static_shape: Option<String>,
    /// Classifier checkpoint (needed by c2t and classifier chain stops).
    #[arg(long)]
    classifier: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct TrainArgs {
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    eval_batch: Option<usize>,
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    neg_ratio: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a target/draft pair.
    GenModel {
        #[arg(long)]
        vocab: Option<usize>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Dirichlet mixture as `c:w,c:w,...`.
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        noise_concentration: Option<f64>,
        #[arg(long)]
        draft_mode: Option<DraftMode>,
        #[arg(long)]
        spread_bins: Option<usize>,
        /// procedural, jsonl or blob.
        #[arg(long)]
        storage: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Harvest labeled full expansion trees.
    Collect {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        prompts: PromptArgs,
        #[arg(long)]
        topk: Option<usize>,
        #[arg(long)]
        dmax: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train the confidence classifier on a corpus.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Fine-tune a checkpoint on a subsample of another corpus.
    Finetune {
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        fraction: Option<f64>,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Benchmark one drafting configuration.
    Eval {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        prompts: PromptArgs,
        #[command(flatten)]
        draft: DraftArgs,
        #[arg(long)]
        gen_len: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// β sweep for C2T and/or N sweep for EAGLE-2.
    Sweep {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        prompts: PromptArgs,
        #[command(flatten)]
        draft: DraftArgs,
        /// Comma-separated β grid (runs C2T).
        #[arg(long)]
        betas: Option<String>,
        /// Comma-separated N grid (runs EAGLE-2).
        #[arg(long)]
        ns: Option<String>,
        #[arg(long)]
        gen_len: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Entropy-bin by rank statistics of the draft model.
    Heatmap {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        prompts: PromptArgs,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Instrumented operation counts for the selection and entropy orders.
    Flops {
        #[arg(long)]
        vocab: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Dense confidence grid of a checkpoint.
    Surface {
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long)]
        p_steps: Option<usize>,
        #[arg(long)]
        h_steps: Option<usize>,
        #[arg(long)]
        h_max: Option<f64>,
        #[arg(long)]
        d_max: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run the bundled pipeline and diff it against the golden files.
    VerifyGolden {
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Write the outputs into the golden directory instead of diffing.
        #[arg(long)]
        bless: bool,
        #[command(flatten)]
        common: Common,
    },
}

enum Fail {
    Usage(String),
    Data(String),
    Check(String),
}

impl From<c2t_core::Error> for Fail {
    fn from(e: c2t_core::Error) -> Self {
        if e.is_data_error() {
            Fail::Data(e.to_string())
        } else {
            Fail::Usage(e.to_string())
        }
    }
}

type Run<T = ()> = Result<T, Fail>;

/// Flag, then config file, then default; every resolved value is recorded.
struct Settings {
    file: Config,
    manifest: Config,
}

impl Settings {
    fn new(common: &Common, command: &str) -> Run<Self> {
        let file = match &common.config {
            Some(p) => Config::load(p)?,
            None => Config::new(),
        };
        let mut manifest = Config::new();
        manifest.set("command", command);
        manifest.set("tool_version", TOOL_VERSION);
        if let Some(p) = &common.config {
            manifest.set("config_file", p.display());
        }
        if let Some(n) = common.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Fail::Usage(format!("threads: {e}")))?;
        }
        Ok(Settings { file, manifest })
    }

    fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Run<T> {
        let v = match flag {
            Some(v) => v,
            None => self.file.get(key)?.unwrap_or(default),
        };
        self.manifest.set(key, &v);
        Ok(v)
    }

    fn opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Run<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file.get(key)?,
        };
        if let Some(v) = &v {
            self.manifest.set(key, v);
        }
        Ok(v)
    }

    fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Run<Option<PathBuf>> {
        let v = flag.or_else(|| self.file.raw(key).map(PathBuf::from));
        if let Some(p) = &v {
            self.manifest.set(key, p.display());
        }
        Ok(v)
    }

    fn require_path(&mut self, key: &str, flag: Option<PathBuf>) -> Run<PathBuf> {
        self.path(key, flag)?
            .ok_or_else(|| Fail::Usage(format!("missing --{}", key.replace('_', "-"))))
    }

    fn out(&mut self, flag: Option<PathBuf>, default: &str) -> Run<PathBuf> {
        let p = self.path("out", flag)?.unwrap_or_else(|| PathBuf::from(default));
        let p = match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if p.is_relative() => PathBuf::from(dir).join(p),
            _ => p,
        };
        self.manifest.set("out", p.display());
        Ok(p)
    }

    fn seeds(&mut self, key: &str, seed: u64) {
        self.manifest.set(format!("seed.{key}"), seed);
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Run<Vec<T>> {
    let v: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| Fail::Usage(format!("bad {what} entry {x:?}"))))
        .collect::<Run<_>>()?;
    if v.is_empty() {
        return Err(Fail::Usage(format!("empty {what}")));
    }
    Ok(v)
}

fn write_file(path: &Path, body: &str) -> Run {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Fail::Data(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, body).map_err(|e| Fail::Data(format!("{}: {e}", path.display())))
}

/// `x.csv` gets `x.manifest.txt`; a directory gets `manifest.txt` inside.
fn write_manifest(s: &Settings, out: &Path, is_dir: bool) -> Run {
    let path = if is_dir {
        out.join(MANIFEST_FILE)
    } else {
        let stem = out.file_stem().and_then(|x| x.to_str()).unwrap_or("out");
        out.with_file_name(format!("{stem}.manifest.txt"))
    };
    write_file(&path, &s.manifest.to_string())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|x| x.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn load_pair(s: &mut Settings, a: &PairArgs) -> Run<ModelPair> {
    let bundled = PipelineConfig::default();
    let top_cap = s.get("top_cap", a.top_cap, bundled.top_cap)?;
    let entropy_m = s.get("entropy_m", a.entropy_m, bundled.entropy_m)?;
    match s.path("pair", a.pair.clone())? {
        Some(dir) => {
            let (th, target) = load_model(&dir.join("target.model"))?;
            let (_, draft) = load_model(&dir.join("draft.model"))?;
            let mut pair = ModelPair::new(target, draft, top_cap, entropy_m)?;
            if let Some(spec) = th.spec {
                s.seeds("pair", spec.seed);
                pair.spec = Some(spec);
            }
            Ok(pair)
        }
        None => {
            s.manifest.set("pair", "bundled");
            s.seeds("pair", bundled.pair.seed);
            Ok(ModelPair::from_spec(&bundled.pair, top_cap, entropy_m)?)
        }
    }
}

fn load_prompts(s: &mut Settings, a: &PromptArgs, vocab: usize, seed: u64) -> Run<Vec<Vec<c2t_core::TokenId>>> {
    let n = s.get("prompts", a.prompts, 200)?;
    let len = s.get("prompt_len", a.prompt_len, 8)?;
    let seed = s.get("prompt_seed", a.prompt_seed, seed)?;
    s.seeds("prompts", seed);
    Ok(gen_prompts(vocab, n, len, seed))
}

fn draft_config(s: &mut Settings, a: &DraftArgs) -> Run<(DraftConfig, Option<MlpParams>)> {
    let d = DraftConfig::default();
    let shape = match s.opt::<String>("static_shape", a.static_shape.clone())? {
        Some(x) => parse_list(&x, "static shape")?,
        None => DEFAULT_STATIC_SHAPE.to_vec(),
    };
    let cfg = DraftConfig {
        strategy: s.get("strategy", a.strategy, d.strategy)?,
        top_k: s.get("topk", a.topk, d.top_k)?,
        d_max: s.get("dmax", a.dmax, d.d_max)?,
        beta: s.get("beta", a.beta, d.beta)?,
        top_n: s.get("top_n", a.top_n, d.top_n)?,
        second_topk: s.get("second_topk", a.second_topk, d.second_topk)?,
        chain_stop: s.get("chain_stop", a.chain_stop, d.chain_stop)?,
        max_len: s.get("max_len", a.max_len, d.max_len)?,
        static_shape: shape,
    };
    cfg.validate()?;
    let clf = match s.path("classifier", a.classifier.clone())? {
        Some(p) => Some(MlpParams::load(&p)?),
        None => None,
    };
    Ok((cfg, clf))
}

fn train_config(s: &mut Settings, a: &TrainArgs, d: &TrainConfig) -> Run<TrainConfig> {
    let t = TrainConfig {
        hidden: s.get("hidden", a.hidden, d.hidden)?,
        lr: s.get("lr", a.lr, d.lr)?,
        epochs: s.get("epochs", a.epochs, d.epochs)?,
        batch: s.get("batch", a.batch, d.batch)?,
        eval_batch: s.get("eval_batch", a.eval_batch, d.eval_batch)?,
        split: s.get("split", a.split, d.split)?,
        neg_ratio: s.get("neg_ratio", a.neg_ratio, d.neg_ratio)?,
        threshold: s.get("threshold", a.threshold, d.threshold)?,
        seed: s.get("seed", a.seed, d.seed)?,
    };
    t.validate()?;
    Ok(t)
}

fn curve_csv(curve: &[EpochStats]) -> String {
    let mut s = String::from(EpochStats::CSV_HEADER);
    s.push('\n');
    for e in curve {
        s.push_str(&e.csv_row());
        s.push('\n');
    }
    s
}

fn run(cmd: Cmd) -> Run {
    match cmd {
        Cmd::GenModel {
            vocab,
            order,
            seed,
            schedule,
            eps,
            noise_concentration,
            draft_mode,
            spread_bins,
            storage,
            out,
            common,
        } => {
            let mut s = Settings::new(&common, "gen-model")?;
            let b = PipelineConfig::default().pair;
            let sched = s.get("schedule", schedule, b.schedule_string())?;
            let spec = ModelPairSpec {
                vocab: s.get("vocab", vocab, b.vocab)?,
                order: s.get("order", order, b.order)?,
                seed: s.get("seed", seed, b.seed)?,
                concentration_schedule: ModelPairSpec::parse_schedule(&sched)?,
                draft_noise: s.get("eps", eps, b.draft_noise)?,
                noise_concentration: s.get("noise_concentration", noise_concentration, b.noise_concentration)?,
                draft_mode: s.get("draft_mode", draft_mode, b.draft_mode)?,
                spread_bins: s.get("spread_bins", spread_bins, b.spread_bins)?,
            };
            let storage = match s.get("storage", storage, "procedural".to_string())?.as_str() {
                "procedural" => RowStorage::Procedural,
                "jsonl" => RowStorage::Jsonl,
                "blob" => RowStorage::Blob,
                other => return Err(Fail::Usage(format!("unknown storage {other:?}"))),
            };
            let out = s.out(out, "pair")?;
            let target = gen_target(&spec)?;
            let draft = derive_draft(&target, &spec)?;
            std::fs::create_dir_all(&out).map_err(|e| Fail::Data(format!("{}: {e}", out.display())))?;
            save_model(&out.join("target.model"), &target, "target", Some(&spec), storage)?;
            save_model(&out.join("draft.model"), &draft, "draft", Some(&spec), storage)?;
            let hist = entropy_histogram(&target, 2000, spec.seed);
            let echo = serde_json::json!({ "spec": spec, "target_entropy_hist_2000_rows": hist });
            write_file(&out.join("spec.json"), &(echo.to_string() + "\n"))?;
            write_manifest(&s, &out, true)
        }
        Cmd::Collect {
            pair,
            prompts,
            topk,
            dmax,
            count,
            seed,
            out,
            common,
        } => {
            let mut s = Settings::new(&common, "collect")?;
            let p = load_pair(&mut s, &pair)?;
            let pr = load_prompts(&mut s, &prompts, p.vocab(), 7)?;
            let k = s.get("topk", topk, 10)?;
            let d = s.get("dmax", dmax, 11)?;
            let count = s.get("count", count, 8880)?;
            let seed = s.get("seed", seed, 42)?;
            let out = s.out(out, "corpus.jsonl")?;
            let corpus = collect_labeled_trees(&p, &pr, k, d, count, seed)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Fail::Data(format!("{}: {e}", dir.display())))?;
            }
            corpus.save(&out)?;
            s.manifest.set("rows", corpus.rows.len());
            write_manifest(&s, &out, false)
        }
        Cmd::Train { data, train: ta, out, common } => {
            let mut s = Settings::new(&common, "train")?;
            let data = s.require_path("data", data)?;
            let tc = train_config(&mut s, &ta, &TrainConfig::default())?;
            let out = s.out(out, "classifier.json")?;
            let corpus = Corpus::load(&data)?;
            let (params, curve) = train(&corpus.examples(), &tc)?;
            write_file(&out, &(params.to_json()? + "\n"))?;
            write_file(&sibling(&out, ".curve.csv"), &curve_csv(&curve))?;
            write_manifest(&s, &out, false)
        }
        Cmd::Finetune {
            ckpt,
            data,
            fraction,
            train: ta,
            out,
            common,
        } => {
            let mut s = Settings::new(&common, "finetune")?;
            let ckpt = s.require_path("ckpt", ckpt)?;
            let data = s.require_path("data", data)?;
            let d = FineTuneConfig::default();
            let base = TrainConfig {
                lr: d.lr,
                epochs: d.epochs,
                ..TrainConfig::default()
            };
            let tc = train_config(&mut s, &ta, &base)?;
            let ft = FineTuneConfig {
                lr: tc.lr,
                epochs: tc.epochs,
                fraction: s.get("fraction", fraction, d.fraction)?,
                base: tc,
            };
            let out = s.out(out, "finetuned.json")?;
            let params = MlpParams::load(&ckpt)?;
            let corpus = Corpus::load(&data)?;
            let (tuned, curve) = fine_tune(&params, &corpus.examples(), &ft)?;
            write_file(&out, &(tuned.to_json()? + "\n"))?;
            write_file(&sibling(&out, ".curve.csv"), &curve_csv(&curve))?;
            write_manifest(&s, &out, false)
        }
        Cmd::Eval {
            pair,
            prompts,
            draft,
            gen_len,
            seed,
            out,
            common,
        } => {
            let mut s = Settings::new(&common, "eval")?;
            let p = load_pair(&mut s, &pair)?;
            let pr = load_prompts(&mut s, &prompts, p.vocab(), 42)?;
            let (cfg, clf) = draft_config(&mut s, &draft)?;
            let gen_len = s.get("gen_len", gen_len, 64)?;
            let seed = s.get("seed", seed, 42)?;
            let out = s.out(out, "eval")?;
            let r = run_benchmark(&p, &cfg, clf.as_ref(), &pr, gen_len, seed)?;
            write_file(&out.join("summary.csv"), &r.summary_csv())?;
            write_file(&out.join("rounds.csv"), &r.rounds_csv())?;
            write_manifest(&s, &out, true)?;
            println!("{}: mean_tau={} total_gamma={}", r.label(), r.mean_tau(), r.total_gamma());
            Ok(())
        }
        Cmd::Sweep {
            pair,
            prompts,
            draft,
            betas,
            ns,
            gen_len,
            seed,
            out,
            common,
        } => {
            let mut s = Settings::new(&common, "sweep")?;
            let p = load_pair(&mut s, &pair)?;
            let pr = load_prompts(&mut s, &prompts, p.vocab(), 42)?;
            let (cfg, clf) = draft_config(&mut s, &draft)?;
            let betas = s.opt::<String>("betas", betas)?;
            let ns = s.opt::<String>("ns", ns)?;
            if betas.is_none() && ns.is_none() {
                return Err(Fail::Usage("sweep needs --betas and/or --ns".into()));
            }
            let gen_len = s.get("gen_len", gen_len, 64)?;
            let seed = s.get("seed", seed, 42)?;
            let out = s.out(out, "sweep.csv")?;
            let mut rows = Vec::new();
            if let Some(n) = ns {
                rows.extend(sweep(&p, &cfg, &Grid::TopN(parse_list(&n, "N grid")?), clf.as_ref(), &pr, gen_len, seed)?);
            }
            if let Some(b) = betas {
                rows.extend(sweep(&p, &cfg, &Grid::Beta(parse_list(&b, "beta grid")?), clf.as_ref(), &pr, gen_len, seed)?);
            }
            let mut csv = String::from(SWEEP_HEADER);
            csv.push('\n');
            for r in &rows {
                csv.push_str(&r.csv_row());
                csv.push('\n');
            }
            write_file(&out, &csv)?;
            write_manifest(&s, &out, false)
        }
        Cmd::Heatmap {
            pair,
            prompts,
            steps,
            out,
            common,
        } => {
            let mut s = Settings::new(&common, "heatmap")?;
            let p = load_pair(&mut s, &pair)?;
            let pr = load_prompts(&mut s, &prompts, p.vocab(), 42)?;
            let steps = s.get("steps", steps, 64)?;
            let out = s.out(out, "heatmap.csv")?;
            let h = heatmap(&p, &pr, steps)?;
            let cov = h.coverage(30);
            if cov < 0.5 {
                eprintln!("warning: only {:.0}% of heatmap cells have 30 samples", cov * 100.0);
            }
            write_file(&out, &h.to_csv())?;
            write_manifest(&s, &out, false)
        }
        Cmd::Flops {
            vocab,
            m,
            k,
            reps,
            seed,
            out,
            common,
        } => {
            let mut s = Settings::new(&common, "flops")?;
            let v = s.get("vocab", vocab, 32000)?;
            let m = s.get("m", m, 1000)?;
            let k = s.get("k", k, 15)?;
            let reps = s.get("reps", reps, 10)?;
            let seed = s.get("seed", seed, 42)?;
            let out = s.out(out, "flops.csv")?;
            write_file(&out, &flops_csv(&flops_report(v, m, k, reps, seed)?))?;
            write_manifest(&s, &out, false)
        }
        Cmd::Surface {
            classifier,
            p_steps,
            h_steps,
            h_max,
            d_max,
            out,
            common,
        } => {
            let mut s = Settings::new(&common, "surface")?;
            let ckpt = s.require_path("classifier", classifier)?;
            let d = SurfaceGrid::default();
            let grid = SurfaceGrid {
                p_steps: s.get("p_steps", p_steps, d.p_steps)?,
                h_steps: s.get("h_steps", h_steps, d.h_steps)?,
                h_max: s.get("h_max", h_max, d.h_max)?,
                d_max: s.get("d_max", d_max, d.d_max)?,
            };
            let out = s.out(out, "surface.csv")?;
            let params = MlpParams::load(&ckpt)?;
            write_file(&out, &surface_csv(&confidence_surface(&params, &grid)))?;
            write_manifest(&s, &out, false)
        }
        Cmd::VerifyGolden { golden, bless, common } => {
            let mut s = Settings::new(&common, "verify-golden")?;
            let dir = s.path("golden", golden)?.unwrap_or_else(|| PathBuf::from("golden"));
            let cfg = if bless {
                PipelineConfig::default()
            } else {
                PipelineConfig::from_manifest(&Config::load(&dir.join(MANIFEST_FILE))?)?
            };
            let out = pipeline::run_pipeline(&cfg, |stage| eprintln!("stage: {stage}"))?;
            if bless {
                pipeline::write_outputs(&out, &dir)?;
                return Ok(());
            }
            let bad = pipeline::compare_dir(&out, &dir)?;
            for m in &bad {
                eprintln!("mismatch: {}: {}", m.file, m.reason);
            }
            if bad.is_empty() {
                println!("verify-golden: {} files match", out.files.len());
                Ok(())
            } else {
                Err(Fail::Check(format!("verify-golden: {} files differ", bad.len())))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("bad arguments").trim_start_matches("error: ");
            eprintln!("error: usage: {line}");
            return ExitCode::from(1);
        }
    };
    let (kind, msg, code) = match run(cli.cmd) {
        Ok(()) => return ExitCode::SUCCESS,
        Err(Fail::Usage(m)) => ("usage", m, 1),
        Err(Fail::Data(m)) => ("data", m, 2),
        Err(Fail::Check(m)) => ("check", m, 3),
    };
    eprintln!("error: {kind}: {}", msg.replace('\n', " "));
    ExitCode::from(code)
}
