//! Experiment harness: autoregressive benchmark loop, parameter sweeps,
//! entropy/rank heatmaps, per-depth accept curves and confidence surfaces.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::drafting::{self, DraftConfig, Scorer, Strategy};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::models::{entropy_bin, DistributionOracle, ModelPair, ENTROPY_BIN_EDGES};
use crate::rng;
use crate::verification::verify_greedy;
use crate::TokenId;

pub const HEATMAP_BINS: usize = 7;
pub const HEATMAP_RANKS: usize = 20;
/// Written for undefined cells in every CSV.
pub const NA: &str = "NA";

/// `n` random prompts of `len` tokens from the `prompts` stream.
pub fn gen_prompts(vocab: usize, n: usize, len: usize, seed: u64) -> Vec<Vec<TokenId>> {
    let mut r = rng::stream(seed, rng::PROMPTS);
    (0..n)
        .map(|_| (0..len).map(|_| r.random_range(0..vocab as TokenId)).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundRecord {
    pub prompt_id: usize,
    pub round: usize,
    pub tau: usize,
    pub gamma: usize,
    /// Deepest level of the verified tree.
    pub depth: usize,
}

/// Classifier decisions scored against what verification accepted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassifierTally {
    pub scored: usize,
    pub positives: usize,
    pub true_positives: usize,
    pub predicted: usize,
}

impl ClassifierTally {
    pub fn recall(&self) -> Option<f64> {
        (self.positives > 0).then(|| self.true_positives as f64 / self.positives as f64)
    }

    pub fn theta(&self) -> Option<f64> {
        (self.scored > 0).then(|| self.predicted as f64 / self.scored as f64)
    }

    fn add(&mut self, o: &ClassifierTally) {
        self.scored += o.scored;
        self.positives += o.positives;
        self.true_positives += o.true_positives;
        self.predicted += o.predicted;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpTotals {
    pub draft_calls: usize,
    pub classifier_calls: usize,
    pub target_calls: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub config: DraftConfig,
    pub seed: u64,
    pub gen_len: usize,
    pub prompts: usize,
    /// Merged in prompt order, then round order.
    pub rounds: Vec<RoundRecord>,
    pub classifier: Option<ClassifierTally>,
    pub ops: OpTotals,
}

impl BenchReport {
    pub fn total_tau(&self) -> usize {
        self.rounds.iter().map(|r| r.tau).sum()
    }

    pub fn total_gamma(&self) -> usize {
        self.rounds.iter().map(|r| r.gamma).sum()
    }

    pub fn mean_tau(&self) -> f64 {
        if self.rounds.is_empty() {
            0.0
        } else {
            self.total_tau() as f64 / self.rounds.len() as f64
        }
    }

    /// `(prompt_id, rounds, mean τ, total γ)` per prompt.
    pub fn per_prompt(&self) -> Vec<(usize, usize, f64, usize)> {
        let mut out: Vec<(usize, usize, f64, usize)> =
            (0..self.prompts).map(|p| (p, 0, 0.0, 0)).collect();
        for r in &self.rounds {
            let e = &mut out[r.prompt_id];
            e.1 += 1;
            e.2 += r.tau as f64;
            e.3 += r.gamma;
        }
        for e in &mut out {
            if e.1 > 0 {
                e.2 /= e.1 as f64;
            }
        }
        out
    }

    /// Short label such as `c2t beta=0.5`.
    pub fn label(&self) -> String {
        config_label(&self.config)
    }

    pub fn rounds_csv(&self) -> String {
        let mut s = String::from("prompt_id,round,tau,gamma,depth\n");
        for r in &self.rounds {
            let _ = writeln!(s, "{},{},{},{},{}", r.prompt_id, r.round, r.tau, r.gamma, r.depth);
        }
        s
    }

    /// Key/value summary; γ excludes the root and τ excludes the bonus token.
    pub fn summary_csv(&self) -> String {
        let c = &self.config;
        let mut s = String::from("# tau and gamma exclude the root; tau excludes the bonus token; entropy in nats\nkey,value\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k},{v}");
        };
        kv("strategy", c.strategy.to_string());
        kv("K", c.top_k.to_string());
        kv("d_max", c.d_max.to_string());
        match c.strategy {
            Strategy::C2t => {
                kv("beta", c.beta.to_string());
                kv("second_topk", c.second_topk.to_string());
            }
            Strategy::Eagle2 => kv("N", c.top_n.to_string()),
            Strategy::Static => kv(
                "shape",
                c.static_shape.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "),
            ),
            Strategy::Chain => {
                kv("chain_stop", c.chain_stop.to_string());
                kv("max_len", c.max_len.to_string());
            }
        }
        kv("seed", self.seed.to_string());
        kv("prompts", self.prompts.to_string());
        kv("gen_len", self.gen_len.to_string());
        kv("rounds", self.rounds.len().to_string());
        kv("total_tau", self.total_tau().to_string());
        kv("mean_tau", self.mean_tau().to_string());
        kv("total_gamma", self.total_gamma().to_string());
        if let Some(t) = &self.classifier {
            kv("recall", opt(t.recall()));
            kv("theta", opt(t.theta()));
        }
        kv("draft_calls", self.ops.draft_calls.to_string());
        kv("classifier_calls", self.ops.classifier_calls.to_string());
        kv("target_calls", self.ops.target_calls.to_string());
        let curve = depth_accept_curve(self);
        kv(
            "depth_accept",
            curve.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "),
        );
        s
    }
}

pub fn config_label(c: &DraftConfig) -> String {
    match c.strategy {
        Strategy::C2t => format!("c2t beta={}", c.beta),
        Strategy::Eagle2 => format!("eagle2 N={}", c.top_n),
        Strategy::Static => "static".to_string(),
        Strategy::Chain => format!("chain stop={}", c.chain_stop),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), |v| v.to_string())
}

struct PromptRun {
    rounds: Vec<RoundRecord>,
    tally: ClassifierTally,
    ops: OpTotals,
}

/// Draft, verify, append accepted tokens plus the bonus token, repeat until
/// at least `gen_len` tokens were produced for every prompt.
pub fn run_benchmark<S>(
    pair: &ModelPair,
    cfg: &DraftConfig,
    scorer: Option<&S>,
    prompts: &[Vec<TokenId>],
    gen_len: usize,
    seed: u64,
) -> Result<BenchReport>
where
    S: Scorer + ?Sized,
{
    cfg.validate()?;
    if cfg.strategy == Strategy::C2t && scorer.is_none() {
        return Err(Error::invalid("c2t benchmark needs a classifier"));
    }
    let runs: Vec<PromptRun> = prompts
        .par_iter()
        .enumerate()
        .map(|(pid, prompt)| run_prompt(pair, cfg, scorer, pid, prompt, gen_len))
        .collect::<Result<_>>()?;
    let mut rounds = Vec::new();
    let mut tally = ClassifierTally::default();
    let mut ops = OpTotals::default();
    for run in runs {
        rounds.extend(run.rounds);
        tally.add(&run.tally);
        ops.draft_calls += run.ops.draft_calls;
        ops.classifier_calls += run.ops.classifier_calls;
        ops.target_calls += run.ops.target_calls;
    }
    let uses_classifier = cfg.strategy == Strategy::C2t
        || matches!(cfg.chain_stop, drafting::ChainStop::Classifier(_)) && cfg.strategy == Strategy::Chain;
    Ok(BenchReport {
        config: cfg.clone(),
        seed,
        gen_len,
        prompts: prompts.len(),
        rounds,
        classifier: uses_classifier.then_some(tally),
        ops,
    })
}

fn run_prompt<S>(
    pair: &ModelPair,
    cfg: &DraftConfig,
    scorer: Option<&S>,
    prompt_id: usize,
    prompt: &[TokenId],
    gen_len: usize,
) -> Result<PromptRun>
where
    S: Scorer + ?Sized,
{
    let mut ctx = prompt.to_vec();
    let mut produced = 0;
    let mut run = PromptRun {
        rounds: Vec::new(),
        tally: ClassifierTally::default(),
        ops: OpTotals::default(),
    };
    let threshold = match cfg.chain_stop {
        drafting::ChainStop::Classifier(b) if cfg.strategy == Strategy::Chain => b,
        _ => cfg.beta,
    };
    while produced < gen_len {
        let mut d = drafting::draft(&pair.draft, scorer, &ctx, cfg)?;
        let v = verify_greedy(&mut d.tree, &pair.target, &ctx)?;
        run.ops.draft_calls += d.draft_calls;
        run.ops.classifier_calls += d.scored.len();
        run.ops.target_calls += v.tau + 1;
        // A scored candidate is a positive iff it extends the accepted path
        // with the token verification accepted (or would have) there.
        for s in &d.scored {
            let positive = match v.accepted_path.iter().position(|&n| n == s.parent) {
                Some(i) if i + 1 < v.accepted_path.len() => {
                    d.tree.nodes()[v.accepted_path[i + 1]].token == s.token
                }
                Some(_) => s.token == v.bonus_token,
                None => false,
            };
            run.tally.scored += 1;
            run.tally.positives += usize::from(positive);
            let predicted = s.confidence > threshold;
            run.tally.predicted += usize::from(predicted);
            run.tally.true_positives += usize::from(predicted && positive);
        }
        run.rounds.push(RoundRecord {
            prompt_id,
            round: run.rounds.len(),
            tau: v.tau,
            gamma: v.gamma,
            depth: d.tree.depth(),
        });
        let emitted = v.emitted(&d.tree);
        produced += emitted.len();
        ctx.extend(emitted);
    }
    Ok(run)
}

/// Accept rate per tree level ℓ = 1, 2, …: rounds with τ ≥ ℓ over rounds
/// whose verified tree reaches level ℓ.
pub fn depth_accept_curve(report: &BenchReport) -> Vec<f64> {
    let max_depth = report.rounds.iter().map(|r| r.depth).max().unwrap_or(0);
    let mut reached = vec![0usize; max_depth];
    let mut accepted = vec![0usize; max_depth];
    for r in &report.rounds {
        for l in 0..r.depth {
            reached[l] += 1;
            if r.tau > l {
                accepted[l] += 1;
            }
        }
    }
    reached
        .iter()
        .zip(&accepted)
        .map(|(&n, &a)| a as f64 / n as f64)
        .collect()
}

/// Grid for [`sweep`].
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// C2T thresholds.
    Beta(Vec<f64>),
    /// EAGLE-2 rerank budgets.
    TopN(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub strategy: Strategy,
    pub param: f64,
    pub mean_tau: f64,
    pub total_gamma: usize,
    pub rounds: usize,
}

pub const SWEEP_HEADER: &str = "strategy,param,mean_tau,total_gamma";

impl SweepRow {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.strategy, self.param, self.mean_tau, self.total_gamma)
    }
}

/// One benchmark per grid point, all from the same base configuration.
pub fn sweep<S>(
    pair: &ModelPair,
    base: &DraftConfig,
    grid: &Grid,
    scorer: Option<&S>,
    prompts: &[Vec<TokenId>],
    gen_len: usize,
    seed: u64,
) -> Result<Vec<SweepRow>>
where
    S: Scorer + ?Sized,
{
    let points: Vec<(DraftConfig, f64)> = match grid {
        Grid::Beta(v) if !v.is_empty() => v
            .iter()
            .map(|&b| (DraftConfig { strategy: Strategy::C2t, beta: b, ..base.clone() }, b))
            .collect(),
        Grid::TopN(v) if !v.is_empty() => v
            .iter()
            .map(|&n| (DraftConfig { strategy: Strategy::Eagle2, top_n: n, ..base.clone() }, n as f64))
            .collect(),
        _ => return Err(Error::invalid("empty sweep grid")),
    };
    points
        .into_iter()
        .map(|(cfg, param)| {
            let r = run_benchmark(pair, &cfg, scorer, prompts, gen_len, seed)?;
            Ok(SweepRow {
                strategy: cfg.strategy,
                param,
                mean_tau: r.mean_tau(),
                total_gamma: r.total_gamma(),
                rounds: r.rounds.len(),
            })
        })
        .collect()
}

/// Entropy-bin × rank statistics of the draft model along the target's
/// greedy path.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapSet {
    pub counts: [[usize; HEATMAP_RANKS]; HEATMAP_BINS],
    pub prob_sum: [[f64; HEATMAP_RANKS]; HEATMAP_BINS],
    pub accept_sum: [[usize; HEATMAP_RANKS]; HEATMAP_BINS],
}

impl Default for HeatmapSet {
    fn default() -> Self {
        HeatmapSet {
            counts: [[0; HEATMAP_RANKS]; HEATMAP_BINS],
            prob_sum: [[0.0; HEATMAP_RANKS]; HEATMAP_BINS],
            accept_sum: [[0; HEATMAP_RANKS]; HEATMAP_BINS],
        }
    }
}

type Matrix = [[Option<f64>; HEATMAP_RANKS]; HEATMAP_BINS];

impl HeatmapSet {
    fn cellwise(&self, f: impl Fn(usize, usize) -> f64) -> Matrix {
        let mut m = [[None; HEATMAP_RANKS]; HEATMAP_BINS];
        for b in 0..HEATMAP_BINS {
            for r in 0..HEATMAP_RANKS {
                if self.counts[b][r] > 0 {
                    m[b][r] = Some(f(b, r));
                }
            }
        }
        m
    }

    pub fn avg_prob(&self) -> Matrix {
        self.cellwise(|b, r| self.prob_sum[b][r] / self.counts[b][r] as f64)
    }

    pub fn accept_rate(&self) -> Matrix {
        self.cellwise(|b, r| self.accept_sum[b][r] as f64 / self.counts[b][r] as f64)
    }

    /// Average probability minus accept rate.
    pub fn bias(&self) -> Matrix {
        let (p, a) = (self.avg_prob(), self.accept_rate());
        let mut m = [[None; HEATMAP_RANKS]; HEATMAP_BINS];
        for b in 0..HEATMAP_BINS {
            for r in 0..HEATMAP_RANKS {
                if let (Some(x), Some(y)) = (p[b][r], a[b][r]) {
                    m[b][r] = Some(x - y);
                }
            }
        }
        m
    }

    /// Fraction of cells with at least `min` samples.
    pub fn coverage(&self, min: usize) -> f64 {
        let full = self.counts.iter().flatten().filter(|&&c| c >= min).count();
        full as f64 / (HEATMAP_BINS * HEATMAP_RANKS) as f64
    }

    /// Labeled CSV blocks: counts, avg_prob, accept_rate, bias, then the
    /// `log(x + 1e-9)` display copies of the first two probability blocks.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let counts = self.cellwise(|b, r| self.counts[b][r] as f64);
        write_block(&mut s, "counts", &counts, |x| x);
        write_block(&mut s, "avg_prob", &self.avg_prob(), |x| x);
        write_block(&mut s, "accept_rate", &self.accept_rate(), |x| x);
        write_block(&mut s, "bias", &self.bias(), |x| x);
        let smooth = |x: f64| (x + 1e-9).ln();
        write_block(&mut s, "avg_prob_display", &self.avg_prob(), smooth);
        write_block(&mut s, "accept_rate_display", &self.accept_rate(), smooth);
        s
    }
}

fn bin_label(b: usize) -> String {
    if b + 1 < ENTROPY_BIN_EDGES.len() {
        format!("{}-{}", ENTROPY_BIN_EDGES[b], ENTROPY_BIN_EDGES[b + 1])
    } else {
        format!(">{}", ENTROPY_BIN_EDGES[b])
    }
}

fn write_block(s: &mut String, name: &str, m: &Matrix, f: impl Fn(f64) -> f64) {
    let _ = writeln!(s, "# {name}");
    s.push_str("entropy_bin");
    for r in 1..=HEATMAP_RANKS {
        let _ = write!(s, ",rank{r}");
    }
    s.push('\n');
    for (b, row) in m.iter().enumerate() {
        s.push_str(&bin_label(b));
        for cell in row {
            match cell {
                Some(x) => {
                    let _ = write!(s, ",{}", f(*x));
                }
                None => {
                    let _ = write!(s, ",{NA}");
                }
            }
        }
        s.push('\n');
    }
    s.push('\n');
}

/// Walks `steps` tokens of the target's greedy continuation from each prompt;
/// at every position the draft's distribution is binned by entropy and its
/// top-20 tokens are compared with the target's choice.
pub fn heatmap(pair: &ModelPair, prompts: &[Vec<TokenId>], steps: usize) -> Result<HeatmapSet> {
    let parts: Vec<HeatmapSet> = prompts
        .par_iter()
        .map(|prompt| -> Result<HeatmapSet> {
            let mut h = HeatmapSet::default();
            let mut ctx = prompt.clone();
            for _ in 0..steps {
                let draft = pair.draft.summary(&ctx)?;
                let want = pair.target.summary(&ctx)?.argmax();
                let b = entropy_bin(draft.full_entropy);
                for (r, &(tok, p)) in draft.top.iter().take(HEATMAP_RANKS).enumerate() {
                    h.counts[b][r] += 1;
                    h.prob_sum[b][r] += p;
                    h.accept_sum[b][r] += usize::from(tok == want);
                }
                ctx.push(want);
            }
            Ok(h)
        })
        .collect::<Result<_>>()?;
    let mut total = HeatmapSet::default();
    for part in parts {
        for b in 0..HEATMAP_BINS {
            for r in 0..HEATMAP_RANKS {
                total.counts[b][r] += part.counts[b][r];
                total.prob_sum[b][r] += part.prob_sum[b][r];
                total.accept_sum[b][r] += part.accept_sum[b][r];
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub p_steps: usize,
    pub h_steps: usize,
    pub h_max: f64,
    pub d_max: u32,
}

impl Default for SurfaceGrid {
    fn default() -> Self {
        SurfaceGrid {
            p_steps: 21,
            h_steps: 21,
            h_max: 10.0,
            d_max: 10,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceRow {
    pub features: FeatureVector,
    pub confidence: f64,
    pub normalized: f64,
}

pub const SURFACE_HEADER: &str = "P,H,d,C,C_minmax";

/// Dense grid over `P ∈ [0, 1]`, `H ∈ [0, h_max]`, `d ∈ 0..=d_max`, with a
/// min-max normalized copy of the confidence (0 for a flat surface).
pub fn confidence_surface<S: Scorer + ?Sized>(scorer: &S, grid: &SurfaceGrid) -> Vec<SurfaceRow> {
    let mut rows = Vec::new();
    for d in 0..=grid.d_max {
        for &h in &linspace(0.0, grid.h_max, grid.h_steps) {
            for &p in &linspace(0.0, 1.0, grid.p_steps) {
                let f = FeatureVector::new(p, h, f64::from(d));
                rows.push(SurfaceRow {
                    features: f,
                    confidence: scorer.score(&f),
                    normalized: 0.0,
                });
            }
        }
    }
    let lo = rows.iter().map(|r| r.confidence).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.confidence).fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        for r in &mut rows {
            r.normalized = (r.confidence - lo) / (hi - lo);
        }
    }
    rows
}

pub fn surface_csv(rows: &[SurfaceRow]) -> String {
    let mut s = String::from(SURFACE_HEADER);
    s.push('\n');
    for r in rows {
        let f = r.features;
        let _ = writeln!(s, "{},{},{},{},{}", f.joint, f.entropy, f.depth, r.confidence, r.normalized);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::MlpParams;
    use crate::drafting::ChainStop;
    use crate::models::tests::spec;
    use crate::models::TabularLM;

    const NONE: Option<&MlpParams> = None;

    fn pair(eps: f64) -> ModelPair {
        ModelPair::from_spec(&spec(64, 2, eps), 32, 64).unwrap()
    }

    #[test]
    fn zero_gen_len_is_empty() {
        let p = pair(0.2);
        let prompts = gen_prompts(64, 3, 4, 1);
        let cfg = DraftConfig { strategy: Strategy::Eagle2, top_n: 10, ..DraftConfig::default() };
        let r = run_benchmark(&p, &cfg, NONE, &prompts, 0, 1).unwrap();
        assert!(r.rounds.is_empty());
        assert_eq!(r.mean_tau(), 0.0);
        assert!(depth_accept_curve(&r).is_empty());
    }

    #[test]
    fn perfect_draft_chain_accepts_everything() {
        let p = pair(0.0);
        let prompts = gen_prompts(64, 4, 4, 2);
        let cfg = DraftConfig {
            strategy: Strategy::Chain,
            chain_stop: ChainStop::None,
            max_len: 5,
            ..DraftConfig::default()
        };
        let r = run_benchmark(&p, &cfg, NONE, &prompts, 30, 2).unwrap();
        assert!(r.rounds.iter().all(|x| x.tau == 5 && x.gamma == 5));
        assert_eq!(depth_accept_curve(&r), vec![1.0; 5]);
    }

    #[test]
    fn totals_match_rounds_and_runs_are_deterministic() {
        let p = pair(0.3);
        let prompts = gen_prompts(64, 5, 4, 3);
        let cfg = DraftConfig { strategy: Strategy::Eagle2, top_k: 4, d_max: 4, top_n: 12, ..DraftConfig::default() };
        let a = run_benchmark(&p, &cfg, NONE, &prompts, 20, 3).unwrap();
        let b = run_benchmark(&p, &cfg, NONE, &prompts, 20, 3).unwrap();
        assert_eq!(a, b);
        let per: usize = a.per_prompt().iter().map(|e| e.3).sum();
        assert_eq!(per, a.total_gamma());
        assert!(a.rounds.iter().all(|r| r.gamma <= 12));
    }

    #[test]
    fn sweep_single_point_matches_benchmark() {
        let p = pair(0.3);
        let prompts = gen_prompts(64, 3, 4, 4);
        let base = DraftConfig { top_k: 4, d_max: 4, ..DraftConfig::default() };
        let rows = sweep(&p, &base, &Grid::TopN(vec![7]), NONE, &prompts, 16, 4).unwrap();
        let cfg = DraftConfig { strategy: Strategy::Eagle2, top_n: 7, ..base.clone() };
        let r = run_benchmark(&p, &cfg, NONE, &prompts, 16, 4).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_tau, r.mean_tau());
        assert_eq!(rows[0].total_gamma, r.total_gamma());
        assert!(sweep(&p, &base, &Grid::Beta(vec![]), NONE, &prompts, 16, 4).is_err());
    }

    #[test]
    fn one_hot_heatmap() {
        let v = 32;
        let m = TabularLM::from_fn(v, 1, |key| {
            let mut row = vec![0.0; v];
            row[(key[0] as usize * 7 + 3) % v] = 1.0;
            row
        })
        .unwrap();
        let p = ModelPair::new(m.clone(), m, 20, v).unwrap();
        let h = heatmap(&p, &gen_prompts(v, 4, 3, 1), 10).unwrap();
        let a = h.accept_rate();
        assert_eq!(a[0][0], Some(1.0));
        assert!(h.counts[1..].iter().flatten().all(|&c| c == 0));
        assert_eq!(h.avg_prob()[0][0], Some(1.0));
        assert!(h.bias()[0].iter().all(|x| *x == Some(0.0)));
        assert!(h.to_csv().contains(NA));
    }

    #[test]
    fn surfaces() {
        let flat = |_: &FeatureVector| 0.25;
        let rows = confidence_surface(&flat, &SurfaceGrid::default());
        assert_eq!(rows.len(), 21 * 21 * 11);
        assert!(rows.iter().all(|r| r.confidence == 0.25 && r.normalized == 0.0));
        let one = SurfaceGrid { p_steps: 1, h_steps: 1, h_max: 10.0, d_max: 0 };
        let clf = MlpParams::init_seeded(4, 2).unwrap();
        let rows = confidence_surface(&clf, &one);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].confidence, clf.confidence([0.0, 0.0, 0.0]));
    }
}
