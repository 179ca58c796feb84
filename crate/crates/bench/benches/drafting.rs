use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use c2t_bench::{fixture_classifier, fixture_contexts, fixture_pair};
use c2t_core::drafting::{draft, expand};
use c2t_core::features::{entropy, truncated_entropy};
use c2t_core::models::dirichlet_row;
use c2t_core::{rng, verify_greedy, DraftConfig, Strategy};

fn drafting(c: &mut Criterion) {
    let pair = fixture_pair(1024, 42);
    let clf = fixture_classifier(42);
    let ctxs = fixture_contexts(1024, 32);
    let mut g = c.benchmark_group("draft");
    for (name, cfg) in [
        ("c2t", DraftConfig::default()),
        ("eagle2", DraftConfig { strategy: Strategy::Eagle2, top_n: 60, ..DraftConfig::default() }),
        ("static", DraftConfig { strategy: Strategy::Static, ..DraftConfig::default() }),
        ("chain", DraftConfig { strategy: Strategy::Chain, ..DraftConfig::default() }),
    ] {
        g.bench_function(name, |b| {
            let mut i = 0;
            b.iter(|| {
                i = (i + 1) % ctxs.len();
                draft(&pair.draft, Some(&clf), &ctxs[i], &cfg).unwrap()
            })
        });
    }
    g.bench_function("expand_k10_d11", |b| {
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % ctxs.len();
            expand(&pair.draft, &ctxs[i], 10, 11).unwrap()
        })
    });
    g.finish();
}

fn verification(c: &mut Criterion) {
    let pair = fixture_pair(1024, 42);
    let ctx = fixture_contexts(1024, 1).remove(0);
    let cfg = DraftConfig { strategy: Strategy::Eagle2, top_n: 80, ..DraftConfig::default() };
    let tree = draft::<_, c2t_core::MlpParams>(&pair.draft, None, &ctx, &cfg).unwrap().tree;
    c.bench_function("verify_greedy_n80", |b| {
        b.iter_batched(
            || tree.clone(),
            |mut t| verify_greedy(&mut t, &pair.target, &ctx).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn entropies(c: &mut Criterion) {
    let row = dirichlet_row(&mut rng::stream(1, "bench"), 1.0, 32_000);
    let mut g = c.benchmark_group("entropy_v32000");
    g.bench_function("full", |b| b.iter(|| entropy(&row)));
    g.bench_function("top_1000", |b| b.iter(|| truncated_entropy(&row, 1000).unwrap()));
    g.finish();
}

criterion_group!(benches, drafting, verification, entropies);
criterion_main!(benches);
