use proptest::prelude::*;

use c2t_core::config::Config;
use c2t_core::datagen::split_examples;
use c2t_core::drafting::{draft, draft_eagle2, expand, full_tree_size};
use c2t_core::features::{entropy, truncated_entropy};
use c2t_core::models::{DraftMode, ModelPair};
use c2t_core::tree::TreeFileHeader;
use c2t_core::{
    verify_greedy, ChainStop, DraftConfig, FeatureVector, LabeledExample, MlpParams, ModelPairSpec, Strategy as Mode,
    TokenId, TokenTree,
};

fn pair(vocab: usize, order: usize, seed: u64, noise: f64) -> ModelPair {
    let spec = ModelPairSpec {
        vocab,
        order,
        seed,
        concentration_schedule: ModelPairSpec::parse_schedule("0.1:0.5,2:0.5").unwrap(),
        draft_noise: noise,
        noise_concentration: 0.5,
        draft_mode: DraftMode::MixturePerturb,
        spread_bins: 0,
    };
    ModelPair::from_spec(&spec, vocab, 1000).unwrap()
}

fn distribution() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..64).prop_filter_map("all zero", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-9).then(|| w.iter().map(|x| x / s).collect())
    })
}

/// Random tree built from (parent selector, token, p) triples.
fn random_tree(vocab: usize, spec: &[(usize, u32, f64)]) -> TokenTree {
    let mut t = TokenTree::new(vocab as TokenId);
    for &(sel, tok, p) in spec {
        let parent = sel % t.len();
        t.attach_children(parent, &[tok % vocab as u32], &[p]).unwrap();
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn truncated_entropy_is_bounded_and_monotone(dist in distribution(), m in 1usize..80) {
        let full = entropy(&dist);
        let t = truncated_entropy(&dist, m).unwrap();
        let t_next = truncated_entropy(&dist, m + 1).unwrap();
        prop_assert!(t <= full + 1e-12);
        prop_assert!(t <= t_next + 1e-12);
        if m >= dist.len() {
            prop_assert!((t - full).abs() <= 1e-12);
        }
    }

    #[test]
    fn drafted_trees_are_well_formed(
        seed in 0u64..1000,
        vocab in 6usize..30,
        k in 1usize..5,
        d_max in 1usize..5,
        beta in 0.0f64..1.0,
        second in any::<bool>(),
    ) {
        let pair = pair(vocab, 2, seed, 0.3);
        let clf = MlpParams::init_seeded(6, seed).unwrap();
        let ctx = [(seed % vocab as u64) as TokenId];
        for strategy in [Mode::C2t, Mode::Eagle2, Mode::Chain] {
            let cfg = DraftConfig {
                strategy,
                top_k: k,
                d_max,
                beta,
                top_n: 3 * k,
                second_topk: second,
                max_len: d_max,
                chain_stop: ChainStop::DY_JOINT,
                ..DraftConfig::default()
            };
            let d = draft(&pair.draft, Some(&clf), &ctx, &cfg).unwrap();
            prop_assert!(d.tree.validate().is_ok());
            prop_assert!(d.tree.depth() <= d_max);
            for n in &d.tree.nodes()[1..] {
                prop_assert!(n.joint <= d.tree.nodes()[n.parent.unwrap()].joint);
            }
            match strategy {
                Mode::C2t => {
                    let width = if second { k } else { k * k };
                    prop_assert!(d.tree.draft_len() <= width * d_max);
                    for layer in &d.tree.layers()[1..] {
                        prop_assert!(layer.len() <= width);
                    }
                }
                Mode::Eagle2 => prop_assert!(d.tree.draft_len() <= 3 * k),
                _ => prop_assert!(d.tree.draft_len() <= d_max),
            }
        }
    }

    #[test]
    fn eagle2_selection_is_connected(seed in 0u64..1000, k in 1usize..5, d_max in 1usize..5, n in 1usize..40) {
        let pair = pair(12, 1, seed, 0.2);
        let cfg = DraftConfig { strategy: Mode::Eagle2, top_k: k, d_max, top_n: n, ..DraftConfig::default() };
        let e = draft_eagle2(&pair.draft, &[3], &cfg).unwrap();
        prop_assert_eq!(e.expanded.len(), full_tree_size(k, d_max));
        prop_assert!(e.expanded.is_connected_subtree(&e.selected));
        prop_assert_eq!(e.selected.len(), n.min(e.expanded.draft_len()));
        prop_assert_eq!(e.reranked.draft_len(), e.selected.len());
        prop_assert!(e.reranked.validate().is_ok());
    }

    #[test]
    fn verification_labels_exactly_one_path(
        seed in 0u64..1000,
        spec in prop::collection::vec((0usize..64, 0u32..16, 0.0f64..=1.0), 0..40),
    ) {
        let pair = pair(8, 2, seed, 0.3);
        let ctx = [1, 2];
        let mut tree = random_tree(8, &spec);
        let v = verify_greedy(&mut tree, &pair.target, &ctx).unwrap();
        prop_assert_eq!(v.accepted_path.len(), v.tau + 1);
        prop_assert_eq!(v.gamma, tree.draft_len());
        prop_assert!(v.tau <= tree.depth());
        let accepted: Vec<usize> = tree.nodes()[1..]
            .iter()
            .filter(|n| n.accepted == Some(true))
            .map(|n| n.id)
            .collect();
        prop_assert_eq!(&accepted[..], &v.accepted_path[1..]);
        for w in v.accepted_path.windows(2) {
            prop_assert_eq!(tree.nodes()[w[1]].parent, Some(w[0]));
        }
        prop_assert_eq!(v.emitted(&tree).len(), v.tau + 1);
    }

    #[test]
    fn tree_jsonl_round_trips(spec in prop::collection::vec((0usize..64, 0u32..50, 0.0f64..=1.0), 0..30)) {
        let tree = random_tree(50, &spec);
        let header = TreeFileHeader { vocab: 50, top_k: 3, d_max: 4, strategy: "c2t".into(), seed: 1 };
        let mut buf = Vec::new();
        tree.write_jsonl(&mut buf, &header).unwrap();
        let (h, back) = TokenTree::read_jsonl(&buf[..]).unwrap();
        prop_assert_eq!(h, header);
        prop_assert_eq!(back, tree);
    }

    #[test]
    fn group_split_never_separates_a_tree(
        groups in prop::collection::vec(0u64..20, 2..200),
        ratio in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let items: Vec<LabeledExample> = groups
            .iter()
            .map(|&g| LabeledExample { features: FeatureVector::new(0.5, 1.0, 0.0), label: g % 2 == 0, group: g })
            .collect();
        let distinct = { let mut g = groups.clone(); g.sort(); g.dedup(); g.len() };
        match split_examples(&items, ratio, seed) {
            Ok((a, b)) => {
                prop_assert_eq!(a.len() + b.len(), items.len());
                prop_assert!(!a.is_empty() && !b.is_empty());
                prop_assert!(a.iter().all(|x| b.iter().all(|y| x.group != y.group)));
            }
            Err(_) => prop_assert!(distinct < 2),
        }
    }

    #[test]
    fn classifier_confidence_is_a_probability(seed in any::<u64>(), p in 0.0f64..=1.0, h in 0.0f64..12.0, d in 0.0f64..20.0) {
        let clf = MlpParams::init_seeded(12, seed).unwrap();
        let c = clf.confidence([p, h, d]);
        prop_assert!(c > 0.0 && c < 1.0);
        let back = MlpParams::from_json(&clf.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.confidence([p, h, d]).to_bits(), c.to_bits());
    }

    #[test]
    fn config_text_round_trips(entries in prop::collection::btree_map("[a-z][a-z0-9_.]{0,12}", "[A-Za-z0-9_.:,-]{1,16}", 0..12)) {
        let mut c = Config::new();
        for (k, v) in &entries {
            c.set(k.clone(), v);
        }
        let back = Config::parse(&c.to_string()).unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn expansion_matches_closed_form() {
    let pair = pair(20, 2, 5, 0.3);
    for k in 1..=4 {
        for d_max in 1..=4 {
            let (tree, _) = expand(&pair.draft, &[], k, d_max).unwrap();
            assert_eq!(tree.len(), 1 + k + (d_max - 1) * k * k, "K={k} d_max={d_max}");
            assert_eq!(tree.depth(), d_max);
        }
    }
}

#[test]
fn empty_context_roots_at_bos() {
    let pair = pair(10, 2, 1, 0.3);
    let cfg = DraftConfig { strategy: Mode::Eagle2, top_k: 2, d_max: 2, ..DraftConfig::default() };
    let d = draft::<_, MlpParams>(&pair.draft, None, &[], &cfg).unwrap();
    assert_eq!(d.tree.root().token, 10);
}

#[test]
fn c2t_requires_a_classifier() {
    let pair = pair(10, 2, 1, 0.3);
    let err = draft::<_, MlpParams>(&pair.draft, None, &[1], &DraftConfig::default()).unwrap_err();
    assert!(err.to_string().contains("classifier"));
}

#[test]
fn beta_zero_grows_to_full_depth() {
    let pair = pair(16, 2, 3, 0.3);
    let clf = MlpParams::init_seeded(6, 3).unwrap();
    let cfg = DraftConfig { top_k: 4, d_max: 6, beta: 0.0, ..DraftConfig::default() };
    let d = draft(&pair.draft, Some(&clf), &[2], &cfg).unwrap();
    assert_eq!(d.tree.depth(), 6);
    assert!(d.tree.layers()[1..].iter().all(|l| l.len() == 4));
}
