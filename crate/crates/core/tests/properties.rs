mod common;

use approx::assert_abs_diff_eq;
use common::*;
use ndarray::Array2;
use probekit::probes::{weights_from_logits, ProbeFamily, ProbeKind, ProbeShape, SentenceReprs};
use probekit::spantree::{
    enumerate_trees, log_partition, log_partition_and_marginals, log_partition_lu, map_tree, tree_log_prob,
    EdgeWeights,
};
use probekit::train::sentence_loss_bits;
use probekit::treebank::{format_conllu, parse_conllu, AttnFile, AttnSentence, ReprFile, ReprSentence, Sentence};
use probekit::ProbeParams;
use proptest::prelude::*;
use rand::SeedableRng;

fn weights(n: usize) -> impl Strategy<Value = EdgeWeights<f64>> {
    prop::collection::vec(0.01f64..10.0, (n + 1) * (n + 1))
        .prop_map(move |v| EdgeWeights::from_masked(Array2::from_shape_vec((n + 1, n + 1), v).unwrap()).unwrap())
}

fn sized_weights() -> impl Strategy<Value = EdgeWeights<f64>> {
    (1usize..=6).prop_flat_map(weights)
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_matches_enumeration(w in sized_weights()) {
        let brute = brute_partition(&w);
        let got = log_partition(&w).unwrap().exp();
        prop_assert!((got - brute).abs() <= 1e-8 * brute);
        let lu = log_partition_lu(&w).unwrap().exp();
        prop_assert!((lu - brute).abs() <= 1e-8 * brute);
    }

    #[test]
    fn marginals_match_enumeration_and_sum_correctly(w in sized_weights()) {
        let n = w.n();
        let (_, mu) = log_partition_and_marginals(&w).unwrap();
        let brute = brute_marginals(&w);
        for (a, b) in mu.matrix().iter().zip(brute.iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        for d in 1..=n {
            prop_assert!((mu.matrix().column(d).sum() - 1.0).abs() < 1e-10);
        }
        prop_assert!((mu.root_mass() - 1.0).abs() < 1e-10);
        prop_assert!((mu.matrix().sum() - n as f64).abs() < 1e-9);
    }

    #[test]
    fn tree_probabilities_sum_to_one(w in sized_weights()) {
        let total: f64 = enumerate_trees(w.n()).unwrap().iter().map(|t| tree_log_prob(&w, t).unwrap().exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn map_tree_attains_the_best_weight(w in sized_weights()) {
        let best = enumerate_trees(w.n()).unwrap().iter().map(|t| tree_weight(&w, t)).fold(0.0, f64::max);
        let got = tree_weight(&w, &map_tree(&w).unwrap());
        prop_assert!(got >= best * (1.0 - 1e-12));
    }

    #[test]
    fn scaling_shifts_only_the_partition(w in sized_weights(), log_lambda in -7.0f64..7.0) {
        let lambda = log_lambda.exp();
        let s = w.scaled(lambda).unwrap();
        let (z0, mu0) = log_partition_and_marginals(&w).unwrap();
        let (z1, mu1) = log_partition_and_marginals(&s).unwrap();
        prop_assert!((z1 - z0 - w.n() as f64 * lambda.ln()).abs() < 1e-9);
        for (a, b) in mu0.matrix().iter().zip(mu1.matrix().iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert_eq!(map_tree(&w).unwrap(), map_tree(&s).unwrap());
        for t in enumerate_trees(w.n()).unwrap() {
            prop_assert!((tree_log_prob(&w, &t).unwrap() - tree_log_prob(&s, &t).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn relabelling_tokens_permutes_marginals(
        (w, perm) in (1usize..=6).prop_flat_map(|n| (weights(n), permutation(n)))
    ) {
        let n = w.n();
        // Token k moves to position perm[k-1] + 1; the root stays put.
        let to = |k: usize| if k == 0 { 0 } else { perm[k - 1] + 1 };
        let mut m = Array2::zeros((n + 1, n + 1));
        for h in 0..=n {
            for d in 1..=n {
                m[[to(h), to(d)]] = w.get(h, d);
            }
        }
        let p = EdgeWeights::from_masked(m).unwrap();
        let (z0, mu0) = log_partition_and_marginals(&w).unwrap();
        let (z1, mu1) = log_partition_and_marginals(&p).unwrap();
        prop_assert!((z0 - z1).abs() < 1e-10);
        for h in 0..=n {
            for d in 1..=n {
                prop_assert!((mu0.get(h, d) - mu1.get(to(h), to(d))).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn softmax_weights_are_valid_edge_weights(
        (n, v) in (1usize..=7).prop_flat_map(|n| (Just(n), prop::collection::vec(-30.0f64..30.0, (n + 1) * (n + 1))))
    ) {
        let alpha = Array2::from_shape_vec((n + 1, n + 1), v).unwrap();
        let w = weights_from_logits(&alpha).unwrap();
        prop_assert!(EdgeWeights::new(w.matrix().clone()).is_ok());
        for i in 0..=n {
            let row = w.matrix().row(i).sum();
            // A lone token's only legal head is the root, so its row is empty.
            let expect = if n == 1 && i == 1 { 0.0 } else { 1.0 };
            prop_assert!((row - expect).abs() < 1e-12, "row {} sums to {}", i, row);
        }
    }

    #[test]
    fn contextual_probes_are_permutation_equivariant(
        seed in any::<u64>(),
        (n, perm) in (1usize..=6).prop_flat_map(|n| (Just(n), permutation(n))),
        family in prop::sample::select(ProbeFamily::ALL.to_vec()),
        layers in 0usize..=2,
    ) {
        let mut r = rng(seed);
        let reprs = random_reprs(n, 4, &mut r);
        let params = ProbeParams::init(ProbeKind::contextual(family), &small_shape(4, layers, 0), &mut r).unwrap();
        let to = |k: usize| if k == 0 { 0 } else { perm[k - 1] + 1 };
        let mut moved = Array2::zeros((n + 1, 4));
        for k in 1..=n {
            moved.row_mut(to(k)).assign(&reprs.vectors().row(k));
        }
        let moved = SentenceReprs::new(0, moved).unwrap();
        let a = params.logits(&reprs).unwrap();
        let b = params.logits(&moved).unwrap();
        for i in 0..=n {
            for j in 0..=n {
                let (x, y) = (a[[i, j]], b[[to(i), to(j)]]);
                prop_assert!(x == y || (x - y).abs() < 1e-12, "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn structural_logits_are_symmetric(seed in any::<u64>(), n in 2usize..=6) {
        let mut r = rng(seed);
        let reprs = random_reprs(n, 5, &mut r);
        let params = ProbeParams::init(ProbeKind::contextual(ProbeFamily::Structural), &small_shape(5, 0, 0), &mut r).unwrap();
        let a = params.logits(&reprs).unwrap();
        for i in 1..=n {
            for j in 1..=n {
                if i != j {
                    prop_assert_eq!(a[[i, j]], a[[j, i]]);
                }
            }
        }
    }

    #[test]
    fn eval_forward_is_deterministic(seed in any::<u64>(), n in 1usize..=6, layers in 0usize..=2) {
        let mut r = rng(seed);
        let reprs = random_reprs(n, 4, &mut r);
        for kind in [
            ProbeKind::contextual(ProbeFamily::Attentional),
            ProbeKind::contextual(ProbeFamily::Biaffine),
            ProbeKind::positional(ProbeFamily::Structural),
        ] {
            let params = ProbeParams::init(kind, &small_shape(4, layers, 6), &mut r).unwrap();
            let once = params.logits(&reprs).unwrap();
            prop_assert_eq!(once, params.logits(&reprs).unwrap());
        }
    }

    #[test]
    fn loss_is_nonnegative(seed in any::<u64>(), n in 1usize..=6, scale in 0.1f64..20.0) {
        let mut r = rng(seed);
        let reprs = random_reprs(n, 4, &mut r);
        let gold = random_tree(n, &mut r);
        let mut params = ProbeParams::init(ProbeKind::contextual(ProbeFamily::Attentional), &small_shape(4, 0, 0), &mut r).unwrap();
        for t in params.tensors_mut() {
            t.mapv_inplace(|v| v * scale);
        }
        prop_assert!(sentence_loss_bits(&params, &reprs, &gold).unwrap() >= 0.0);
    }

    #[test]
    fn conllu_round_trips(trees in prop::collection::vec(1usize..=9, 1..6), seed in any::<u64>()) {
        let mut r = rng(seed);
        let sentences: Vec<Sentence> = trees
            .iter()
            .enumerate()
            .map(|(k, &n)| Sentence {
                sent_id: format!("t-{k}"),
                tokens: (0..n).map(|i| format!("w{i}")).collect(),
                gold: probekit::synth::random_tree(n, &mut r),
            })
            .collect();
        let parsed = parse_conllu(&format_conllu(&sentences)).unwrap();
        prop_assert_eq!(parsed.sentences, sentences);
        prop_assert_eq!(parsed.dropped, 0);
    }

    #[test]
    fn binary_formats_round_trip(
        lens in prop::collection::vec(1usize..=5, 1..5),
        d1 in 1usize..=4,
        n_layers in 1usize..=3,
        n_heads in 1usize..=2,
        seed in any::<u64>(),
    ) {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let reprs: Vec<ReprSentence> = lens
            .iter()
            .enumerate()
            .map(|(k, &n)| ReprSentence {
                sent_id: format!("r{k}"),
                n_tokens: n,
                data: (0..n_layers * n * d1).map(|_| rand::Rng::random::<f32>(&mut r)).collect(),
            })
            .collect();
        let file = ReprFile::new(d1, n_layers, reprs).unwrap();
        let mut bytes = Vec::new();
        file.write_to(&mut bytes).unwrap();
        let back = ReprFile::read_from(&bytes[..]).unwrap();
        prop_assert_eq!(&back, &file);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        prop_assert_eq!(&again, &bytes);

        let attn: Vec<AttnSentence> = lens
            .iter()
            .enumerate()
            .map(|(k, &n)| AttnSentence {
                sent_id: format!("r{k}"),
                n_tokens: n,
                data: std::iter::repeat_n(1.0 / n as f32, n_layers * n_heads * n * n).collect(),
            })
            .collect();
        let file = AttnFile::new(n_layers, n_heads, attn).unwrap();
        let mut bytes = Vec::new();
        file.write_to(&mut bytes).unwrap();
        let back = AttnFile::read_from(&bytes[..]).unwrap();
        prop_assert_eq!(&back, &file);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        prop_assert_eq!(again, bytes);
    }
}

#[test]
fn uniform_weights_give_log_tree_count_bits() {
    for n in 1..=6usize {
        let mut r = rng(n as u64);
        let reprs = random_reprs(n, 4, &mut r);
        let gold = random_tree(n, &mut r);
        let shape = ProbeShape { d1: 4, d2: 3, mlp_layers: 0, mlp_hidden: 0, max_len: 0 };
        let params = ProbeParams::init(ProbeKind::contextual(ProbeFamily::Attentional), &shape, &mut r).unwrap();
        let zero = params.zeros_like();
        let bits = sentence_loss_bits(&zero, &reprs, &gold).unwrap();
        assert_abs_diff_eq!(bits, (n as f64 - 1.0) * (n as f64).log2(), epsilon = 1e-10);
    }
}
