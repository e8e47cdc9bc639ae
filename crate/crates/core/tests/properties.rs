mod common;

use std::collections::HashMap;

use common::*;
use hoprank::graph::{exact_hop_sets, generate_synthetic, SyntheticSpec};
use hoprank::objective::{
    distance_weight, dpo_pair_loss, listwise_sft, loss_from_scores, rank_weight, ObjectiveConfig,
};
use hoprank::sampler::{build_instance, truncate_text, SamplerConfig};
use proptest::prelude::*;

fn instance_scores() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<usize>)> {
    (2usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(2usize..6, n - 1),
        )
            .prop_map(|(s, r, mut hops)| {
                hops.insert(0, 1);
                (s, r, hops)
            })
    })
}

proptest! {
    #[test]
    fn total_is_invariant_to_a_common_score_shift((s, r, hops) in instance_scores(), c in -10.0f64..10.0) {
        let cfg = ObjectiveConfig::default();
        let base = loss_from_scores(&s, &r, &hops, &cfg).unwrap();
        let shifted: Vec<f64> = s.iter().map(|x| x + c).collect();
        let moved = loss_from_scores(&shifted, &r, &hops, &cfg).unwrap();
        prop_assert!((base.total - moved.total).abs() < 1e-9 * base.total.abs().max(1.0));
        prop_assert_eq!(&base.ranks, &moved.ranks);
        let ref_shifted: Vec<f64> = r.iter().map(|x| x - c).collect();
        let moved = loss_from_scores(&s, &ref_shifted, &hops, &cfg).unwrap();
        let dpo = |b: &hoprank::objective::LossBreakdown| b.pairs.iter().map(|p| p.dpo_loss).sum::<f64>();
        prop_assert!((dpo(&base) - dpo(&moved)).abs() < 1e-9 * dpo(&base).max(1.0));
    }

    #[test]
    fn pair_loss_is_monotone(c in -20.0f64..20.0, r in -20.0f64..20.0, d in 0.01f64..5.0) {
        prop_assert!(dpo_pair_loss(c + d, r) < dpo_pair_loss(c, r));
        prop_assert!(dpo_pair_loss(c, r + d) > dpo_pair_loss(c, r));
        prop_assert!(dpo_pair_loss(c, r) > 0.0);
    }

    #[test]
    fn sft_decreases_as_chosen_score_rises(s in prop::collection::vec(-5.0f64..5.0, 2..6), d in 0.01f64..3.0) {
        let mut up = s.clone();
        up[0] += d;
        prop_assert!(listwise_sft(&up, 0) < listwise_sft(&s, 0));
        prop_assert!(listwise_sft(&s, 0) > 0.0);
    }

    #[test]
    fn pair_loss_swap_identity(a in -30.0f64..30.0, b in -30.0f64..30.0) {
        // −log σ(x) − (−log σ(−x)) = −x
        let lhs = dpo_pair_loss(a, b) - dpo_pair_loss(b, a);
        prop_assert!((lhs + (a - b)).abs() < 1e-9 * (a - b).abs().max(1.0));
    }

    #[test]
    fn weights_are_symmetric(a in 1usize..50, b in 1usize..50) {
        prop_assert_eq!(rank_weight(a, b), rank_weight(b, a));
        if a != b {
            prop_assert_eq!(distance_weight(a, b).unwrap(), distance_weight(b, a).unwrap());
            prop_assert!(distance_weight(a, b).unwrap() <= 1.0);
        }
        prop_assert!(rank_weight(a, b) < 1.0);
    }

    #[test]
    fn rejected_order_does_not_change_the_loss((s, r, hops) in instance_scores(), seed in 0u64..1000) {
        use rand::seq::SliceRandom;
        let cfg = ObjectiveConfig::default();
        let base = loss_from_scores(&s, &r, &hops, &cfg).unwrap();
        let mut order: Vec<usize> = (1..s.len()).collect();
        order.shuffle(&mut rng(seed));
        order.insert(0, 0);
        let pick = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let h: Vec<usize> = order.iter().map(|&i| hops[i]).collect();
        let perm = loss_from_scores(&pick(&s), &pick(&r), &h, &cfg).unwrap();
        prop_assert!((base.total - perm.total).abs() < 1e-9 * base.total.max(1.0));
    }

    #[test]
    fn hop_sets_commute_with_node_relabeling(g_seed in 0u64..500, p_seed in 0u64..500) {
        use rand::seq::SliceRandom;
        let n = 25;
        let edges = random_edges(n, 0.12, g_seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng(p_seed));
        let moved: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let (g, h) = (graph_from(n, &edges, None), graph_from(n, &moved, None));
        for s in 0..n {
            let a = exact_hop_sets(&g, s, 4);
            let b = exact_hop_sets(&h, perm[s], 4);
            for k in 1..=4 {
                let mapped: Vec<usize> = a.get(k).iter().map(|&v| perm[v]).collect();
                prop_assert_eq!(sorted(&mapped), sorted(b.get(k)));
            }
        }
    }

    #[test]
    fn truncation_is_a_bounded_prefix(text in "[a-z éü]{0,80}", max in 1usize..60) {
        let t = truncate_text(&text, max);
        prop_assert!(t.chars().count() <= max);
        prop_assert!(text.starts_with(&t));
    }
}

#[test]
fn chosen_slot_is_uniform() {
    let g = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let cfg = SamplerConfig::default();
    let edges: Vec<(usize, usize)> = g.edges().take(100).collect();
    let mut counts: HashMap<usize, usize> = HashMap::new();
    let mut total = 0;
    for (i, &(u, v)) in edges.iter().enumerate() {
        let hops = exact_hop_sets(&g, u, cfg.max_hop);
        for t in 0..120u64 {
            let inst = build_instance(&g, (u, v), &hops, &cfg, (i as u64) << 20 | t).unwrap().unwrap();
            assert_eq!(inst.candidates.len(), 3);
            *counts.entry(inst.chosen().slot).or_default() += 1;
            total += 1;
        }
    }
    assert!(total >= 10_000);
    for slot in 0..3 {
        let f = counts[&slot] as f64 / total as f64;
        assert!((f - 1.0 / 3.0).abs() <= 0.02, "slot {slot}: {f}");
    }
}

#[test]
fn prompts_never_reveal_hops() {
    let g = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let (ds, _) = hoprank::sampler::build_dataset(&g, &SamplerConfig::default()).unwrap();
    for inst in ds.iter().take(500) {
        let lower = inst.prompt.to_lowercase();
        assert!(!lower.contains("hop"), "{}", inst.prompt);
        assert!(!lower.contains("negative") && !lower.contains("neighbor"));
    }
}
