//! Property tests for the structural invariants: generated graphs always
//! validate, the information measures obey their identities, and the walk
//! machinery respects the total-variation and monotonicity facts.

use std::collections::BTreeMap;

use proptest::prelude::*;

use hidekit::algorithms::{dfs_min_id, go_to_min_id, random_walk_hider_step, LocalView};
use hidekit::graph::{gen_family, GraphFamilySpec, PortLabeledGraph};
use hidekit::infotheory::{
    binary_entropy, conditional_entropy, entropy, kl_divergence, kl_upper_bound,
    mutual_information, Dist, JointDist,
};
use hidekit::markov::{
    d_t, dbar_t, dist_to_dense, lazy_walk_matrix, mixing_time, propagate,
    stationary_distribution, tv_distance,
};

// ---------------------------------------------------------------------------
// strategies

fn arb_family() -> impl Strategy<Value = GraphFamilySpec> {
    prop_oneof![
        (1usize..=16).prop_map(|n| GraphFamilySpec::Path { n }),
        (3usize..=16).prop_map(|n| GraphFamilySpec::Cycle { n }),
        (1usize..=8).prop_map(|n| GraphFamilySpec::Clique { n }),
        (1usize..=5)
            .prop_flat_map(|d| (Just(d), 1..=d + 1))
            .prop_map(|(d, p)| GraphFamilySpec::DoubleStar { d, p }),
        (3usize..=6, 1usize..=4, any::<u64>()).prop_map(|(x, y, s)| {
            GraphFamilySpec::ChainOfCliques {
                x,
                y,
                seed: Some(s),
            }
        }),
        (1usize..=5, 1usize..=5)
            .prop_map(|(a, b)| GraphFamilySpec::CompleteBipartite { a, b }),
    ]
}

/// Random connected graph: path backbone plus random extra edges.
fn arb_graph() -> impl Strategy<Value = PortLabeledGraph> {
    (2usize..=10)
        .prop_flat_map(|n| {
            let extras = proptest::collection::btree_set((1..=n, 1..=n), 0..=n);
            (Just(n), extras)
        })
        .prop_map(|(n, extras)| {
            let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i, i + 1)).collect();
            for (u, v) in extras {
                let (a, b) = (u.min(v), u.max(v));
                if a != b && !(b == a + 1) {
                    edges.push((a, b));
                }
            }
            edges.sort_unstable();
            edges.dedup();
            PortLabeledGraph::from_edges_with_n(n, &edges).expect("backbone keeps it connected")
        })
}

fn arb_dist(max_support: usize) -> impl Strategy<Value = Dist<usize>> {
    proptest::collection::vec(0.01f64..1.0, 1..=max_support).prop_map(|weights| {
        let total: f64 = weights.iter().sum();
        Dist::new(
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| (i + 1, w / total))
                .collect(),
        )
        .expect("normalized weights")
    })
}

fn arb_joint(max_rows: usize, max_cols: usize) -> impl Strategy<Value = JointDist<usize, usize>> {
    (1..=max_rows, 1..=max_cols)
        .prop_flat_map(|(r, c)| proptest::collection::vec(0.0f64..1.0, r * c).prop_map(move |w| (r, c, w)))
        .prop_map(|(_r, c, weights)| {
            let total: f64 = weights.iter().sum::<f64>().max(1e-9);
            let mut probs = BTreeMap::new();
            for (idx, w) in weights.iter().enumerate() {
                if *w > 0.0 {
                    probs.insert((idx / c + 1, idx % c + 1), w / total);
                }
            }
            if probs.is_empty() {
                probs.insert((1, 1), 1.0);
            }
            JointDist::new(probs).expect("normalized weights")
        })
}

// ---------------------------------------------------------------------------
// graph generators

proptest! {
    #[test]
    fn generated_members_always_validate(spec in arb_family()) {
        let g = gen_family(&spec).unwrap();
        // The JSON loader re-runs every invariant check.
        let reloaded = PortLabeledGraph::from_json(&g.to_json()).unwrap();
        prop_assert_eq!(g, reloaded);
    }

    #[test]
    fn ports_are_a_permutation(spec in arb_family()) {
        let g = gen_family(&spec).unwrap();
        for v in g.vertices() {
            let mut seen = vec![false; g.degree(v)];
            for p in 1..=g.degree(v) {
                let w = g.neighbor_via_port(v, p);
                prop_assert!(g.contains_vertex(w));
                prop_assert!(!seen[p - 1]);
                seen[p - 1] = true;
            }
        }
    }
}

#[test]
fn distance_is_a_metric_on_small_graphs() {
    let specs = [
        GraphFamilySpec::Path { n: 12 },
        GraphFamilySpec::Cycle { n: 11 },
        GraphFamilySpec::Clique { n: 6 },
        GraphFamilySpec::DoubleStar { d: 4, p: 3 },
        GraphFamilySpec::ChainOfCliques {
            x: 3,
            y: 2,
            seed: Some(2),
        },
        GraphFamilySpec::CompleteBipartite { a: 5, b: 6 },
    ];
    for spec in &specs {
        let g = gen_family(spec).unwrap();
        assert!(g.n() <= 12);
        for u in g.vertices() {
            assert_eq!(g.distance(u, u), 0);
            for v in g.vertices() {
                assert_eq!(g.distance(u, v), g.distance(v, u));
                for w in g.vertices() {
                    assert!(g.distance(u, w) <= g.distance(u, v) + g.distance(v, w));
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// information measures

proptest! {
    #[test]
    fn measures_are_relabeling_invariant(j in arb_joint(5, 5)) {
        // Order-reversing injection on both axes.
        let relabeled = j.map_outcomes(|&r| 1000 - r, |&c| 77 + 2 * c);
        prop_assert!((entropy(&j.row_marginal()) - entropy(&relabeled.row_marginal())).abs() < 1e-9);
        prop_assert!((conditional_entropy(&j) - conditional_entropy(&relabeled)).abs() < 1e-9);
        prop_assert!((mutual_information(&j) - mutual_information(&relabeled)).abs() < 1e-9);
    }

    #[test]
    fn mutual_information_is_symmetric(j in arb_joint(6, 6)) {
        let flipped = j.transpose();
        prop_assert!((mutual_information(&j) - mutual_information(&flipped)).abs() < 1e-9);
    }

    #[test]
    fn mutual_information_equals_kl_to_product(j in arb_joint(8, 8)) {
        let product = j.product_of_marginals();
        let direct: f64 = j
            .iter()
            .map(|(k, p)| if p > 0.0 { p * (p / product_prob(&product, k)).log2() } else { 0.0 })
            .sum();
        prop_assert!((mutual_information(&j) - direct.max(0.0)).abs() < 1e-9);
    }

    #[test]
    fn conditioning_cannot_increase_entropy(j in arb_joint(6, 6)) {
        let h = entropy(&j.row_marginal());
        let h_cond = conditional_entropy(&j);
        prop_assert!(h_cond <= h + 1e-9);
    }

    #[test]
    fn independence_is_the_equality_case(rows in arb_dist(5), cols in arb_dist(5)) {
        let j = JointDist::from_prior_and_kernel(&rows, |_| cols.clone()).unwrap();
        prop_assert!((conditional_entropy(&j) - entropy(&rows)).abs() < 1e-9);
        prop_assert!(mutual_information(&j).abs() < 1e-9);
    }

    #[test]
    fn kl_upper_bound_dominates(p in arb_dist(10), q in arb_dist(10)) {
        // Restrict to a common strictly positive support.
        let size = p.support_size().min(q.support_size());
        let p = renormalize_prefix(&p, size);
        let q = renormalize_prefix(&q, size);
        let d = kl_divergence(&p, &q);
        let bound = kl_upper_bound(&p, &q).unwrap();
        prop_assert!(bound >= d - 1e-9, "bound {bound} < divergence {d}");
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_self(p in arb_dist(8)) {
        prop_assert!(kl_divergence(&p, &p).abs() < 1e-12);
    }

    #[test]
    fn binary_entropy_symmetry_and_concavity(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let f = |x: f64| binary_entropy(x).unwrap();
        prop_assert!((f(a) - f(1.0 - a)).abs() < 1e-9);
        let mid = f((a + b) / 2.0);
        prop_assert!(mid >= (f(a) + f(b)) / 2.0 - 1e-9);
    }
}

fn product_prob(product: &JointDist<usize, usize>, key: &(usize, usize)) -> f64 {
    product
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, p)| p)
        .unwrap_or(0.0)
}

fn renormalize_prefix(d: &Dist<usize>, size: usize) -> Dist<usize> {
    let kept: BTreeMap<usize, f64> = d.iter().take(size).map(|(&k, p)| (k, p)).collect();
    let total: f64 = kept.values().sum();
    Dist::new(kept.into_iter().map(|(k, p)| (k, p / total)).collect()).unwrap()
}

// ---------------------------------------------------------------------------
// walk machinery

proptest! {
    /// Half-L1 equals the variational definition max_A |mu(A) - nu(A)|,
    /// checked against brute-force subset enumeration.
    #[test]
    fn tv_matches_subset_enumeration(p in arb_dist(6), q in arb_dist(6)) {
        let keys: Vec<usize> = (1..=6).collect();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << keys.len()) {
            let (mut pa, mut qa) = (0.0, 0.0);
            for (i, k) in keys.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    pa += p.prob(k);
                    qa += q.prob(k);
                }
            }
            best = best.max((pa - qa).abs());
        }
        prop_assert!((tv_distance(&p, &q) - best).abs() < 1e-12);
    }
}

#[test]
fn stationary_is_fixed_point_on_families_up_to_64() {
    let specs = [
        GraphFamilySpec::Path { n: 64 },
        GraphFamilySpec::Cycle { n: 48 },
        GraphFamilySpec::Clique { n: 8 },
        GraphFamilySpec::DoubleStar { d: 12, p: 5 },
        GraphFamilySpec::ChainOfCliques {
            x: 5,
            y: 4,
            seed: Some(3),
        },
        GraphFamilySpec::CompleteBipartite { a: 8, b: 9 },
    ];
    for spec in &specs {
        let g = gen_family(spec).unwrap();
        assert!(g.n() <= 64);
        let p = lazy_walk_matrix(&g);
        let pi = dist_to_dense(&stationary_distribution(&g), g.n()).unwrap();
        let pushed = p.apply(&pi);
        let residual: f64 = pi
            .iter()
            .zip(pushed.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(residual < 1e-10, "{spec:?} residual {residual}");
    }
}

#[test]
fn worst_case_distance_never_increases() {
    for spec in [
        GraphFamilySpec::Path { n: 8 },
        GraphFamilySpec::Cycle { n: 8 },
        GraphFamilySpec::ChainOfCliques {
            x: 3,
            y: 2,
            seed: Some(1),
        },
    ] {
        let g = gen_family(&spec).unwrap();
        let p = lazy_walk_matrix(&g);
        let pi = stationary_distribution(&g);
        let mut last = 1.0f64;
        for t in 0..=512u64 {
            let d = d_t(&p, &pi, t).unwrap();
            assert!(d <= last + 1e-12, "{spec:?} d({t}) = {d} > {last}");
            last = d;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sandwich_holds_on_random_graphs(g in arb_graph(), t in 0u64..=128) {
        let p = lazy_walk_matrix(&g);
        let pi = stationary_distribution(&g);
        let d = d_t(&p, &pi, t).unwrap();
        let dbar = dbar_t(&p, t);
        prop_assert!(d <= dbar + 1e-12);
        prop_assert!(dbar <= 2.0 * d + 1e-12);
    }

    #[test]
    fn propagation_reaches_stationarity(g in arb_graph(), s in 1usize..=10) {
        let start = (s - 1) % g.n() + 1;
        let p = lazy_walk_matrix(&g);
        let pi = stationary_distribution(&g);
        let t4 = 4 * mixing_time(&p, &pi, 0.25, 4096).unwrap().max(1);
        let law = propagate(&Dist::point(start), &p, t4).unwrap();
        let d = kl_divergence(&law, &pi);
        prop_assert!(d < 0.05, "KL to stationarity {d} bits at t = {t4}");
    }
}

// ---------------------------------------------------------------------------
// protocols

#[test]
fn hider_step_passes_chi_square() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let view = LocalView {
        vertex_id: 1,
        degree: 4,
        arrival_port: None,
        n_hint: Some(16),
        round: 0,
    };
    let q = 0.1;
    let samples = 1_000_000u64;
    let mut counts = [0u64; 3];
    for _ in 0..samples {
        match random_walk_hider_step(&view, q, &mut rng).unwrap() {
            hidekit::algorithms::AgentDecision::Terminate => counts[0] += 1,
            hidekit::algorithms::AgentDecision::Stay => counts[1] += 1,
            hidekit::algorithms::AgentDecision::MovePort(_) => counts[2] += 1,
        }
    }
    let expected = [
        q * samples as f64,
        0.5 * samples as f64,
        (0.5 - q) * samples as f64,
    ];
    let stat: f64 = counts
        .iter()
        .zip(expected.iter())
        .map(|(&o, &e)| (o as f64 - e) * (o as f64 - e) / e)
        .sum();
    // Chi-square with 2 degrees of freedom at significance 0.001.
    assert!(stat < 13.816, "chi-square statistic {stat}");
    // Empirical branch frequencies within 0.002 of (q, 1/2, 1/2 - q).
    for (c, e) in counts.iter().zip(expected.iter()) {
        assert!((*c as f64 - e).abs() / samples as f64 <= 0.002);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn go_to_min_id_bounded_by_diameter(g in arb_graph()) {
        let d = g.diameter() as u64;
        for start in g.vertices() {
            let t = go_to_min_id(&g, start);
            prop_assert!(t.moves <= d);
            prop_assert_eq!(*t.visited.last().unwrap(), 1);
        }
    }

    #[test]
    fn dfs_explores_and_returns(g in arb_graph()) {
        for start in g.vertices() {
            let t = dfs_min_id(&g, start);
            prop_assert_eq!(*t.visited.last().unwrap(), 1);
            prop_assert!(t.moves as usize <= 4 * g.m() + g.n());
            let mut seen = t.visited.clone();
            seen.sort_unstable();
            seen.dedup();
            prop_assert_eq!(seen.len(), g.n());
        }
    }
}

/// Whenever the exact reachable sets at time t are disjoint, the measured
/// mutual information under the two-point prior clears the binary-entropy
/// bound 1 - f(1/2 + gamma).
#[test]
fn lemma_bound_is_sound_where_it_applies() {
    use hidekit::algorithms::AlgorithmSpec;
    use hidekit::analyze::lemma_known_check;
    let specs = [
        GraphFamilySpec::Path { n: 6 },
        GraphFamilySpec::Cycle { n: 8 },
        GraphFamilySpec::DoubleStar { d: 3, p: 1 },
        GraphFamilySpec::ChainOfCliques {
            x: 3,
            y: 3,
            seed: Some(5),
        },
    ];
    let algos = [
        AlgorithmSpec::GoToMinId,
        AlgorithmSpec::DfsMinId,
        AlgorithmSpec::RandomWalkHider { q: 0.2 },
    ];
    let mut applied = 0;
    for spec in &specs {
        let g = gen_family(spec).unwrap();
        let (u, v) = g.diameter_pair();
        for algo in &algos {
            for t in 0..=2u64 {
                let w = lemma_known_check(&g, algo, t, u, v).unwrap();
                if w.gamma > 0.0 {
                    applied += 1;
                    assert!(
                        w.measured_mi >= w.eta_bound - 1e-6,
                        "{spec:?} {algo:?} t={t}: MI {} < eta {}",
                        w.measured_mi,
                        w.eta_bound
                    );
                }
            }
        }
    }
    assert!(applied > 10, "the bound should actually apply somewhere");
}

#[test]
fn dfs_visits_everything_up_to_32() {
    let specs = [
        GraphFamilySpec::Cycle { n: 32 },
        GraphFamilySpec::Path { n: 32 },
        GraphFamilySpec::ChainOfCliques {
            x: 4,
            y: 4,
            seed: Some(12),
        },
        GraphFamilySpec::CompleteBipartite { a: 6, b: 6 },
    ];
    for spec in &specs {
        let g = gen_family(spec).unwrap();
        assert!(g.n() <= 32);
        for start in [1, g.n() / 2 + 1, g.n()] {
            let t = dfs_min_id(&g, start);
            let mut seen = t.visited.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), g.n(), "{spec:?} from {start}");
        }
    }
}
