use std::collections::{BTreeSet, VecDeque};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sagin_core::topology::{
    build_reference_topology, cross_section_capacity, path_weight, shortest_path, Band, LayerFilter, LinkSpec, Node,
    NodeId, NodeKind, Partition, Topology, TopologyConfig, WeightRule,
};

fn default_topo() -> Topology {
    build_reference_topology(&TopologyConfig::default()).unwrap()
}

fn bfs_reach(topo: &Topology, src: NodeId, allowed: impl Fn(NodeId) -> bool) -> Vec<bool> {
    let mut seen = vec![false; topo.node_count()];
    seen[src.index()] = true;
    // adjacency rebuilt from the raw link list, independent of the topology's own
    let mut adj = vec![Vec::new(); topo.node_count()];
    for l in topo.links() {
        adj[l.src.index()].push(l.dst);
    }
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u.index()] {
            if !seen[v.index()] && allowed(v) {
                seen[v.index()] = true;
                q.push_back(v);
            }
        }
    }
    seen
}

/// Plain Bellman-Ford over the directed link list.
fn bellman_ford(topo: &Topology, src: NodeId, rule: WeightRule) -> Vec<Option<u64>> {
    let mut dist = vec![None; topo.node_count()];
    dist[src.index()] = Some(0u64);
    for _ in 0..topo.node_count() {
        let mut changed = false;
        for l in topo.links() {
            if let Some(du) = dist[l.src.index()] {
                let cand = du + rule.weight(l);
                if dist[l.dst.index()].is_none_or(|dv| cand < dv) {
                    dist[l.dst.index()] = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

#[test]
fn default_node_counts_and_partition_symmetry() {
    let t = default_topo();
    assert_eq!(t.node_count(), 3340);
    for (kind, n) in [
        (NodeKind::Geo, 2),
        (NodeKind::Meo, 6),
        (NodeKind::Leo, 12),
        (NodeKind::Uav, 120),
        (NodeKind::Ground, 3200),
    ] {
        assert_eq!(t.count(kind), n, "{kind:?}");
        assert_eq!(t.nodes_on(kind, Partition::Left).len(), n / 2);
        assert_eq!(t.nodes_on(kind, Partition::Right).len(), n / 2);
    }
}

#[test]
fn cross_partition_links_are_exactly_the_three_egress_links() {
    let t = default_topo();
    let cross: BTreeSet<(String, String)> = t
        .links()
        .iter()
        .filter(|l| t.side(l.src) == Partition::Left && t.side(l.dst) == Partition::Right)
        .map(|l| (t.label(l.src), t.label(l.dst)))
        .collect();
    let want: BTreeSet<(String, String)> = [("M2", "M4"), ("M3", "M6"), ("G1", "G2")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(cross, want);
    let back = t
        .links()
        .iter()
        .filter(|l| t.side(l.src) == Partition::Right && t.side(l.dst) == Partition::Left)
        .count();
    assert_eq!(back, 3);
}

#[test]
fn structural_invariants() {
    let t = default_topo();
    for id in t.node_ids() {
        let nbrs = t.neighbors(id);
        let kinds: Vec<NodeKind> = nbrs.iter().map(|&(n, _)| t.kind(n)).collect();
        match t.kind(id) {
            NodeKind::Ground => assert_eq!(kinds, vec![NodeKind::Uav]),
            NodeKind::Uav => assert_eq!(kinds.iter().filter(|&&k| k == NodeKind::Leo).count(), 1),
            NodeKind::Leo => assert!(!kinds.contains(&NodeKind::Leo)),
            _ => {}
        }
    }
    for l in t.links() {
        let (a, b) = (t.kind(l.src), t.kind(l.dst));
        if a == b {
            assert!(matches!(a, NodeKind::Geo | NodeKind::Meo), "{a:?}-{b:?} link");
        }
        assert!(l.capacity_bps > 0 && l.prop_delay_ns > 0 && l.buffer_pkts >= 1);
        assert_ne!(l.src, l.dst);
    }
    // every directed link has its reverse with the same parameters
    for (i, l) in t.links().iter().enumerate() {
        let r = t.link(sagin_core::LinkId(i as u32).reverse());
        assert_eq!((r.src, r.dst), (l.dst, l.src));
        assert_eq!(
            (r.capacity_bps, r.prop_delay_ns, r.buffer_pkts),
            (l.capacity_bps, l.prop_delay_ns, l.buffer_pkts)
        );
    }
}

#[test]
fn every_left_ground_reaches_a_sampled_right_ground() {
    let t = default_topo();
    let left = t.nodes_on(NodeKind::Ground, Partition::Left);
    let right = t.nodes_on(NodeKind::Ground, Partition::Right);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for &g in &left {
        let target = right[rng.gen_range(0..right.len())];
        assert!(bfs_reach(&t, g, |_| true)[target.index()], "{g} cannot reach {target}");
    }
}

#[test]
fn without_ground_nodes_the_upper_layers_stay_connected() {
    let cfg = TopologyConfig {
        ground: 0,
        ..Default::default()
    };
    let t = build_reference_topology(&cfg).unwrap();
    assert_eq!(t.node_count(), 140);
    assert!(bfs_reach(&t, NodeId(0), |_| true).iter().all(|&r| r));
}

#[test]
fn dijkstra_matches_bellman_ford_on_random_pairs() {
    let t = default_topo();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let left = t.nodes_on(NodeKind::Ground, Partition::Left);
    let right = t.nodes_on(NodeKind::Ground, Partition::Right);
    for i in 0..100 {
        // half ground-to-ground, half arbitrary nodes
        let (src, dst) = if i % 2 == 0 {
            (left[rng.gen_range(0..left.len())], right[rng.gen_range(0..right.len())])
        } else {
            let n = t.node_count() as u32;
            let a = NodeId(rng.gen_range(0..n));
            let mut b = NodeId(rng.gen_range(0..n));
            while b == a {
                b = NodeId(rng.gen_range(0..n));
            }
            (a, b)
        };
        for rule in [WeightRule::PropDelay, WeightRule::HopCount] {
            let path = shortest_path(&t, src, dst, rule).unwrap();
            assert_eq!((path.first(), path.last()), (src, dst));
            let got = path_weight(&t, &path, rule).expect("consecutive nodes adjacent");
            let want = bellman_ford(&t, src, rule)[dst.index()].unwrap();
            assert_eq!(got, want, "{src}->{dst} {rule:?}");
        }
    }
}

#[test]
fn m1_to_m5_tie_breaks_to_the_smallest_sequence() {
    let t = default_topo();
    let p = shortest_path(&t, t.meo(1), t.meo(5), WeightRule::PropDelay).unwrap();
    assert_eq!(p.nodes, vec![t.meo(1), t.meo(2), t.meo(4), t.meo(5)]);
    // the other 110 ms route exists and is lexicographically larger
    let alt = vec![t.meo(1), t.meo(3), t.meo(6), t.meo(5)];
    assert_eq!(
        path_weight(&t, &sagin_core::Path::new(alt.clone()), WeightRule::PropDelay),
        path_weight(&t, &p, WeightRule::PropDelay)
    );
    assert!(p.nodes < alt);
    let adj = shortest_path(&t, t.meo(1), t.meo(2), WeightRule::PropDelay).unwrap();
    assert_eq!(adj.nodes, vec![t.meo(1), t.meo(2)]);
}

#[test]
fn cross_section_capacities() {
    let t = default_topo();
    assert_eq!(
        cross_section_capacity(&t, LayerFilter::new(&[NodeKind::Meo])),
        2_000_000_000
    );
    assert_eq!(
        cross_section_capacity(&t, LayerFilter::new(&[NodeKind::Meo, NodeKind::Geo])),
        3_000_000_000
    );
    let none = TopologyConfig {
        meo_cross_links: vec![],
        geo_cross_links: false,
        ..Default::default()
    };
    // the reference builder refuses a partitioned graph
    assert!(build_reference_topology(&none).is_err());
    assert_eq!(cross_section_capacity(&t, LayerFilter::new(&[NodeKind::Leo])), 0);
    let meo = |side| Node {
        kind: NodeKind::Meo,
        side,
    };
    let isl = |a, b| LinkSpec {
        a: NodeId(a),
        b: NodeId(b),
        capacity_bps: 1_000_000_000,
        prop_delay_ns: 30_000_000,
        buffer_pkts: 256,
        band: Band::Ka,
    };
    let split = Topology::new(
        vec![
            meo(Partition::Left),
            meo(Partition::Left),
            meo(Partition::Right),
            meo(Partition::Right),
        ],
        vec![isl(0, 1), isl(2, 3)],
    )
    .unwrap();
    assert_eq!(cross_section_capacity(&split, LayerFilter::all()), 0);
}

#[test]
fn geo_pair_is_the_only_cut_without_meo_cross_links() {
    let cfg = TopologyConfig {
        meo_cross_links: vec![],
        ..Default::default()
    };
    let t = build_reference_topology(&cfg).unwrap();
    let upper = |n: NodeId| matches!(t.kind(n), NodeKind::Meo | NodeKind::Geo);
    assert_eq!(
        cross_section_capacity(&t, LayerFilter::new(&[NodeKind::Meo, NodeKind::Geo])),
        1_000_000_000
    );
    let (g1, g2) = (t.geo(1), t.geo(2));
    // left and right upper layers connect, and only through G1-G2
    let reach = bfs_reach(&t, t.meo(1), upper);
    assert!(reach[t.meo(5).index()]);
    let blocked = |n: NodeId| upper(n) && n != g2;
    let reach = bfs_reach(&t, t.meo(1), blocked);
    assert!(reach[g1.index()]);
    for m in t.nodes_on(NodeKind::Meo, Partition::Right) {
        assert!(!reach[m.index()], "{} reachable without G1-G2", t.label(m));
    }
}

#[test]
fn dump_is_byte_identical_and_sorted() {
    let a = default_topo().dump();
    let b = default_topo().dump();
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), default_topo().links().len());
    assert_eq!(lines[0], "0 1 geo geo 1000000000 0.12 256 Ka");
    assert!(lines.contains(&"2 3 meo meo 1000000000 0.03 256 Ka"));
    assert!(lines.contains(&"3 5 meo meo 1000000000 0.05 256 Ka"));
    let keys: Vec<(u32, u32)> = lines
        .iter()
        .map(|l| {
            let mut it = l.split(' ').map(|f| f.parse::<u32>().unwrap_or(0));
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    // access band labels
    assert!(lines.iter().any(|l| l.ends_with("120000000 0.003 1024 L")));
    assert!(lines.iter().any(|l| l.ends_with("10000000 0.0001 1024 Access")));
}

#[test]
fn invalid_counts_are_rejected() {
    for cfg in [
        TopologyConfig {
            meo: 5,
            ..Default::default()
        },
        TopologyConfig {
            geo: 0,
            ..Default::default()
        },
        TopologyConfig {
            leo: 13,
            ..Default::default()
        },
    ] {
        let e = build_reference_topology(&cfg).unwrap_err();
        assert!(matches!(e, sagin_core::TopologyError::InvalidConfig(_)), "{e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shortest_paths_are_simple_and_adjacent(a in 0u32..3340, b in 0u32..3340) {
        prop_assume!(a != b);
        let t = default_topo_cached();
        let p = shortest_path(t, NodeId(a), NodeId(b), WeightRule::PropDelay).unwrap();
        let set: BTreeSet<_> = p.nodes.iter().collect();
        prop_assert_eq!(set.len(), p.nodes.len());
        for w in p.nodes.windows(2) {
            prop_assert!(t.link_between(w[0], w[1]).is_some());
        }
        // deterministic
        prop_assert_eq!(shortest_path(t, NodeId(a), NodeId(b), WeightRule::PropDelay).unwrap(), p);
    }
}

fn default_topo_cached() -> &'static Topology {
    static T: std::sync::OnceLock<Topology> = std::sync::OnceLock::new();
    T.get_or_init(default_topo)
}
