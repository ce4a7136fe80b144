//! Property tests for module invariants.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use hcocluster::adjacency::{build_graph, enumerate_variables, BoundaryVariableSet, NodeRef};
use hcocluster::constraints::{band_bounds, intra_constraints, ConstraintKind, LinearConstraint, Provenance};
use hcocluster::descriptors::{assemble_affinity, intra_similarity, AffinityInputs, DescriptorConfig};
use hcocluster::hierarchy::{build_bpt, encoding_to_cut, merging_step_encoding, Hierarchy};
use hcocluster::metrics::{boundary_pixels, boundary_pr, consistency_curve_labels, jaccard, PixelSet};
use hcocluster::raster::{label_csv, load_label_map, parse_label_csv, save_label_map, Image, LabelMap};
use hcocluster::solver::{brute_force, read_lp, solve_binary, solve_relaxation, write_lp, LpProblem, SolverConfig, Status};

fn label_map() -> impl Strategy<Value = LabelMap> {
    (1usize..8, 1usize..8, 1u32..5).prop_flat_map(|(w, h, k)| {
        prop::collection::vec(0..k, w * h).prop_map(move |raw| LabelMap::new(w, h, raw).unwrap())
    })
}

fn image(w: usize, h: usize) -> impl Strategy<Value = Image> {
    prop::collection::vec(any::<u8>(), w * h * 3).prop_map(move |d| Image::new(w, h, d).unwrap())
}

/// Leaves with 2 to 6 regions on a grid up to 5x5.
fn small_leaves() -> impl Strategy<Value = LabelMap> {
    (2usize..6, 2usize..6)
        .prop_flat_map(|(w, h)| prop::collection::vec(0u32..3, w * h).prop_map(move |raw| LabelMap::new(w, h, raw).unwrap()))
        .prop_filter("2..=6 regions", |m| (2..=6).contains(&m.region_count()))
}

/// Random hierarchy over `n` leaves, merging arbitrary pairs.
fn hierarchy(n: usize, picks: &[usize]) -> Hierarchy {
    let mut active: Vec<usize> = (0..n).collect();
    let mut pairs = Vec::new();
    let mut next = n;
    let mut k = 0;
    while active.len() > 1 {
        let i = picks[k % picks.len()] % active.len();
        let a = active.remove(i);
        let j = picks[(k + 1) % picks.len()] % active.len();
        let b = active.remove(j);
        pairs.push((a, b));
        active.push(next);
        next += 1;
        k += 2;
    }
    Hierarchy::from_pairs(n, &pairs).unwrap()
}

fn four_connected(map: &LabelMap) -> bool {
    let (w, h) = (map.width(), map.height());
    let mut seen = vec![false; w * h];
    let mut components = 0;
    for start in 0..w * h {
        if seen[start] {
            continue;
        }
        components += 1;
        let label = map.labels()[start];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            let mut nbrs = Vec::new();
            if x > 0 { nbrs.push(p - 1) }
            if x + 1 < w { nbrs.push(p + 1) }
            if y > 0 { nbrs.push(p - w) }
            if y + 1 < h { nbrs.push(p + w) }
            for q in nbrs {
                if !seen[q] && map.labels()[q] == label {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
    }
    components == map.region_count()
}

fn all_assignments(m: usize) -> impl Iterator<Item = Vec<u8>> {
    (0u32..1 << m).map(move |code| (0..m).map(|k| ((code >> k) & 1) as u8).collect())
}

fn random_problem() -> impl Strategy<Value = LpProblem> {
    (1usize..=10).prop_flat_map(|n| {
        let objective = prop::collection::vec(-32i32..=32, n).prop_map(|v| v.into_iter().map(|q| q as f64 / 8.0).collect::<Vec<_>>());
        let row = (
            prop::collection::vec((0..n, -3i64..=3), 1..=n.min(4)),
            prop::bool::weighted(0.2),
            -2i64..=3,
        );
        (objective, prop::collection::vec(row, 0..=n)).prop_map(|(objective, rows)| {
            LpProblem::new(objective).with_constraints(rows.into_iter().map(|(terms, eq, rhs)| {
                let kind = if eq { ConstraintKind::Equal } else { ConstraintKind::LessEqual };
                LinearConstraint::int(kind, terms, rhs, Provenance::Other)
            }))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn label_map_round_trips(map in label_map()) {
        let dir = tempfile::tempdir().unwrap();
        for name in ["m.csv", "m.png"] {
            let path = dir.path().join(name);
            save_label_map(&map, &path).unwrap();
            prop_assert_eq!(&load_label_map(&path).unwrap(), &map);
        }
        prop_assert_eq!(&parse_label_csv(&label_csv(&map)).unwrap(), &map);
    }

    #[test]
    fn regions_are_four_connected(map in label_map()) {
        prop_assert!(four_connected(&map));
        prop_assert!(map.labels().iter().all(|&l| (l as usize) < map.region_count()));
    }

    #[test]
    fn boundary_length_matches_pixel_pairs(map in label_map()) {
        let g = build_graph(&map, 0);
        let (w, h) = (map.width(), map.height());
        let l = map.labels();
        let mut pairs = 0;
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w && l[y * w + x] != l[y * w + x + 1] { pairs += 1 }
                if y + 1 < h && l[y * w + x] != l[(y + 1) * w + x] { pairs += 1 }
            }
        }
        prop_assert_eq!(g.total_boundary(), pairs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn intra_constraints_accept_exactly_tree_cuts(leaves in small_leaves(), picks in prop::collection::vec(0usize..100, 12)) {
        let vars = enumerate_variables(vec![build_graph(&leaves, 0)], 1.0).unwrap();
        let h = hierarchy(leaves.region_count(), &picks);
        let cons = intra_constraints(&h, &vars, 0).unwrap();
        for x in all_assignments(vars.len()) {
            let by_constraints = cons.iter().all(|c| c.is_satisfied(&x));
            let by_decoder = encoding_to_cut(&h, &vars, 0, &x).unwrap().is_ok();
            prop_assert_eq!(by_constraints, by_decoder, "assignment {:?}", x);
        }
    }

    #[test]
    fn merging_encodings_are_monotone(leaves in small_leaves(), picks in prop::collection::vec(0usize..100, 12)) {
        let vars = enumerate_variables(vec![build_graph(&leaves, 0)], 1.0).unwrap();
        let h = hierarchy(leaves.region_count(), &picks);
        for s in 0..h.merges().len() {
            let a = merging_step_encoding(&h, &vars, 0, s).unwrap();
            let b = merging_step_encoding(&h, &vars, 0, s + 1).unwrap();
            prop_assert!(a.iter().zip(&b).all(|(x, y)| y <= x));
        }
    }

    #[test]
    fn bpt_is_deterministic_and_binary((leaves, img) in small_leaves().prop_flat_map(|l| { let (w, h) = (l.width(), l.height()); (Just(l), image(w, h)) })) {
        let a = build_bpt(&img, &leaves).unwrap();
        prop_assert_eq!(&a, &build_bpt(&img, &leaves).unwrap());
        prop_assert_eq!(a.merges().len(), leaves.region_count() - 1);
        prop_assert_eq!(a.leaves(a.root()).len(), leaves.region_count());
    }

    #[test]
    fn variable_ids_round_trip(a in small_leaves(), b in small_leaves()) {
        let vars = enumerate_variables(vec![build_graph(&a, 0), build_graph(&b, 1)], 3.0).unwrap();
        for (id, v) in vars.vars().iter().enumerate() {
            prop_assert_eq!(vars.id_of(v.a, v.b), Some(id));
            prop_assert_eq!(vars.id_of(v.b, v.a), Some(id));
        }
        // inter candidacy does not depend on image order
        let swapped = enumerate_variables(vec![build_graph(&b, 0), build_graph(&a, 1)], 3.0).unwrap();
        let inter = |vs: &BoundaryVariableSet, flip: bool| -> BTreeSet<(usize, usize)> {
            vs.vars().iter().filter(|v| v.a.image != v.b.image).map(|v| {
                let (x, y) = if v.a.image == 0 { (v.a.region, v.b.region) } else { (v.b.region, v.a.region) };
                if flip { (y, x) } else { (x, y) }
            }).collect()
        };
        prop_assert_eq!(inter(&vars, false), inter(&swapped, true));
    }

    #[test]
    fn affinity_is_symmetric_in_image_order(
        (a, ia) in small_leaves().prop_flat_map(|l| { let (w, h) = (l.width(), l.height()); (Just(l), image(w, h)) }),
        (b, ib) in small_leaves().prop_flat_map(|l| { let (w, h) = (l.width(), l.height()); (Just(l), image(w, h)) }),
    ) {
        let config = DescriptorConfig { window: 3.0, ..DescriptorConfig::default() };
        let coeffs = |images: [&Image; 2], leaves: [&LabelMap; 2]| -> BTreeMap<(NodeRef, NodeRef), f64> {
            let vars = enumerate_variables(vec![build_graph(leaves[0], 0), build_graph(leaves[1], 1)], config.window).unwrap();
            let inputs = AffinityInputs::compute(&images, &leaves, &vars, &config).unwrap();
            let q = assemble_affinity(&vars, &inputs, &config).unwrap();
            vars.vars().iter().enumerate().map(|(id, v)| ((v.a, v.b), q.coefficients()[id])).collect()
        };
        let fwd = coeffs([&ia, &ib], [&a, &b]);
        let rev = coeffs([&ib, &ia], [&b, &a]);
        let flip = |n: NodeRef| NodeRef::new(1 - n.image, n.region);
        prop_assert_eq!(fwd.len(), rev.len());
        for ((x, y), q) in &fwd {
            let (fx, fy) = (flip(*x), flip(*y));
            let key = if fx < fy { (fx, fy) } else { (fy, fx) };
            prop_assert_eq!(Some(q), rev.get(&key));
            if x.image == y.image {
                prop_assert!(*q <= 0.0);
            }
        }
    }

    #[test]
    fn intra_similarity_is_non_positive(alpha in 0.0f64..100.0, bc in 0.0f64..=1.0) {
        prop_assert!(intra_similarity(alpha, bc) <= 0.0);
        prop_assert_eq!(intra_similarity(alpha, 1.0), 0.0);
    }

    #[test]
    fn band_bounds_lie_inside_the_band(n_b in 0u64..10_000, t in 0.01f64..=1.0, frac in 0.0f64..=1.0) {
        let beta = t * frac;
        let (lo, hi) = band_bounds(n_b, t, beta).unwrap();
        prop_assert!(lo as f64 >= (t - beta) * n_b as f64 - 1e-6);
        prop_assert!(hi as f64 <= t * n_b as f64 + 1e-6);
    }

    #[test]
    fn binary_solver_matches_brute_force(p in random_problem()) {
        let config = SolverConfig::default();
        let sol = solve_binary(&p, &config).unwrap();
        let brute = brute_force(&p).unwrap();
        prop_assert_eq!(sol.status, brute.status);
        if sol.status == Status::Optimal {
            prop_assert_eq!(&sol.exact_objective, &brute.exact_objective);
            prop_assert!(p.is_feasible(&sol.assignment().unwrap()));
            let relaxed = solve_relaxation(&p, &config).unwrap();
            prop_assert!(relaxed.objective <= sol.objective + 1e-7 * (1.0 + sol.objective.abs()));
            prop_assert_eq!(&solve_binary(&p, &config).unwrap(), &sol);
        }
    }

    #[test]
    fn lp_text_round_trips(p in random_problem()) {
        let back = read_lp(&write_lp(&p)).unwrap();
        prop_assert_eq!(&back.objective, &p.objective);
        let norm = |q: &LpProblem| -> Vec<_> { q.constraints.iter().map(|c| (c.kind, c.terms.clone(), c.rhs)).collect() };
        prop_assert_eq!(norm(&back), norm(&p));
    }

    #[test]
    fn metrics_are_symmetric(
        (w, h, a, b) in (2usize..10, 2usize..10).prop_flat_map(|(w, h)| (
            Just(w), Just(h), prop::collection::vec(0u32..4, w * h), prop::collection::vec(0u32..4, w * h)
        )),
        tol in 0.0f64..3.0,
    ) {
        let ma = PixelSet::new(w, h, a.iter().map(|&l| l == 0).collect()).unwrap();
        let mb = PixelSet::new(w, h, b.iter().map(|&l| l == 0).collect()).unwrap();
        let j = jaccard(&ma, &mb).unwrap();
        prop_assert_eq!(j, jaccard(&mb, &ma).unwrap());
        prop_assert!((0.0..=1.0).contains(&j));

        let (ba, bb) = (boundary_pixels(w, h, &a).unwrap(), boundary_pixels(w, h, &b).unwrap());
        let ab = boundary_pr(&ba, &bb, tol).unwrap();
        let ba_ = boundary_pr(&bb, &ba, tol).unwrap();
        prop_assert_eq!(ab.precision, ba_.recall);
        prop_assert_eq!(ab.recall, ba_.precision);

        let curve = consistency_curve_labels(w, h, &a, &mb).unwrap();
        prop_assert!(curve.points.windows(2).all(|p| p[0].0 < p[1].0 && p[0].1 <= p[1].1));
        prop_assert!(curve.max_consistency() <= 1.0);
    }
}
