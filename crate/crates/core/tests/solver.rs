mod common;

use common::{all_permutations, brute_force_min, oracle_cost, oracle_holds, random_graph, random_params, ratio};
use num_rational::BigRational;
use packlay_core::access::{AccessEdge, EdgeKind, FieldAccessGraph};
use packlay_core::attrs::{AttrSet, FieldAttr};
use packlay_core::gen::{random_permutation, rng};
use packlay_core::lang::load;
use packlay_core::pipeline::{analyze_program, layout_problems, layout_report, optimize, Scope};
use packlay_core::solver::{
    edge_cost, emit_lp, layout_cost, solve_branch_and_bound, solve_exact, solve_exhaustive, solve_global, solve_greedy,
    Constraint, CostConfigError, CostParams, LayoutAssignment, Mode, SolveError,
};
use proptest::prelude::*;
use rand::Rng;

fn edge(src: usize, dst: usize, w: BigRational, kind: EdgeKind) -> AccessEdge {
    AccessEdge { src, dst, weight: w, kind }
}

fn graph(n: usize, edges: Vec<AccessEdge>, preference: Vec<usize>) -> FieldAccessGraph {
    FieldAccessGraph { dcon: "K".into(), n, edges, preference }
}

fn plain(n: usize) -> Vec<AttrSet> {
    vec![AttrSet::default(); n]
}

fn random_constraints(rng: &mut packlay_core::gen::Rng64, n: usize) -> Vec<Constraint> {
    let k = rng.gen_range(0..=2);
    (0..k)
        .map(|_| {
            if rng.gen_bool(0.5) {
                Constraint::Absolute { field: rng.gen_range(0..n), pos: rng.gen_range(0..n) }
            } else {
                let after = rng.gen_range(0..n);
                let before = (after + rng.gen_range(1..n)) % n;
                Constraint::Relative { after, before, adjacent: rng.gen_bool(0.3) }
            }
        })
        .collect()
}

#[test]
fn edge_cost_examples() {
    let p = CostParams::default();
    let df = edge(0, 1, ratio(1, 1), EdgeKind::DataFlow);
    assert_eq!(edge_cost(1, &df, &plain(2), &p), ratio(1, 1));
    assert_eq!(edge_cost(3, &df, &plain(2), &p), ratio(2, 1));
    assert_eq!(edge_cost(-1, &df, &plain(2), &p), ratio(4, 1));
    assert_eq!(edge_cost(-2, &df, &plain(2), &p), ratio(8, 1));
    // Control flow into an inlineable field from a scalar one.
    let attrs = vec![AttrSet::default().with(FieldAttr::Scalar), AttrSet::default().with(FieldAttr::Inlineable)];
    let cf = edge(0, 1, ratio(1, 1), EdgeKind::ControlFlow);
    assert_eq!(edge_cost(-2, &cf, &attrs, &p), ratio(2, 1));
    assert_eq!(edge_cost(-1, &cf, &attrs, &p), ratio(1, 1));
    assert_eq!(edge_cost(1, &cf, &attrs, &p), ratio(4, 1));
    // Weight scales linearly.
    let half = edge(0, 1, ratio(1, 2), EdgeKind::DataFlow);
    assert_eq!(edge_cost(1, &half, &plain(2), &p), ratio(1, 2));
}

#[test]
fn default_costs_validate() {
    CostParams::default().validate().unwrap();
}

#[test]
fn cost_config_parsing() {
    let ok = r#"{"df":{"succ":1,"after":"2","pred":"5/2","before":3.5},"inl":{"succ":4,"after":8,"pred":1,"before":2}}"#;
    let p = CostParams::from_json(ok).unwrap();
    assert_eq!(p.df.pred, ratio(5, 2));
    assert_eq!(p.df.before, ratio(7, 2));

    let cases = [
        ("{", "syntax"),
        (r#"{"df":{"succ":1,"after":2,"pred":4,"before":8}}"#, "syntax"),
        (r#"{"df":{"succ":1,"after":2,"pred":4,"before":8,"x":1},"inl":{"succ":4,"after":8,"pred":1,"before":2}}"#, "syntax"),
        (r#"{"df":{"succ":2,"after":1,"pred":4,"before":8},"inl":{"succ":4,"after":8,"pred":1,"before":2}}"#, "df"),
        (r#"{"df":{"succ":1,"after":2,"pred":4,"before":4},"inl":{"succ":4,"after":8,"pred":1,"before":2}}"#, "df"),
        (r#"{"df":{"succ":1,"after":2,"pred":4,"before":8},"inl":{"succ":1,"after":8,"pred":2,"before":3}}"#, "inl"),
        (r#"{"df":{"succ":-1,"after":2,"pred":4,"before":8},"inl":{"succ":4,"after":8,"pred":1,"before":2}}"#, "neg"),
        (r#"{"df":{"succ":"one","after":2,"pred":4,"before":8},"inl":{"succ":4,"after":8,"pred":1,"before":2}}"#, "nan"),
        (r#"{"df":{"succ":"1/0","after":2,"pred":4,"before":8},"inl":{"succ":4,"after":8,"pred":1,"before":2}}"#, "nan"),
        (r#"{"df":{"succ":true,"after":2,"pred":4,"before":8},"inl":{"succ":4,"after":8,"pred":1,"before":2}}"#, "nan"),
    ];
    for (src, want) in cases {
        let e = CostParams::from_json(src).unwrap_err();
        let ok = match want {
            "syntax" => matches!(e, CostConfigError::Syntax(_)),
            "df" => e == CostConfigError::DataFlowOrder,
            "inl" => e == CostConfigError::InlineableOrder,
            "neg" => matches!(e, CostConfigError::Negative(_)),
            _ => matches!(e, CostConfigError::NotRational(_)),
        };
        assert!(ok, "{src}: {e:?}");
    }
}

#[test]
fn running_example_reports() {
    let p = load(packlay_core::bench::corpus_source("running-example").unwrap()).unwrap();
    let params = CostParams::default();
    // Solver Blog cost, with Content=0 HashTags=1 BlogList=2 at positions
    // 2, 0, 1 (BlogList inlineable):
    //   0->2 cf, dst inl, pred:  1 * 1/4
    //   1->0 df, after:          2 * 1/4
    //   1->2 df, succ:           1 * 1/4
    //   2->0 cf, src inl, succ:  1 * 1/4   = 5/4
    // Greedy order 1, 0, 2:
    //   0->2 succ inl 4, 1->0 succ 1, 1->2 after 2, 2->0 pred 4  -> 11/4
    let solver = optimize(&p, Mode::Solver, &Scope::Global, &params).unwrap();
    assert_eq!(
        layout_report(&solver.solutions, Mode::Solver),
        "[\n\
         {\"dcon\":\"CCons\",\"order\":[0,1],\"cost_num\":1,\"cost_den\":2,\"mode\":\"solver\"},\n\
         {\"dcon\":\"HCons\",\"order\":[0,1],\"cost_num\":1,\"cost_den\":4,\"mode\":\"solver\"},\n\
         {\"dcon\":\"Blog\",\"order\":[1,2,0],\"cost_num\":5,\"cost_den\":4,\"mode\":\"solver\"}\n\
         ]\n"
    );
    let greedy = optimize(&p, Mode::Greedy, &Scope::Global, &params).unwrap();
    let blog = greedy.solutions.iter().find(|s| s.layout.dcon == "Blog").unwrap();
    assert_eq!(blog.layout.order, vec![1, 0, 2]);
    assert_eq!(blog.cost, ratio(11, 4));
}

#[test]
fn local_scope_uses_one_function() {
    let p = load(packlay_core::bench::corpus_source("running-example").unwrap()).unwrap();
    let a = analyze_program(&p).unwrap();
    let probs = layout_problems(&p, &a, &Scope::Local("search".into())).unwrap();
    let dcons: Vec<&str> = probs.iter().map(|x| &*x.graph.dcon).collect();
    assert_eq!(dcons, vec!["HCons"]);
    assert!(layout_problems(&p, &a, &Scope::Local("nope".into())).is_err());
}

#[test]
fn greedy_on_empty_graph_is_identity() {
    assert_eq!(solve_greedy(&graph(4, vec![], vec![])).order, vec![0, 1, 2, 3]);
}

#[test]
fn greedy_follows_heaviest_successor() {
    // 2 -> 0 -> 1, with a lighter 0 -> 3 side edge.
    let g = graph(
        4,
        vec![
            edge(0, 1, ratio(1, 2), EdgeKind::ControlFlow),
            edge(0, 3, ratio(1, 4), EdgeKind::ControlFlow),
            edge(2, 0, ratio(1, 1), EdgeKind::ControlFlow),
        ],
        vec![2, 0, 1, 3],
    );
    assert_eq!(solve_greedy(&g).order, vec![2, 0, 1, 3]);
}

#[test]
fn solver_and_greedy_differ_on_running_example_shape() {
    let q = ratio(1, 4);
    let g = graph(
        3,
        vec![
            edge(0, 2, q.clone(), EdgeKind::ControlFlow),
            edge(1, 0, q.clone(), EdgeKind::DataFlow),
            edge(1, 2, q.clone(), EdgeKind::DataFlow),
            edge(2, 0, q, EdgeKind::ControlFlow),
        ],
        vec![1, 0, 2],
    );
    let attrs = vec![AttrSet::default(), AttrSet::default(), AttrSet::default().with(FieldAttr::Inlineable)];
    let s = solve_exact(&g, &attrs, &CostParams::default(), &[]).unwrap();
    assert_eq!(s.layout.order, vec![1, 2, 0]);
    assert_eq!(solve_greedy(&g).order, vec![1, 0, 2]);
}

#[test]
fn constraints_are_honoured() {
    let g = graph(3, vec![edge(0, 1, ratio(1, 1), EdgeKind::DataFlow)], vec![0, 1]);
    let cs = vec![Constraint::Relative { after: 0, before: 1, adjacent: true }];
    let s = solve_exact(&g, &plain(3), &CostParams::default(), &cs).unwrap();
    let pos = s.layout.pos();
    assert_eq!(pos[0], pos[1] + 1);
    let cs = vec![Constraint::Absolute { field: 2, pos: 0 }];
    let s = solve_exact(&g, &plain(3), &CostParams::default(), &cs).unwrap();
    assert_eq!(s.layout.order, vec![2, 0, 1]);
}

#[test]
fn conflicting_constraints_name_the_pair() {
    let g = graph(3, vec![], vec![]);
    let a = Constraint::Relative { after: 0, before: 1, adjacent: false };
    let b = Constraint::Relative { after: 1, before: 0, adjacent: false };
    match solve_exact(&g, &plain(3), &CostParams::default(), &[a.clone(), b.clone()]) {
        Err(SolveError::Conflict { a: x, b: y, .. }) => assert_eq!((x, y), (a, b)),
        other => panic!("{other:?}"),
    }
    let bad = Constraint::Absolute { field: 0, pos: 5 };
    assert!(matches!(
        solve_exact(&g, &plain(3), &CostParams::default(), &[bad]),
        Err(SolveError::Unsatisfiable { .. })
    ));
    // Pairwise satisfiable, jointly not.
    let cs = [
        Constraint::Absolute { field: 0, pos: 0 },
        Constraint::Relative { after: 1, before: 2, adjacent: true },
        Constraint::Relative { after: 2, before: 1, adjacent: false },
    ];
    assert!(solve_exact(&g, &plain(3), &CostParams::default(), &cs).is_err());
}

#[test]
fn annotation_conflict_surfaces_from_the_pipeline() {
    let src = "data T = L | N Int Bool T\n\
               {-# ANN N 0 AFTER 1 #-}\n{-# ANN N 1 AFTER 0 #-}\n\
               f : (T) -> Int\nf t = case t of\n  L -> 0\n  N x b r -> x\n";
    let p = load(src).unwrap();
    let e = optimize(&p, Mode::Solver, &Scope::Global, &CostParams::default()).unwrap_err();
    assert!(e.to_string().contains("conflict"), "{e}");
}

#[test]
fn greedy_mode_falls_back_to_a_feasible_layout() {
    let g = graph(3, vec![edge(0, 1, ratio(1, 1), EdgeKind::ControlFlow)], vec![0, 1]);
    let cs = vec![Constraint::Absolute { field: 0, pos: 2 }];
    let prob = packlay_core::solver::GlobalProblem { graph: g, attrs: plain(3), constraints: cs.clone() };
    let s = solve_global(&[prob], &CostParams::default(), Mode::Greedy).unwrap();
    assert!(cs[0].holds(&s[0].layout.pos()));
}

#[test]
fn earlier_function_wins_a_symmetric_tie() {
    // F1 reads a then b, F2 reads b then a, with equal weight.
    let body = |name: &str, first: &str, second: &str| {
        format!(
            "{name} : (P) -> Int\n{name} p = case p of\n  Q a b ->\n    let x = add {first} 1 in\n    let y = add {second} x in\n    y\n"
        )
    };
    let src = format!("data P = Q Int Int\n{}{}", body("f1", "b", "a"), body("f2", "a", "b"));
    let p = load(&src).unwrap();
    let o = optimize(&p, Mode::Solver, &Scope::Global, &CostParams::default()).unwrap();
    assert_eq!(o.solutions[0].layout.order, vec![1, 0]);
    let src = format!("data P = Q Int Int\n{}{}", body("f1", "a", "b"), body("f2", "b", "a"));
    let p = load(&src).unwrap();
    let o = optimize(&p, Mode::Solver, &Scope::Global, &CostParams::default()).unwrap();
    assert_eq!(o.solutions[0].layout.order, vec![0, 1]);
}

#[test]
fn lp_listing_shape() {
    let g = graph(2, vec![edge(0, 1, ratio(1, 2), EdgeKind::DataFlow)], vec![0, 1]);
    let lp = emit_lp(&g, &plain(2), &CostParams::default(), &[]);
    let section = |name: &str| -> Vec<String> {
        let lines: Vec<&str> = lp.lines().collect();
        let at = lines.iter().position(|l| *l == name).unwrap();
        lines[at + 1..].iter().take_while(|l| l.starts_with(' ')).map(|s| s.to_string()).collect()
    };
    assert_eq!(section("variables").len(), 2);
    assert_eq!(section("all-different"), vec!["  f0 != f1"]);
    let terms: Vec<String> = section("minimize").into_iter().filter(|l| l.trim_start().starts_with('+')).collect();
    assert_eq!(terms, vec!["    + 1/2 [f1 - f0 = 1]", "    + 1 [f1 - f0 >= 2]", "    + 2 [f1 - f0 = -1]", "    + 4 [f1 - f0 <= -2]"]);

    let p = load(packlay_core::bench::corpus_source("running-example").unwrap()).unwrap();
    let a = analyze_program(&p).unwrap();
    let probs = layout_problems(&p, &a, &Scope::Global).unwrap();
    let blog = probs.iter().find(|x| &*x.graph.dcon == "Blog").unwrap();
    let lp = emit_lp(&blog.graph, &blog.attrs, &CostParams::default(), &[]);
    assert_eq!(lp.lines().filter(|l| l.trim_start().starts_with('+')).count(), 4 * blog.graph.edges.len());
    assert_eq!(lp.lines().filter(|l| l.contains("!=")).count(), 3);
    assert_eq!(lp, emit_lp(&blog.graph, &blog.attrs, &CostParams::default(), &[]));
}

#[test]
fn exhaustive_and_branch_and_bound_agree_beyond_the_cutoff() {
    let mut r = rng(7);
    for _ in 0..3 {
        let (g, attrs) = random_graph(&mut r, 9);
        let params = CostParams::default();
        let a = solve_exhaustive(&g, &attrs, &params, &[]).unwrap();
        let b = solve_branch_and_bound(&g, &attrs, &params, &[]).unwrap();
        assert_eq!(a.cost, b.cost);
        assert_eq!(a.layout, b.layout);
        assert_eq!(solve_exact(&g, &attrs, &params, &[]).unwrap(), b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exact_matches_brute_force(seed in any::<u64>(), n in 1usize..=7) {
        let mut r = rng(seed);
        let (g, attrs) = random_graph(&mut r, n);
        let params = if r.gen_bool(0.5) { CostParams::default() } else { random_params(&mut r) };
        let cs = if n >= 2 && r.gen_bool(0.3) { random_constraints(&mut r, n) } else { vec![] };
        let want = brute_force_min(&g, &attrs, &params, &cs);
        for solve in [solve_exact, solve_exhaustive, solve_branch_and_bound] {
            match (&want, solve(&g, &attrs, &params, &cs)) {
                (Some(w), Ok(s)) => {
                    prop_assert!(s.layout.is_permutation());
                    prop_assert!(oracle_holds(&s.layout.order, &cs));
                    prop_assert_eq!(&s.cost, w);
                    prop_assert_eq!(&oracle_cost(&s.layout.order, &g, &attrs, &params), w);
                    prop_assert_eq!(&layout_cost(&s.layout, &g, &attrs, &params), w);
                }
                (None, Err(_)) => {}
                (w, s) => prop_assert!(false, "oracle {:?} vs solver {:?}", w, s),
            }
        }
    }

    #[test]
    fn layout_cost_matches_oracle(seed in any::<u64>(), n in 1usize..=7) {
        let mut r = rng(seed);
        let (g, attrs) = random_graph(&mut r, n);
        let params = random_params(&mut r);
        let a = LayoutAssignment { dcon: "K".into(), order: random_permutation(&mut r, n) };
        prop_assert_eq!(layout_cost(&a, &g, &attrs, &params), oracle_cost(&a.order, &g, &attrs, &params));
    }

    #[test]
    fn scaling_costs_keeps_the_argmin(seed in any::<u64>(), n in 1usize..=6, k in 1i64..50, d in 1i64..20) {
        let mut r = rng(seed);
        let (g, attrs) = random_graph(&mut r, n);
        let params = random_params(&mut r);
        let k = ratio(k, d);
        let a = solve_exact(&g, &attrs, &params, &[]).unwrap();
        let b = solve_exact(&g, &attrs, &params.scaled(&k), &[]).unwrap();
        prop_assert_eq!(&a.layout, &b.layout);
        prop_assert_eq!(a.cost * k, b.cost);
    }

    #[test]
    fn raising_before_cost_never_lowers_the_optimum(seed in any::<u64>(), n in 2usize..=6, bump in 1i64..10) {
        let mut r = rng(seed);
        let (g, attrs) = random_graph(&mut r, n);
        let params = random_params(&mut r);
        let mut higher = params.clone();
        higher.df.before = &higher.df.before + ratio(bump, 1);
        higher.validate().unwrap();
        let a = solve_exact(&g, &attrs, &params, &[]).unwrap();
        let b = solve_exact(&g, &attrs, &higher, &[]).unwrap();
        prop_assert!(b.cost >= a.cost);
    }

    #[test]
    fn greedy_yields_a_permutation_no_better_than_exact(seed in any::<u64>(), n in 0usize..=7) {
        let mut r = rng(seed);
        let (g, attrs) = random_graph(&mut r, n);
        let a = solve_greedy(&g);
        prop_assert!(a.is_permutation());
        prop_assert_eq!(a.order.len(), n);
        if n > 0 {
            let params = CostParams::default();
            let best = solve_exact(&g, &attrs, &params, &[]).unwrap().cost;
            prop_assert!(layout_cost(&a, &g, &attrs, &params) >= best);
        }
    }
}

#[test]
fn permutation_helper_is_complete() {
    let ps = all_permutations(4);
    assert_eq!(ps.len(), 24);
    let set: std::collections::BTreeSet<_> = ps.into_iter().collect();
    assert_eq!(set.len(), 24);
}
