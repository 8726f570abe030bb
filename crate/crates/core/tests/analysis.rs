mod common;

use std::collections::BTreeSet;

use common::ratio;
use num_rational::BigRational;
use num_traits::{One, Zero};
use packlay_core::access::{merge_graphs, EdgeKind, FieldAccessGraph};
use packlay_core::attrs::FieldAttr;
use packlay_core::bench::corpus_program;
use packlay_core::cfg::{build_cfg, Cfg, Payload};
use packlay_core::dataflow;
use packlay_core::gen::{random_program, rng, ProgramShape};
use packlay_core::lang::Program;
use packlay_core::pipeline::analyze_program;
use proptest::prelude::*;

fn cfg_of(p: &Program, f: &str) -> Cfg {
    let i = p.funs.iter().position(|x| &*x.name == f).unwrap();
    build_cfg(i, &p.funs[i]).unwrap()
}

fn let_node(g: &Cfg, var: &str) -> usize {
    g.nodes.iter().position(|n| matches!(&n.payload, Payload::Let { var: v, .. } if &**v == var)).unwrap()
}

/// Each non-terminal node passes its whole weight to its successors, and
/// the terminals together receive probability one.
fn check_conservation(g: &Cfg) -> Result<(), String> {
    let mut terminal = BigRational::zero();
    for (i, n) in g.nodes.iter().enumerate() {
        if n.succs.is_empty() {
            terminal += &n.weight;
            continue;
        }
        let out = n.succs.iter().fold(BigRational::zero(), |a, &s| a + &g.nodes[s].weight);
        if out != n.weight {
            return Err(format!("{}: node {i} has weight {} but passes on {out}", g.name, n.weight));
        }
    }
    if !g.nodes.is_empty() && !terminal.is_one() {
        return Err(format!("{}: terminal mass {terminal}", g.name));
    }
    Ok(())
}

/// Edges are unique per direction, never loops, and weigh at most one.
fn check_graph(g: &FieldAccessGraph) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for e in &g.edges {
        if e.src == e.dst || e.src >= g.n || e.dst >= g.n {
            return Err(format!("{}: bad edge {} -> {}", g.dcon, e.src, e.dst));
        }
        if !seen.insert((e.src, e.dst)) {
            return Err(format!("{}: duplicate edge {} -> {}", g.dcon, e.src, e.dst));
        }
        if e.weight <= BigRational::zero() || e.weight > BigRational::one() {
            return Err(format!("{}: weight {} out of range", g.dcon, e.weight));
        }
    }
    Ok(())
}

#[test]
fn running_example_branch_weights() {
    let p = corpus_program("running-example");
    let g = cfg_of(&p, "emphKeyword");
    check_conservation(&g).unwrap();
    assert!(g.nodes[0].weight.is_one());
    // Two arms on the list, then two on the search result.
    assert_eq!(g.nodes[let_node(&g, "content'")].weight, ratio(1, 4));
    for n in &g.nodes {
        assert!([ratio(1, 1), ratio(1, 2), ratio(1, 4)].contains(&n.weight), "{}", n.weight);
    }
}

#[test]
fn corpus_cfgs_conserve_probability() {
    for (name, _) in packlay_core::bench::CORPUS {
        let p = corpus_program(name);
        for (i, f) in p.funs.iter().enumerate() {
            check_conservation(&build_cfg(i, f).unwrap()).unwrap();
        }
    }
}

#[test]
fn independent_bindings_may_swap() {
    let p = corpus_program("running-example");
    let fi = p.funs.iter().position(|x| &*x.name == "emphKeyword").unwrap();
    let g = cfg_of(&p, "emphKeyword");
    let info = dataflow::analyze(&g, &p.funs[fi].params);
    let c = g.id(let_node(&g, "content'"));
    let b = g
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| matches!(&n.payload, Payload::Let { var, .. } if &**var == "blogs''"))
        .map(|(i, _)| g.id(i))
        .find(|&id| g.nodes[id.idx].parent_case == g.nodes[c.idx].parent_case)
        .unwrap();
    assert!(info.may_reorder(c, b).unwrap());
    assert!(info.may_reorder(b, c).unwrap());
    assert!(!info.may_reorder(c, c).unwrap());
    // The constructor application reads both, so neither may pass it.
    let con = g.nodes[b.idx].succs[0];
    assert!(info.depends(g.id(con), c).unwrap());
    assert!(!info.may_reorder(g.id(con), b).unwrap());
    assert!(info.derives_from(&"content'".into(), &"content".into()));
}

#[test]
fn running_example_access_graph() {
    // Hand walk of emphKeyword over Blog (Content, HashTags, BlogList):
    //   Nil arm reads nothing.
    //   True arm:  hashTags, then content, then blogs'   (1/4).
    //   False arm: hashTags, then blogs', then content   (1/4).
    // Both successors of hashTags are guarded by the search on it.
    let p = corpus_program("running-example");
    let a = analyze_program(&p).unwrap();
    let gs = &a.graphs["Blog"];
    assert_eq!(gs.len(), 1);
    let g = &gs[0].1;
    let got: Vec<(usize, usize, BigRational, EdgeKind)> =
        g.edges.iter().map(|e| (e.src, e.dst, e.weight.clone(), e.kind)).collect();
    let q = ratio(1, 4);
    assert_eq!(
        got,
        vec![
            (0, 2, q.clone(), EdgeKind::ControlFlow),
            (1, 0, q.clone(), EdgeKind::DataFlow),
            (1, 2, q.clone(), EdgeKind::DataFlow),
            (2, 0, q, EdgeKind::ControlFlow),
        ]
    );
    assert_eq!(g.preference, vec![1, 0, 2]);
    check_graph(g).unwrap();
}

#[test]
fn running_example_attributes() {
    let p = corpus_program("running-example");
    let a = analyze_program(&p).unwrap();
    let blog = a.attrs.for_fn("emphKeyword", "Blog");
    assert!(blog[2].contains(FieldAttr::SelfRecursive) && blog[2].is_inlineable());
    assert!(blog[0].contains(FieldAttr::Recursive) && !blog[0].is_inlineable());
    assert!(!blog[1].is_inlineable());
    let ccons = a.attrs.for_fn("emphContent", "CCons");
    assert!(ccons[0].contains(FieldAttr::Scalar));
    assert!(ccons[1].is_inlineable());
}

#[test]
fn merged_graph_scales_and_keeps_data_flow() {
    let p = corpus_program("blog-pipeline");
    let a = analyze_program(&p).unwrap();
    let gs: Vec<FieldAccessGraph> = a.graphs["Blog"].iter().map(|(_, g)| g.clone()).collect();
    assert!(gs.len() >= 2);
    let m = merge_graphs(&gs).unwrap();
    check_graph(&m).unwrap();
    let k = ratio(1, gs.len() as i64);
    for e in &m.edges {
        let parts: Vec<_> = gs.iter().filter_map(|g| g.edge(e.src, e.dst)).collect();
        let sum = parts.iter().fold(BigRational::zero(), |acc, x| acc + &x.weight);
        assert_eq!(e.weight, sum * &k);
        let df = parts.iter().any(|x| x.kind == EdgeKind::DataFlow);
        assert_eq!(e.kind == EdgeKind::DataFlow, df);
    }
}

#[test]
fn dot_output_colours_edges_by_kind() {
    let p = corpus_program("running-example");
    let a = analyze_program(&p).unwrap();
    let dot = a.graphs["Blog"][0].1.emit_dot(&[]);
    assert_eq!(dot.matches("color=red").count(), 2);
    assert_eq!(dot.matches("color=blue").count(), 2);
    assert!(dot.contains("label=\"0.250\""));
}

#[test]
fn graph_json_round_trips() {
    let p = corpus_program("running-example");
    let a = analyze_program(&p).unwrap();
    let g = &a.graphs["Blog"][0].1;
    let back = FieldAccessGraph::from_json(&g.to_json().unwrap()).unwrap();
    assert_eq!(&back, g);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn generated_programs_satisfy_graph_invariants(seed in any::<u64>()) {
        let p = random_program(&mut rng(seed), ProgramShape { max_datas: 2, max_ctors: 3, max_fields: 4 });
        let a = analyze_program(&p).unwrap();
        for g in &a.cfgs {
            check_conservation(g).map_err(TestCaseError::fail)?;
        }
        for gs in a.graphs.values() {
            for (_, g) in gs {
                check_graph(g).map_err(TestCaseError::fail)?;
            }
            let all: Vec<FieldAccessGraph> = gs.iter().map(|(_, g)| g.clone()).collect();
            check_graph(&merge_graphs(&all).unwrap()).map_err(TestCaseError::fail)?;
        }
    }
}
