use packlay_core::bench::corpus_program;
use packlay_core::gen::{random_permutation, random_program, rng, ProgramShape};
use packlay_core::lang::{load, pretty, Expr, Program};
use packlay_core::pipeline::{optimize, Scope};
use packlay_core::rewrite::{
    apply_code_motion, apply_layouts, permute_value, reorder_datatype, unpermute_value, verify_rewrite, RewriteError,
};
use packlay_core::solver::{CostParams, LayoutAssignment, Mode};
use proptest::prelude::*;

fn random_layouts(p: &Program, r: &mut packlay_core::gen::Rng64) -> Vec<LayoutAssignment> {
    p.ctor_refs()
        .filter(|(_, c)| !c.fields.is_empty())
        .map(|(_, c)| LayoutAssignment { dcon: c.name.to_string(), order: random_permutation(r, c.fields.len()) })
        .collect()
}

fn inverse(a: &LayoutAssignment) -> LayoutAssignment {
    LayoutAssignment { dcon: a.dcon.clone(), order: a.pos() }
}

/// Names bound by the leading `let` chain of the first arm of `ctor` in `f`.
fn arm_chain(p: &Program, f: &str, ctor: &str) -> Vec<String> {
    fn find<'a>(e: &'a Expr, ctor: &str) -> Option<&'a Expr> {
        match e {
            Expr::Let(l) => find(&l.body, ctor),
            Expr::Case(c) => c.arms.iter().find_map(|a| if &*a.ctor == ctor { Some(&a.body) } else { find(&a.body, ctor) }),
            _ => None,
        }
    }
    let body = &p.find_fun(f).unwrap().body;
    let mut e = find(body, ctor).unwrap();
    let mut out = Vec::new();
    while let Expr::Let(l) = e {
        out.push(l.var.to_string());
        e = &l.body;
    }
    out
}

#[test]
fn inverse_layout_restores_the_program() {
    let p = corpus_program("blog-pipeline");
    let a = LayoutAssignment { dcon: "Blog".into(), order: vec![5, 6, 4, 0, 1, 2, 3] };
    let q = reorder_datatype(&p, &a).unwrap();
    assert_ne!(pretty(&q), pretty(&p));
    let back = reorder_datatype(&q, &inverse(&a)).unwrap();
    assert_eq!(pretty(&back), pretty(&p));
}

#[test]
fn identity_layout_is_a_no_op() {
    let p = corpus_program("running-example");
    let (q, plan) = apply_layouts(&p, &[LayoutAssignment::identity("Blog", 3)]).unwrap();
    assert_eq!(q, p);
    assert!(plan.moved.is_empty());
}

#[test]
fn bad_layouts_are_rejected() {
    let p = corpus_program("running-example");
    let bad = LayoutAssignment { dcon: "Blog".into(), order: vec![0, 0, 1] };
    assert!(matches!(reorder_datatype(&p, &bad), Err(RewriteError::BadPermutation { .. })));
    let short = LayoutAssignment { dcon: "Blog".into(), order: vec![1, 0] };
    assert!(matches!(reorder_datatype(&p, &short), Err(RewriteError::BadPermutation { .. })));
    let unknown = LayoutAssignment { dcon: "Nope".into(), order: vec![] };
    assert!(matches!(reorder_datatype(&p, &unknown), Err(RewriteError::UnknownCtor(_))));
}

#[test]
fn values_translate_both_ways() {
    let p = corpus_program("running-example");
    let layouts = vec![LayoutAssignment { dcon: "Blog".into(), order: vec![1, 2, 0] }];
    let f = p.find_fun("emphKeyword").unwrap();
    let mut r = rng(3);
    for _ in 0..20 {
        let args = packlay_core::gen::random_args(&p, f, &mut r, 4);
        for a in &args {
            assert_eq!(&unpermute_value(&p, &permute_value(&p, a, &layouts), &layouts), a);
        }
    }
}

#[test]
fn running_example_moves_the_recursive_call_forward() {
    let p = corpus_program("running-example");
    let o = optimize(&p, Mode::Solver, &Scope::Global, &CostParams::default()).unwrap();
    let decl = pretty(&o.program);
    assert!(decl.contains("Blog HashTags BlogList Content"), "{decl}");
    let m = o.plan.moved.iter().find(|m| m.func == "emphKeyword").unwrap();
    assert_eq!(m.old, vec!["content'", "blogs''", "tmp2"]);
    assert_eq!(m.new, vec!["blogs''", "content'", "tmp2"]);
    let layouts: Vec<LayoutAssignment> = o.solutions.iter().map(|s| s.layout.clone()).collect();
    assert!(verify_rewrite(&p, &o.program, &layouts, 50, &mut rng(1)).passed());
}

#[test]
fn foo_becomes_tail_first_with_recursion_hoisted() {
    let p = corpus_program("foo");
    let o = optimize(&p, Mode::Solver, &Scope::Global, &CostParams::default()).unwrap();
    let cons = o.program.find_ctor("Cons").unwrap().1;
    assert_eq!(cons.fields.iter().map(|t| t.to_string()).collect::<Vec<_>>(), vec!["List", "Int"]);
    assert_eq!(arm_chain(&o.program, "foo", "Cons"), vec!["rst'", "x'", "tmp1"]);
    assert_eq!(arm_chain(&p, "foo", "Cons"), vec!["x'", "rst'", "tmp1"]);
}

#[test]
fn dependent_bindings_stay_put() {
    let src = "data L = N | C Int L\n\
               f : (L) -> Int\nf l = case l of\n  N -> 0\n  C x r ->\n    let y = add x 1 in\n    let z = g r y in\n    z\n\
               g : (L, Int) -> Int\ng l k = case l of\n  N -> k\n  C x r -> g r (add x k)\n";
    let p = load(src).unwrap();
    let q = reorder_datatype(&p, &LayoutAssignment { dcon: "C".into(), order: vec![1, 0] }).unwrap();
    let (moved, motions) = apply_code_motion(&q, &["C"]);
    assert!(motions.iter().all(|m| m.func != "f"), "{motions:?}");
    assert_eq!(arm_chain(&moved, "f", "C"), vec!["y", "z"]);
}

#[test]
fn corrupted_rewrite_is_detected() {
    let src = "data P = Q Int Int\nf : (P) -> Int\nf p = case p of\n  Q a b -> sub a b\n";
    let p = load(src).unwrap();
    let a = LayoutAssignment { dcon: "Q".into(), order: vec![1, 0] };
    let q = reorder_datatype(&p, &a).unwrap();
    assert!(verify_rewrite(&p, &q, &[a], 20, &mut rng(5)).passed());
    // Claiming the identity translation for a swapped declaration.
    let r = verify_rewrite(&p, &q, &[], 20, &mut rng(5));
    assert!(!r.passed());
    assert_eq!(r.divergence.unwrap().func, "f");
}

#[test]
fn annotations_follow_their_fields() {
    let src = "data T = L | N Int Bool T\n{-# ANN N 2 AFTER 0 #-}\n\
               f : (T) -> Int\nf t = case t of\n  L -> 0\n  N x b r -> x\n";
    let p = load(src).unwrap();
    let q = reorder_datatype(&p, &LayoutAssignment { dcon: "N".into(), order: vec![2, 0, 1] }).unwrap();
    let cs = packlay_core::solver::constraints_from_annotations(&q);
    assert_eq!(
        cs["N"],
        vec![packlay_core::solver::Constraint::Relative { after: 0, before: 1, adjacent: false }]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_rewrites_preserve_meaning(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&mut r, ProgramShape::default());
        let layouts = random_layouts(&p, &mut r);
        let (q, _) = apply_layouts(&p, &layouts).unwrap();
        let report = verify_rewrite(&p, &q, &layouts, 20, &mut r);
        prop_assert!(report.passed(), "{:?}\n{}", report.divergence, pretty(&q));
    }

    #[test]
    fn layout_then_inverse_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&mut r, ProgramShape::default());
        let mut q = p.clone();
        let layouts = random_layouts(&p, &mut r);
        for a in &layouts {
            q = reorder_datatype(&q, a).unwrap();
        }
        for a in &layouts {
            q = reorder_datatype(&q, &inverse(a)).unwrap();
        }
        prop_assert_eq!(pretty(&q), pretty(&p));
    }
}
