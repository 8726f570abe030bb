use packlay_core::bench::corpus_program;
use packlay_core::gen::{random_args, random_program, random_value, rng, ProgramShape};
use packlay_core::lang::{load, Program, Type};
use packlay_core::rewrite::{permute_value, reorder_datatype};
use packlay_core::runtime::{
    decode_buffer_file, deserialize, encode_buffer_file, interp_boxed, interp_boxed_with, run_packed, serialize,
    EvalError, Limits, LayoutDescriptor, OffsetMode, TraversalMetrics, Value,
};
use packlay_core::solver::LayoutAssignment;
use proptest::prelude::*;

const INT_LIST: &str = "data List = Nil | Cons Int List\n\
                        sum : (List) -> Int\nsum l = case l of\n  Nil -> 0\n  Cons x r -> add x (sum r)\n";

fn con(p: &Program, name: &str, fields: Vec<Value>) -> Value {
    Value::con(p.find_ctor(name).unwrap().0, fields)
}

fn bytes_of(p: &Program, v: &Value, mode: OffsetMode) -> Vec<u8> {
    let desc = LayoutDescriptor::from_program(p, mode);
    let buf = serialize(v, desc.data_index("List").unwrap(), &desc).unwrap();
    buf.bytes[buf.root..].to_vec()
}

fn str_list(p: &Program, n: usize, payload: &str) -> Value {
    let mut v = con(p, "Nil", vec![]);
    for _ in 0..n {
        v = con(p, "Cons", vec![Value::Str(payload.into()), v]);
    }
    v
}

#[test]
fn dense_bytes_follow_declared_field_order() {
    let p = load(INT_LIST).unwrap();
    let v = con(&p, "Cons", vec![Value::Int(7), con(&p, "Nil", vec![])]);
    // Cons tag, the Int, the Nil tag.
    assert_eq!(bytes_of(&p, &v, OffsetMode::None), vec![1u8, 7, 0, 0, 0, 0, 0, 0, 0, 0]);

    let flipped = reorder_datatype(&p, &LayoutAssignment { dcon: "Cons".into(), order: vec![1, 0] }).unwrap();
    let fv = permute_value(&p, &v, &[LayoutAssignment { dcon: "Cons".into(), order: vec![1, 0] }]);
    assert_eq!(bytes_of(&flipped, &fv, OffsetMode::None), vec![1u8, 0, 7, 0, 0, 0, 0, 0, 0, 0]);
}

#[test]
fn offset_tables_precede_fields() {
    let p = load(INT_LIST).unwrap();
    let v = con(&p, "Cons", vec![Value::Int(7), con(&p, "Nil", vec![])]);
    // Tag, one offset (8: the Int), the Int, the Nil tag.
    let want = [vec![1u8], vec![8, 0, 0, 0, 0, 0, 0, 0], vec![7, 0, 0, 0, 0, 0, 0, 0], vec![0]].concat();
    assert_eq!(bytes_of(&p, &v, OffsetMode::ShortcutOffsets), want);
}

#[test]
fn strings_are_length_prefixed() {
    let p = corpus_program("list-length");
    let v = str_list(&p, 1, "ab");
    let desc = LayoutDescriptor::from_program(&p, OffsetMode::None);
    let buf = serialize(&v, desc.data_index("List").unwrap(), &desc).unwrap();
    assert_eq!(&buf.bytes[buf.root..], &[1u8, 2, 0, 0, 0, b'a', b'b', 0]);
}

#[test]
fn buffer_files_round_trip() {
    let p = corpus_program("list-length");
    let v = str_list(&p, 3, "xyz");
    for mode in [OffsetMode::None, OffsetMode::ShortcutOffsets] {
        let desc = LayoutDescriptor::from_program(&p, mode);
        let d = desc.data_index("List").unwrap();
        let buf = serialize(&v, d, &desc).unwrap();
        let back = decode_buffer_file(&encode_buffer_file(&buf), d).unwrap();
        assert_eq!(back, buf);
        assert_eq!(deserialize(&back, &desc).unwrap(), v);
    }
    assert!(decode_buffer_file(b"nope", 0).is_err());
}

#[test]
fn list_length_metrics_by_layout() {
    // Walking the list reads every tag and must step over each unread
    // 5-byte string; with the tail first nothing is skipped.
    let p = corpus_program("list-length");
    let n = 200;
    let v = str_list(&p, n, "x");
    let (res, m) = run_packed(&p, "length", std::slice::from_ref(&v), OffsetMode::None, Limits::default()).unwrap();
    assert_eq!(res, Value::Int(n as i64));
    assert_eq!(m.tags_read, n as u64 + 1);
    assert_eq!(m.skip_bytes, 5 * n as u64);
    assert_eq!(m.skip_events, n as u64);
    assert_eq!(m.backtrack_bytes, 0);
    assert_eq!(m.composite(64), 5 * n as u64);

    let (_, m) = run_packed(&p, "length", std::slice::from_ref(&v), OffsetMode::ShortcutOffsets, Limits::default()).unwrap();
    assert_eq!(m.skip_bytes, 0);
    assert_eq!(m.offset_derefs, n as u64);

    let a = LayoutAssignment { dcon: "Cons".into(), order: vec![1, 0] };
    let flipped = reorder_datatype(&p, &a).unwrap();
    let fv = permute_value(&p, &v, &[a]);
    for mode in [OffsetMode::None, OffsetMode::ShortcutOffsets] {
        let (res, m) = run_packed(&flipped, "length", std::slice::from_ref(&fv), mode, Limits::default()).unwrap();
        assert_eq!(res, Value::Int(n as i64));
        assert_eq!((m.skip_bytes, m.backtrack_bytes, m.offset_derefs), (0, 0, 0));
    }
}

#[test]
fn composite_weighs_derefs() {
    let m = TraversalMetrics { skip_bytes: 3, backtrack_bytes: 4, offset_derefs: 2, ..Default::default() };
    assert_eq!(m.composite(64), 3 + 4 + 128);
}

#[test]
fn step_limit_is_enforced() {
    let src = "data U = U0 | U1 Int\nloop : (Int) -> Int\nloop x = loop x\n";
    let p = load(src).unwrap();
    let limits = Limits { max_depth: 1_000_000, max_steps: 1000 };
    assert!(matches!(
        interp_boxed_with(&p, "loop", &[Value::Int(1)], limits),
        Err(EvalError::StepsExceeded(_) | EvalError::DepthExceeded(_))
    ));
}

#[test]
fn deep_lists_do_not_overflow_the_stack() {
    let p = corpus_program("list-length");
    let v = str_list(&p, 200_000, "");
    assert_eq!(interp_boxed(&p, "length", std::slice::from_ref(&v)).unwrap(), Value::Int(200_000));
    let (res, _) = run_packed(&p, "length", &[v], OffsetMode::None, Limits::default()).unwrap();
    assert_eq!(res, Value::Int(200_000));
}

/// Packed and boxed evaluation of every function of a random program on
/// random inputs, under a random relayout, in both offset modes.
fn agree_on(seed: u64) -> Result<usize, String> {
    let mut r = rng(seed);
    let p = random_program(&mut r, ProgramShape::default());
    let layouts: Vec<LayoutAssignment> = p
        .ctor_refs()
        .filter(|(_, c)| c.fields.len() >= 2)
        .map(|(_, c)| LayoutAssignment {
            dcon: c.name.to_string(),
            order: packlay_core::gen::random_permutation(&mut r, c.fields.len()),
        })
        .collect();
    let mut q = p.clone();
    for a in &layouts {
        q = reorder_datatype(&q, a).map_err(|e| e.to_string())?;
    }
    let limits = Limits { max_depth: 10_000, max_steps: 1_000_000 };
    let mut checked = 0;
    for f in &p.funs {
        let args: Vec<Value> = random_args(&p, f, &mut r, 5).iter().map(|a| permute_value(&p, a, &layouts)).collect();
        let Ok(want) = interp_boxed_with(&q, &f.name, &args, limits) else { continue };
        for mode in [OffsetMode::None, OffsetMode::ShortcutOffsets] {
            let (got, _) = run_packed(&q, &f.name, &args, mode, limits).map_err(|e| e.to_string())?;
            if got != want {
                return Err(format!("{} ({mode:?}): {} vs {}", f.name, got.display(&q), want.display(&q)));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn packed_agrees_with_boxed(seed in any::<u64>()) {
        agree_on(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn serialize_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&mut r, ProgramShape::default());
        for d in &p.datas {
            let v = random_value(&p, &Type::Data(d.name.clone()), &mut r, 4);
            for mode in [OffsetMode::None, OffsetMode::ShortcutOffsets] {
                let desc = LayoutDescriptor::from_program(&p, mode);
                let buf = serialize(&v, desc.data_index(&d.name).unwrap(), &desc).unwrap();
                prop_assert_eq!(deserialize(&buf, &desc).unwrap(), v.clone());
            }
        }
    }
}
