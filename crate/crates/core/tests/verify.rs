use std::collections::BTreeSet;

use plonkc::builder::Program;
use plonkc::constraints::{gen_cs_with, sat, CompileOptions, IsZeroEncoding};
use plonkc::field::FieldSpec;
use plonkc::gadgets::{self, double_bool_check};
use plonkc::optimizer::{flatten, Pass, Profile};
use plonkc::verify::*;
use plonkc::witness::Trace;

fn f(p: u64) -> FieldSpec {
    FieldSpec::new(p).unwrap()
}

fn build(name: &str, field: FieldSpec) -> Program {
    (gadgets::find(name).unwrap().build)(field)
}

fn literal_cs(p: &Program) -> plonkc::constraints::ConstraintSystem {
    gen_cs_with(
        &p.circuit(),
        CompileOptions {
            field: Some(p.field),
            is_zero: IsZeroEncoding::Literal,
        },
    )
}

#[test]
fn is_zero_enumeration_counts() {
    let f5 = f(5);
    let p = build("is_zero_demo", f5);
    let complete = enumerate_satisfying(&p.constraint_system(), 3, f5).unwrap();
    assert_eq!(complete.len(), 9);
    let literal = enumerate_satisfying(&literal_cs(&p), 3, f5).unwrap();
    assert_eq!(literal.len(), 13);
    for t in complete.iter().chain(&literal) {
        assert!(sat(&literal_cs(&p), t));
    }
}

#[test]
fn chained_add_has_one_trace_per_input() {
    let f5 = f(5);
    let p = build("chained_add", f5);
    let ts = enumerate_satisfying(&p.constraint_system(), 5, f5).unwrap();
    assert_eq!(ts.len(), 125);
    assert!(ts.windows(2).all(|w| w[0].slots() < w[1].slots()));
}

#[test]
fn soundness_over_f5() {
    for name in ["chained_add", "xor", "is_zero_demo"] {
        let r = check_soundness_bruteforce(&build(name, f(5)), name).unwrap();
        assert!(r.passed(), "{name}: {:?}", r.failures);
        assert!(r.cases > 0);
    }
}

#[test]
fn literal_is_zero_is_unsound() {
    let f5 = f(5);
    let p = build("is_zero_demo", f5);
    let r = check_soundness_with(&p, &literal_cs(&p), "is_zero_literal").unwrap();
    assert_eq!(r.cases, 13);
    assert_eq!(r.failures.len(), 4);
    assert!(r
        .failures
        .iter()
        .any(|x| x.input == ["2"] && x.actual.contains("[2 0 1]")));
}

#[test]
fn completeness_across_the_corpus() {
    for field in [f(7), FieldSpec::goldilocks()] {
        for g in gadgets::registry() {
            let r = check_completeness(&(g.build)(field), g.name, 300, 1);
            assert!(r.passed(), "{}: {:?}", g.name, r.failures);
            assert_eq!(r.skipped, 0, "{}", g.name);
        }
    }
}

#[test]
fn over_constrained_mutant_is_incomplete() {
    let field = FieldSpec::goldilocks();
    let p = build("chained_add", field);
    let mut cs = p.constraint_system();
    let extra = plonkc::constraints::gate_cv(
        &plonkc::circuit::GateInstance::bool_check(p.outputs[0]),
        field,
        IsZeroEncoding::Complete,
    )
    .unwrap();
    cs.push_cv(extra);
    let r = check_completeness_with(&p, &cs, "mutant", 100, 2);
    assert!(!r.failures.is_empty());
}

#[test]
fn every_pass_preserves_every_gadget() {
    let field = FieldSpec::goldilocks();
    for g in gadgets::registry() {
        let p = (g.build)(field);
        for pass in Pass::DEFAULT {
            for profile in [Profile::PlonkArith, Profile::boojum()] {
                let r = check_preservation(pass, &p, profile, g.name, 200, 3);
                assert!(r.passed(), "{} {}: {:?}", g.name, pass, r.failures);
            }
        }
        let r = check_pipeline_preservation(&p, Profile::boojum(), g.name, 200, 4).unwrap();
        assert!(r.passed(), "{}: {:?}", g.name, r.failures);
    }
}

#[test]
fn dedup_keeps_the_assertion_and_the_mutant_loses_it() {
    let f5 = f(5);
    let p = double_bool_check(f5);
    let dedup = apply_pass(Pass::DedupAssertions, &p, Profile::PlonkArith);
    assert!(p.run(&[f5.elem(2)]).is_err());
    assert!(dedup.run(&[f5.elem(2)]).is_err());
    let ok = check_preservation_exhaustive(Pass::DedupAssertions, &p, Profile::PlonkArith, "double").unwrap();
    assert!(ok.passed());
    let bad = check_preservation_exhaustive(Pass::DropBoolChecks, &p, Profile::PlonkArith, "double").unwrap();
    assert_eq!(bad.failures.len(), 3);
    assert!(bad.failures.iter().any(|x| x.input == ["2"]));
}

#[test]
fn linear_inline_rule_instance_exhaustive() {
    use plonkc::circuit::{Circuit, GateInstance, WireId};
    let f5 = f(5);
    let q = |xs: [i64; 5]| xs.map(|x| f5.from_i64(x));
    let c = Circuit::from_gates([
        GateInstance::arith(WireId(0), WireId(0), WireId(2), q([2, 0, -1, 0, 0])).unwrap(),
        GateInstance::arith(WireId(2), WireId(1), WireId(3), q([1, 1, -1, 1, 3])).unwrap(),
    ]);
    let p = Program::from_circuit(&c).unwrap();
    let r = check_preservation_exhaustive(Pass::LinearInline, &p, Profile::PlonkArith, "rule").unwrap();
    assert_eq!(r.cases, 25);
    assert!(r.passed());
}

fn io_set(traces: &[Trace], io: &[usize]) -> BTreeSet<Vec<u64>> {
    traces
        .iter()
        .map(|t| io.iter().map(|&i| t.slots()[i].unwrap().value()).collect())
        .collect()
}

#[test]
fn flattened_poseidon_matches_over_f7() {
    let f7 = f(7);
    let p = build("toy_poseidon_round", f7);
    let mut expected = BTreeSet::new();
    for x in all_inputs(f7, 3).unwrap() {
        let t = p.run(&x).unwrap();
        let mut row: Vec<u64> = x.iter().map(|v| v.value()).collect();
        row.extend(p.output_values(&t).into_iter().map(|v| v.unwrap().value()));
        expected.insert(row);
    }
    assert_eq!(expected.len(), 343);
    for bound in [8, 4] {
        let g = flatten(&p.circuit(), bound).unwrap();
        let w = g.width();
        let ts = enumerate_satisfying(&g.compact_system(), w, f7).unwrap();
        let io: Vec<usize> = (0..3).chain(w - 3..w).collect();
        assert_eq!(ts.len(), 343, "bound {bound}");
        assert_eq!(io_set(&ts, &io), expected, "bound {bound}");
    }
}

#[test]
fn goldilocks_smoke_finds_nothing_on_sound_gadgets() {
    let field = FieldSpec::goldilocks();
    for g in gadgets::registry() {
        let r = soundness_smoke(&(g.build)(field), g.name, 200, 5);
        assert!(r.passed(), "{}", g.name);
    }
}
