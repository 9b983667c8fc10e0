use std::collections::BTreeMap;

use plonkc::circuit::{stats, validate, GateTag};
use plonkc::constraints::{gen_cs, sat};
use plonkc::field::FieldSpec;
use plonkc::gadgets::{self, sha_expansion, sha_expansion_ref, unchecked_split_replica};
use plonkc::optimizer::{check_discipline, flatten, optimize_program, DisciplineViolation, OptError, Profile};
use plonkc::witness::gen_trace;

fn counts(pairs: &[(GateTag, usize)]) -> BTreeMap<GateTag, usize> {
    pairs.iter().copied().collect()
}

fn total(s: &BTreeMap<GateTag, usize>) -> usize {
    s.values().sum()
}

#[test]
fn xor_lowers_to_two_fma_and_a_constant() {
    let f = FieldSpec::goldilocks();
    let p = (gadgets::find("xor").unwrap().build)(f);
    assert_eq!(stats(&p.body), counts(&[(GateTag::Arith, 6), (GateTag::BoolCheck, 5)]));
    let (opt, _) = optimize_program(&p, Profile::boojum(), None).unwrap();
    assert_eq!(stats(&opt.body), counts(&[(GateTag::Fma, 2), (GateTag::Constant, 1)]));
    for a in 0..2 {
        for b in 0..2 {
            let (a, b) = (f.elem(a), f.elem(b));
            let t = opt.run(&[a, b]).unwrap();
            let expected = a + b - f.elem(2) * a * b;
            assert_eq!(opt.output_values(&t), vec![Some(expected)]);
            assert!(sat(&gen_cs(&opt.circuit()), &t));
        }
    }
    assert!(opt.run(&[f.elem(2), f.zero()]).is_err());
}

#[test]
fn optimize_is_idempotent_on_the_corpus() {
    let f = FieldSpec::goldilocks();
    for profile in [Profile::PlonkArith, Profile::boojum()] {
        for g in gadgets::registry() {
            let p = (g.build)(f);
            let (once, _) = optimize_program(&p, profile, None).unwrap();
            let (twice, _) = optimize_program(&once, profile, None).unwrap();
            assert_eq!(stats(&once.body), stats(&twice.body), "{} {}", g.name, profile.name());
            assert!(validate(&once.circuit()).is_ok());
        }
    }
}

#[test]
fn poseidon_round_strictly_shrinks() {
    let f = FieldSpec::goldilocks();
    let p = (gadgets::find("toy_poseidon_round").unwrap().build)(f);
    for profile in [Profile::PlonkArith, Profile::boojum()] {
        let (opt, _) = optimize_program(&p, profile, None).unwrap();
        assert!(total(&stats(&opt.body)) < total(&stats(&p.body)), "{}", profile.name());
    }
}

#[test]
fn sha_loop_drops_duplicate_lookups() {
    let f = FieldSpec::goldilocks();
    let p = sha_expansion(f, 16);
    let before = stats(&p.body);
    assert_eq!(before[&GateTag::Decompose], 16);
    assert_eq!(before[&GateTag::Lookup], 272);
    let (opt, reports) = optimize_program(&p, Profile::boojum(), None).unwrap();
    let after = stats(&opt.body);
    assert_eq!(after[&GateTag::Lookup], 144);
    assert!(total(&after) < total(&before));
    assert!(reports
        .iter()
        .any(|r| r.pass == "dedup_assertions" && r.applications > 0));
    let (again, _) = optimize_program(&opt, Profile::boojum(), None).unwrap();
    assert_eq!(total(&stats(&again.body)), total(&after));
    assert!(check_discipline(&opt.circuit(), &opt.bool_wires).is_empty());

    let inputs: Vec<_> = (0..16u64)
        .map(|i| f.elem(0x9e37_79b9u64.wrapping_mul(i + 1) & 0xffff_ffff))
        .collect();
    let t = opt.run(&inputs).unwrap();
    let outs: Vec<_> = opt.output_values(&t).into_iter().map(Option::unwrap).collect();
    assert_eq!(outs, sha_expansion_ref(&inputs, 16).unwrap());
    assert!(sat(&gen_cs(&opt.circuit()), &t));
}

#[test]
fn unchecked_chunks_fail_the_discipline_check() {
    let p = unchecked_split_replica(FieldSpec::goldilocks());
    let v = check_discipline(&p.circuit(), &p.bool_wires);
    assert_eq!(v.len(), 8);
    assert!(v
        .iter()
        .all(|d| matches!(d, DisciplineViolation::UncheckedChunk { .. })));
    assert!(matches!(
        optimize_program(&p, Profile::PlonkArith, None),
        Err(OptError::Discipline(_))
    ));
}

#[test]
fn poseidon_flattens_to_one_gate() {
    let f = FieldSpec::goldilocks();
    let p = (gadgets::find("toy_poseidon_round").unwrap().build)(f);
    let g8 = flatten(&p.circuit(), 8).unwrap();
    assert_eq!(g8.max_degree, 5);
    assert_eq!(g8.width(), 6);
    assert_eq!(g8.identities.len(), 3);
    let g4 = flatten(&p.circuit(), 4).unwrap();
    assert!(g4.identities.iter().all(|id| id.degree() <= 4));
    assert!(g4.width() > g8.width());

    let input = [f.elem(3), f.elem(5), f.elem(8)];
    let t = p.run(&input).unwrap();
    assert!(sat(&g8.constraint_system(), &t));
    assert!(sat(&g4.constraint_system(), &t));
}

#[test]
fn chained_add_flattens_to_one_quadratic_identity() {
    let f = FieldSpec::goldilocks();
    let p = (gadgets::find("chained_add").unwrap().build)(f);
    let g = flatten(&p.circuit(), 8).unwrap();
    assert_eq!((g.width(), g.identities.len(), g.max_degree), (4, 1, 2));
}

#[test]
fn flatten_rejects_lookups_and_small_bounds() {
    let f = FieldSpec::goldilocks();
    let sha = (gadgets::find("sha_expansion_step").unwrap().build)(f);
    assert!(matches!(flatten(&sha.circuit(), 8), Err(OptError::LookupInFlatten(_))));
    let ca = (gadgets::find("chained_add").unwrap().build)(f);
    assert!(matches!(flatten(&ca.circuit(), 1), Err(OptError::BoundTooSmall(_))));
}

#[test]
fn optimized_corpus_matches_references() {
    use plonkc::gadgets::sample_inputs;
    use rand::SeedableRng;
    let f = FieldSpec::goldilocks();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for g in gadgets::registry() {
        let p = (g.build)(f);
        let (opt, _) = optimize_program(&p, Profile::boojum(), None).unwrap();
        for _ in 0..50 {
            let x = sample_inputs(&p, &mut rng);
            let t = gen_trace(&opt.circuit(), &opt.input_trace(&x));
            let got = t.ok().map(|t| {
                opt.output_values(&t)
                    .into_iter()
                    .map(Option::unwrap)
                    .collect::<Vec<_>>()
            });
            assert_eq!(got, (g.reference)(&x), "{}", g.name);
        }
    }
}
