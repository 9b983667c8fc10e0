//! Example circuits with plain reference semantics.

use rand::Rng;

use crate::builder::{Env, InputKind, Program, Repr};
use crate::circuit::{Circuit, GateInstance, LookupTable, WireId};
use crate::field::{FieldElement, FieldSpec};

use std::sync::Arc;

/// Round constants of the registered Poseidon-style round.
pub const POSEIDON_RC: [u64; 3] = [1, 2, 3];

/// Mixing matrix rows of the Poseidon-style round.
pub const POSEIDON_MDS: [[u64; 3]; 3] = [[2, 1, 1], [1, 2, 1], [1, 1, 2]];

pub fn chained_add(env: &mut Env, i1: &Repr, i2: &Repr, i3: &Repr) -> Repr {
    let m = env.mul(i1, i2);
    env.add(&m, i3)
}

pub fn xor_gadget(env: &mut Env, a: &Repr, b: &Repr) -> Repr {
    env.xor(a, b).expect("xor on bool inputs")
}

pub fn toy_poseidon_round(env: &mut Env, state: &[Repr; 3], rc: [FieldElement; 3]) -> [Repr; 3] {
    let one = env.field().one();
    let sboxed: Vec<Repr> = state
        .iter()
        .zip(rc)
        .map(|(x, c)| {
            let t = env.affine(x, one, c);
            let t2 = env.mul(&t, &t);
            let t4 = env.mul(&t2, &t2);
            env.mul(&t4, &t)
        })
        .collect();
    POSEIDON_MDS.map(|row| {
        let coeffs = row.map(|c| env.field().elem(c));
        env.reduce_terms(&coeffs, &sboxed).expect("three terms")
    })
}

/// Sums four u32 words, splits the sum at 36 bits, and rebuilds the low
/// 32 bits as a checked u32.
pub fn sha_expansion_step(env: &mut Env, words: &[Repr; 4]) -> Repr {
    let f = env.field();
    let sum = env.reduce_terms(&[f.one(); 4], words).expect("four terms");
    let (_low, chunks) = env.range_check_n(&sum, 36).expect("36 bits");
    env.u32_from_nibbles(&chunks[..8]).expect("eight nibbles")
}

/// The message-expansion loop: word `t + 16` is the step over words
/// `t, t + 1, t + 9, t + 14`.
pub fn sha_expansion(field: FieldSpec, steps: usize) -> Program {
    let mut env = Env::new(field);
    let mut words: Vec<Repr> = (0..16)
        .map(|_| env.input(InputKind::U32).expect("u4 registered"))
        .collect();
    let mut outs = Vec::new();
    for t in 0..steps {
        let args = [
            words[t].clone(),
            words[t + 1].clone(),
            words[t + 9].clone(),
            words[t + 14].clone(),
        ];
        let w = sha_expansion_step(&mut env, &args);
        words.push(w.clone());
        outs.push(w);
    }
    env.finish(&outs)
}

/// Reference semantics of [`sha_expansion`].
pub fn sha_expansion_ref(inputs: &[FieldElement], steps: usize) -> Option<Vec<FieldElement>> {
    let mut words = inputs.to_vec();
    let mut outs = Vec::new();
    for t in 0..steps {
        let w = sha_step_ref(&[words[t], words[t + 1], words[t + 9], words[t + 14]])?[0];
        words.push(w);
        outs.push(w);
    }
    Some(outs)
}

/// A 36-bit split that range checks only the high nibble, leaving the low
/// chunks to be "checked later" when nothing does.
pub fn unchecked_split_replica(field: FieldSpec) -> Program {
    let u4 = Arc::new(LookupTable::u4());
    let x = WireId(0);
    let chunks: Vec<WireId> = (1..=9).map(WireId).collect();
    let gates = vec![
        GateInstance::decompose(x, chunks.clone(), 4).expect("valid split"),
        GateInstance::lookup(u4, vec![chunks[8]]).expect("u4 arity"),
    ];
    Program {
        field,
        preamble: Circuit::Nil,
        body: Circuit::from_gates(gates),
        inputs: vec![x],
        input_kinds: vec![InputKind::Field],
        outputs: chunks,
        bool_wires: Default::default(),
        next_wire: 10,
    }
}

/// A field input asserted boolean twice in the body, then doubled. Valid
/// only on 0 and 1.
pub fn double_bool_check(field: FieldSpec) -> Program {
    let mut env = Env::new(field);
    let x = env.input_field();
    env.assert_bool(&x);
    env.assert_bool(&x);
    let o = env.add(&x, &x);
    env.finish(&[o])
}

fn build_chained_add(field: FieldSpec) -> Program {
    let mut env = Env::new(field);
    let [a, b, c] = [(); 3].map(|_| env.input_field());
    let o = chained_add(&mut env, &a, &b, &c);
    env.finish(&[o])
}

fn ref_chained_add(x: &[FieldElement]) -> Option<Vec<FieldElement>> {
    Some(vec![x[0] * x[1] + x[2]])
}

fn build_xor(field: FieldSpec) -> Program {
    let mut env = Env::new(field);
    let a = env.input_bool();
    let b = env.input_bool();
    let o = xor_gadget(&mut env, &a, &b);
    env.finish(&[o])
}

fn is_bool(v: FieldElement) -> bool {
    v.is_zero() || v.is_one()
}

fn ref_xor(x: &[FieldElement]) -> Option<Vec<FieldElement>> {
    if !(is_bool(x[0]) && is_bool(x[1])) {
        return None;
    }
    let f = x[0].spec();
    Some(vec![f.elem(x[0].value() ^ x[1].value())])
}

fn build_is_zero(field: FieldSpec) -> Program {
    let mut env = Env::new(field);
    let i = env.input_field();
    let o = env.is_zero(&i);
    env.finish(&[o])
}

fn ref_is_zero(x: &[FieldElement]) -> Option<Vec<FieldElement>> {
    let f = x[0].spec();
    Some(vec![if x[0].is_zero() { f.one() } else { f.zero() }])
}

fn build_poseidon(field: FieldSpec) -> Program {
    let mut env = Env::new(field);
    let state = [(); 3].map(|_| env.input_field());
    let out = toy_poseidon_round(&mut env, &state, POSEIDON_RC.map(|c| field.elem(c)));
    env.finish(&out)
}

/// Reference semantics of [`toy_poseidon_round`].
pub fn poseidon_ref(state: &[FieldElement], rc: [FieldElement; 3]) -> Vec<FieldElement> {
    let s: Vec<FieldElement> = state.iter().zip(rc).map(|(&x, c)| (x + c).pow(5)).collect();
    let f = state[0].spec();
    POSEIDON_MDS
        .iter()
        .map(|row| row.iter().zip(&s).fold(f.zero(), |acc, (&m, &v)| acc + f.elem(m) * v))
        .collect()
}

fn ref_poseidon(x: &[FieldElement]) -> Option<Vec<FieldElement>> {
    let f = x[0].spec();
    Some(poseidon_ref(x, POSEIDON_RC.map(|c| f.elem(c))))
}

fn build_sha_step(field: FieldSpec) -> Program {
    let mut env = Env::new(field);
    let words = [(); 4].map(|_| env.input(InputKind::U32).expect("u4 registered"));
    let o = sha_expansion_step(&mut env, &words);
    env.finish(&[o])
}

fn sha_step_ref(x: &[FieldElement]) -> Option<Vec<FieldElement>> {
    if x.iter().any(|v| v.value() >> 32 != 0) {
        return None;
    }
    let f = x[0].spec();
    let sum = x.iter().fold(f.zero(), |acc, &v| acc + v).value();
    if sum >> 36 != 0 {
        return None;
    }
    Some(vec![f.elem(sum & 0xffff_ffff)])
}

/// A named corpus entry.
#[derive(Clone, Copy)]
pub struct Gadget {
    pub name: &'static str,
    pub summary: &'static str,
    pub build: fn(FieldSpec) -> Program,
    /// Outputs for the given inputs; `None` where generation must fail.
    pub reference: fn(&[FieldElement]) -> Option<Vec<FieldElement>>,
}

pub fn registry() -> Vec<Gadget> {
    vec![
        Gadget {
            name: "chained_add",
            summary: "i1*i2 + i3",
            build: build_chained_add,
            reference: ref_chained_add,
        },
        Gadget {
            name: "xor",
            summary: "a xor b on booleans",
            build: build_xor,
            reference: ref_xor,
        },
        Gadget {
            name: "is_zero_demo",
            summary: "1 if i = 0 else 0",
            build: build_is_zero,
            reference: ref_is_zero,
        },
        Gadget {
            name: "toy_poseidon_round",
            summary: "width-3 round: add constants, x^5, circulant mix",
            build: build_poseidon,
            reference: ref_poseidon,
        },
        Gadget {
            name: "sha_expansion_step",
            summary: "low 32 bits of a sum of four u32 words",
            build: build_sha_step,
            reference: sha_step_ref,
        },
    ]
}

pub fn find(name: &str) -> Option<Gadget> {
    registry().into_iter().find(|g| g.name == name)
}

/// A uniformly random valid value for an input of the given kind.
pub fn sample_input(kind: InputKind, field: FieldSpec, rng: &mut impl Rng) -> FieldElement {
    let below = |bound: u64, rng: &mut dyn rand::RngCore| field.elem(rng.gen_range(0..bound.min(field.modulus())));
    match kind {
        InputKind::Field => field.elem(rng.gen_range(0..field.modulus())),
        InputKind::Bool => below(2, rng),
        InputKind::U4 => below(16, rng),
        InputKind::U32 => below(1 << 32, rng),
    }
}

pub fn sample_inputs(p: &Program, rng: &mut impl Rng) -> Vec<FieldElement> {
    p.input_kinds.iter().map(|&k| sample_input(k, p.field, rng)).collect()
}

/// Replaces one coordinate by a uniform field element.
pub fn mutate_input(values: &mut [FieldElement], field: FieldSpec, rng: &mut impl Rng) {
    if values.is_empty() {
        return;
    }
    let i = rng.gen_range(0..values.len());
    values[i] = field.elem(rng.gen_range(0..field.modulus()));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{stats, validate, GateTag};

    fn f7() -> FieldSpec {
        FieldSpec::new(7).unwrap()
    }

    #[test]
    fn registry_builds_valid_circuits() {
        for field in [f7(), FieldSpec::goldilocks()] {
            for g in registry() {
                let p = (g.build)(field);
                assert!(validate(&p.circuit()).is_ok(), "{}", g.name);
            }
        }
    }

    #[test]
    fn chained_add_examples() {
        let g = FieldSpec::goldilocks();
        let p = build_chained_add(g);
        let t = p.run(&[g.elem(5), g.elem(7), g.elem(9)]).unwrap();
        assert_eq!(p.output_values(&t), vec![Some(g.elem(44))]);
        let f = f7();
        let p = build_chained_add(f);
        let t = p.run(&[f.elem(3), f.elem(5), f.elem(2)]).unwrap();
        assert_eq!(p.output_values(&t), vec![Some(f.elem(3))]);
        assert_eq!(stats(&p.circuit()), [(GateTag::Arith, 2)].into());
    }

    #[test]
    fn poseidon_examples() {
        let f = f7();
        let mut env = Env::new(f);
        let state = [(); 3].map(|_| env.input_field());
        let out = toy_poseidon_round(&mut env, &state, [f.zero(); 3]);
        let p = env.finish(&out);
        let t = p.run(&[f.one(), f.zero(), f.zero()]).unwrap();
        let got: Vec<u64> = p.output_values(&t).into_iter().map(|v| v.unwrap().value()).collect();
        assert_eq!(got, vec![2, 1, 1]);
        let t = p.run(&[f.zero(); 3]).unwrap();
        assert!(p.output_values(&t).iter().all(|v| v.unwrap().is_zero()));
    }

    #[test]
    fn sha_step_examples() {
        let g = FieldSpec::goldilocks();
        let p = build_sha_step(g);
        let t = p.run(&[1, 2, 3, 4].map(|v| g.elem(v))).unwrap();
        assert_eq!(p.output_values(&t), vec![Some(g.elem(10))]);
        let t = p.run(&[(1 << 32) - 1, 1, 0, 0].map(|v| g.elem(v))).unwrap();
        assert_eq!(p.output_values(&t), vec![Some(g.zero())]);
        assert!(p.run(&[1 << 32, 0, 0, 0].map(|v| g.elem(v))).is_err());
    }

    #[test]
    fn sha_loop_counts() {
        let p = sha_expansion(FieldSpec::goldilocks(), 16);
        let s = stats(&p.body);
        assert_eq!(s[&GateTag::Decompose], 16);
        assert_eq!(s[&GateTag::Lookup], 16 * 9 + 16 * 8);
        assert_eq!(s[&GateTag::LinComb], 32);
    }
}
