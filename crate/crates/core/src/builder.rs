//! The embedded builder: allocates wires, emits gates, tracks value types.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::circuit::{signature, Circuit, CircuitError, CircuitSignature, GateInstance, LookupTable, WireId};
use crate::constraints::{gen_cs_with, CompileOptions, ConstraintSystem};
use crate::field::{FieldElement, FieldSpec};
use crate::witness::{gen_trace, Trace, TraceResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("wire {0} is not a boolean")]
    NotBool(WireId),
    #[error("{coeffs} coefficients for {terms} terms")]
    LengthMismatch { coeffs: usize, terms: usize },
    #[error("reduce_terms needs at least one term")]
    NoTerms,
    #[error("no table named {0:?}")]
    MissingTable(String),
    #[error("cannot range check {0} bits: need a multiple of 4 up to 64")]
    BadBits(u32),
    #[error("a u32 needs 8 nibbles, got {0}")]
    NibbleCount(usize),
}

/// What the builder knows about a wire's value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tag {
    SValue,
    Bool,
    U4,
    /// Little-endian nibbles, each range checked.
    U32 {
        limbs: Vec<WireId>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repr {
    pub wire: WireId,
    pub tag: Tag,
}

impl Repr {
    fn new(wire: WireId, tag: Tag) -> Self {
        Self { wire, tag }
    }

    pub fn is_bool(&self) -> bool {
        self.tag == Tag::Bool
    }
}

/// The type of a program input; decides its preamble checks and samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Field,
    Bool,
    U4,
    U32,
}

/// A built circuit split into input checks and the body proper.
///
/// The preamble range checks the inputs; optimizations run on the body and
/// may assume what the preamble checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub field: FieldSpec,
    pub preamble: Circuit,
    pub body: Circuit,
    pub inputs: Vec<WireId>,
    pub input_kinds: Vec<InputKind>,
    pub outputs: Vec<WireId>,
    /// Every wire the builder tagged boolean.
    pub bool_wires: BTreeSet<WireId>,
    /// First wire index free for passes that need fresh wires.
    pub next_wire: usize,
}

impl Program {
    /// Wraps a bare circuit: field inputs, no preamble, default signature.
    pub fn from_circuit(c: &Circuit) -> Result<Program, CircuitError> {
        let sig = signature(c, None)?;
        Ok(Program {
            field: c.field().unwrap_or_default(),
            preamble: Circuit::Nil,
            body: c.clone(),
            input_kinds: vec![InputKind::Field; sig.inputs.len()],
            inputs: sig.inputs,
            outputs: sig.outputs,
            bool_wires: BTreeSet::new(),
            next_wire: c.width(),
        })
    }

    pub fn circuit(&self) -> Circuit {
        Circuit::seq_all(vec![self.preamble.clone(), self.body.clone()])
    }

    /// The compiled circuit, over this program's field.
    pub fn constraint_system(&self) -> ConstraintSystem {
        gen_cs_with(
            &self.circuit(),
            CompileOptions {
                field: Some(self.field),
                ..Default::default()
            },
        )
    }

    pub fn signature(&self) -> CircuitSignature {
        CircuitSignature {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
        }
    }

    /// Boolean inputs, which the preamble checks.
    pub fn assumed_bool(&self) -> BTreeSet<WireId> {
        self.inputs
            .iter()
            .zip(&self.input_kinds)
            .filter(|(_, k)| **k == InputKind::Bool)
            .map(|(&w, _)| w)
            .collect()
    }

    pub fn input_trace(&self, values: &[FieldElement]) -> Trace {
        let mut t = Trace::new(self.field);
        for (&w, &v) in self.inputs.iter().zip(values) {
            t.set(w, v);
        }
        t
    }

    pub fn run(&self, values: &[FieldElement]) -> TraceResult {
        gen_trace(&self.circuit(), &self.input_trace(values))
    }

    pub fn output_values(&self, t: &Trace) -> Vec<Option<FieldElement>> {
        self.outputs.iter().map(|&w| t.get(w)).collect()
    }

    pub fn with_body(&self, body: Circuit) -> Program {
        let next_wire = self.next_wire.max(body.width());
        Program {
            body,
            next_wire,
            ..self.clone()
        }
    }
}

/// Mutable build state. Gates accumulate in emission order.
pub struct Env {
    field: FieldSpec,
    next: usize,
    preamble: Vec<GateInstance>,
    gates: Vec<GateInstance>,
    tables: BTreeMap<String, Arc<LookupTable>>,
    pool: HashMap<FieldElement, WireId>,
    facts: BTreeSet<WireId>,
    inputs: Vec<(WireId, InputKind)>,
}

impl Env {
    /// A fresh environment with the `u4` table registered.
    pub fn new(field: FieldSpec) -> Self {
        let mut env = Self {
            field,
            next: 0,
            preamble: Vec::new(),
            gates: Vec::new(),
            tables: BTreeMap::new(),
            pool: HashMap::new(),
            facts: BTreeSet::new(),
            inputs: Vec::new(),
        };
        env.register_table(LookupTable::u4());
        env
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn register_table(&mut self, table: LookupTable) {
        self.tables.insert(table.name().to_string(), Arc::new(table));
    }

    pub fn table(&self, name: &str) -> Result<Arc<LookupTable>, BuildError> {
        self.tables
            .get(name)
            .cloned()
            .ok_or_else(|| BuildError::MissingTable(name.to_string()))
    }

    pub fn remove_table(&mut self, name: &str) {
        self.tables.remove(name);
    }

    pub fn gates(&self) -> &[GateInstance] {
        &self.gates
    }

    pub fn bool_facts(&self) -> &BTreeSet<WireId> {
        &self.facts
    }

    pub fn fresh(&mut self) -> WireId {
        let w = WireId(self.next);
        self.next += 1;
        w
    }

    pub fn emit(&mut self, g: GateInstance) {
        self.gates.push(g);
    }

    fn k(&self, v: i64) -> FieldElement {
        self.field.from_i64(v)
    }

    /// Allocates an input wire; non-field kinds get their checks in the
    /// preamble.
    pub fn input(&mut self, kind: InputKind) -> Result<Repr, BuildError> {
        let w = self.fresh();
        self.inputs.push((w, kind));
        match kind {
            InputKind::Field => Ok(Repr::new(w, Tag::SValue)),
            InputKind::Bool => {
                self.preamble.push(GateInstance::bool_check(w));
                self.facts.insert(w);
                Ok(Repr::new(w, Tag::Bool))
            }
            InputKind::U4 => {
                let u4 = self.table("u4")?;
                self.preamble.push(GateInstance::lookup(u4, vec![w]).expect("u4 arity"));
                Ok(Repr::new(w, Tag::U4))
            }
            InputKind::U32 => {
                let u4 = self.table("u4")?;
                let limbs: Vec<WireId> = (0..8).map(|_| self.fresh()).collect();
                self.preamble
                    .push(GateInstance::decompose(w, limbs.clone(), 4).expect("8 nibbles"));
                for &l in &limbs {
                    self.preamble
                        .push(GateInstance::lookup(u4.clone(), vec![l]).expect("u4 arity"));
                }
                Ok(Repr::new(w, Tag::U32 { limbs }))
            }
        }
    }

    pub fn input_field(&mut self) -> Repr {
        self.input(InputKind::Field).expect("field inputs need no table")
    }

    pub fn input_bool(&mut self) -> Repr {
        self.input(InputKind::Bool).expect("bool inputs need no table")
    }

    /// The pooled wire holding `v`, emitting its Constant gate on first use.
    pub fn constant(&mut self, v: FieldElement) -> Repr {
        if let Some(&w) = self.pool.get(&v) {
            return Repr::new(w, Tag::SValue);
        }
        let w = self.fresh();
        self.emit(GateInstance::constant(w, v));
        self.pool.insert(v, w);
        Repr::new(w, Tag::SValue)
    }

    /// `o = −(ql·l + qr·r + qm·l·r + qc)/qo` as one Arith gate.
    pub fn arith(&mut self, l: &Repr, r: &Repr, q: [FieldElement; 5]) -> Repr {
        let o = self.fresh();
        self.emit(GateInstance::arith(l.wire, r.wire, o, q).expect("qo is nonzero"));
        Repr::new(o, Tag::SValue)
    }

    pub fn add(&mut self, a: &Repr, b: &Repr) -> Repr {
        let q = [self.k(1), self.k(1), self.k(-1), self.k(0), self.k(0)];
        self.arith(a, b, q)
    }

    pub fn sub(&mut self, a: &Repr, b: &Repr) -> Repr {
        let q = [self.k(1), self.k(-1), self.k(-1), self.k(0), self.k(0)];
        self.arith(a, b, q)
    }

    pub fn mul(&mut self, a: &Repr, b: &Repr) -> Repr {
        let q = [self.k(0), self.k(0), self.k(-1), self.k(1), self.k(0)];
        self.arith(a, b, q)
    }

    /// `coeff·a + offset`, with `a` in both input slots.
    pub fn affine(&mut self, a: &Repr, coeff: FieldElement, offset: FieldElement) -> Repr {
        let q = [coeff, self.k(0), self.k(-1), self.k(0), offset];
        self.arith(a, a, q)
    }

    fn need_bool(a: &Repr) -> Result<(), BuildError> {
        if a.is_bool() {
            Ok(())
        } else {
            Err(BuildError::NotBool(a.wire))
        }
    }

    fn checked_bool(&mut self, r: Repr) -> Repr {
        self.emit(GateInstance::bool_check(r.wire));
        self.facts.insert(r.wire);
        Repr::new(r.wire, Tag::Bool)
    }

    pub fn not(&mut self, a: &Repr) -> Result<Repr, BuildError> {
        Self::need_bool(a)?;
        let (m1, one) = (self.k(-1), self.k(1));
        let r = self.affine(a, m1, one);
        Ok(self.checked_bool(r))
    }

    pub fn and(&mut self, a: &Repr, b: &Repr) -> Result<Repr, BuildError> {
        Self::need_bool(a)?;
        Self::need_bool(b)?;
        let r = self.mul(a, b);
        Ok(self.checked_bool(r))
    }

    /// `a + b − a·b`, as `u = a − a·b` then `u + b`.
    pub fn or(&mut self, a: &Repr, b: &Repr) -> Result<Repr, BuildError> {
        Self::need_bool(a)?;
        Self::need_bool(b)?;
        let q = [self.k(1), self.k(0), self.k(-1), self.k(-1), self.k(0)];
        let u = self.arith(a, b, q);
        let r = self.add(&u, b);
        Ok(self.checked_bool(r))
    }

    /// `(a ∧ ¬b) ∨ (¬a ∧ b)`.
    pub fn xor(&mut self, a: &Repr, b: &Repr) -> Result<Repr, BuildError> {
        let nb = self.not(b)?;
        let l = self.and(a, &nb)?;
        let na = self.not(a)?;
        let r = self.and(&na, b)?;
        self.or(&l, &r)
    }

    pub fn assert_bool(&mut self, a: &Repr) -> Repr {
        self.checked_bool(a.clone())
    }

    pub fn is_zero(&mut self, a: &Repr) -> Repr {
        let r = self.fresh();
        let o = self.fresh();
        self.emit(GateInstance::is_zero(a.wire, r, o));
        self.facts.insert(o);
        Repr::new(o, Tag::Bool)
    }

    /// `Σ coeffs[i]·terms[i]` as a left-folded chain of Arith gates.
    pub fn reduce_terms(&mut self, coeffs: &[FieldElement], terms: &[Repr]) -> Result<Repr, BuildError> {
        if coeffs.len() != terms.len() {
            return Err(BuildError::LengthMismatch {
                coeffs: coeffs.len(),
                terms: terms.len(),
            });
        }
        if terms.is_empty() {
            return Err(BuildError::NoTerms);
        }
        let zero = self.k(0);
        let mut acc = self.affine(&terms[0], coeffs[0], zero);
        for (c, t) in coeffs.iter().zip(terms).skip(1) {
            let q = [self.k(1), *c, self.k(-1), self.k(0), self.k(0)];
            acc = self.arith(&acc, t, q);
        }
        Ok(acc)
    }

    pub fn range_check_u4(&mut self, a: &Repr) -> Result<Repr, BuildError> {
        let u4 = self.table("u4")?;
        self.emit(GateInstance::lookup(u4, vec![a.wire]).expect("u4 arity"));
        Ok(Repr::new(a.wire, Tag::U4))
    }

    /// Splits `a` into `bits / 4` nibbles, each looked up in `u4`.
    ///
    /// Above 32 bits the low 32 are recomposed into a fresh wire; otherwise
    /// the low part is `a` itself.
    pub fn range_check_n(&mut self, a: &Repr, bits: u32) -> Result<(Repr, Vec<Repr>), BuildError> {
        if bits == 0 || !bits.is_multiple_of(4) || bits > 64 {
            return Err(BuildError::BadBits(bits));
        }
        let u4 = self.table("u4")?;
        let n = (bits / 4) as usize;
        let chunks: Vec<WireId> = (0..n).map(|_| self.fresh()).collect();
        self.emit(GateInstance::decompose(a.wire, chunks.clone(), 4).expect("valid split"));
        for &c in &chunks {
            self.emit(GateInstance::lookup(u4.clone(), vec![c]).expect("u4 arity"));
        }
        let low = if bits > 32 {
            let o = self.fresh();
            self.emit(self.recompose(&chunks[..8], o));
            Repr::new(o, Tag::SValue)
        } else if bits == 32 {
            Repr::new(a.wire, Tag::U32 { limbs: chunks.clone() })
        } else {
            Repr::new(a.wire, Tag::SValue)
        };
        Ok((low, chunks.into_iter().map(|c| Repr::new(c, Tag::U4)).collect()))
    }

    /// `(low 32 bits, high nibble)` of a 36-bit value.
    pub fn range_check_36(&mut self, a: &Repr) -> Result<(Repr, Repr), BuildError> {
        let (low, mut chunks) = self.range_check_n(a, 36)?;
        Ok((low, chunks.pop().expect("nine chunks")))
    }

    fn recompose(&self, limbs: &[WireId], out: WireId) -> GateInstance {
        let sixteen = self.k(16);
        let coeffs = (0..limbs.len() as u64).map(|i| sixteen.pow(i)).collect();
        GateInstance::lin_comb(limbs.to_vec(), coeffs, out).expect("nonempty limbs")
    }

    /// A u32 built from 8 little-endian nibbles; each nibble is checked.
    pub fn u32_from_nibbles(&mut self, nibbles: &[Repr]) -> Result<Repr, BuildError> {
        if nibbles.len() != 8 {
            return Err(BuildError::NibbleCount(nibbles.len()));
        }
        for n in nibbles {
            self.range_check_u4(n)?;
        }
        let limbs: Vec<WireId> = nibbles.iter().map(|n| n.wire).collect();
        let o = self.fresh();
        self.emit(self.recompose(&limbs, o));
        Ok(Repr::new(o, Tag::U32 { limbs }))
    }

    pub fn finish(self, outputs: &[Repr]) -> Program {
        let (inputs, input_kinds) = self.inputs.into_iter().unzip();
        Program {
            field: self.field,
            preamble: Circuit::from_gates(self.preamble),
            body: Circuit::from_gates(self.gates),
            inputs,
            input_kinds,
            outputs: outputs.iter().map(|r| r.wire).collect(),
            bool_wires: self.facts,
            next_wire: self.next,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{stats, validate, GateTag};

    #[test]
    fn constants_are_pooled() {
        let g = FieldSpec::goldilocks();
        let mut env = Env::new(g);
        let a = env.constant(g.one());
        let b = env.constant(g.one());
        assert_eq!(a.wire, b.wire);
        assert_eq!(env.gates().len(), 1);
        env.constant(g.zero());
        assert_eq!(env.gates().len(), 2);
    }

    #[test]
    fn boolean_ops_need_bools() {
        let mut env = Env::new(FieldSpec::goldilocks());
        let a = env.input_field();
        let b = env.input_bool();
        assert_eq!(env.and(&a, &b), Err(BuildError::NotBool(a.wire)));
        assert!(env.not(&b).is_ok());
    }

    #[test]
    fn xor_emission_counts() {
        let mut env = Env::new(FieldSpec::goldilocks());
        let a = env.input_bool();
        let b = env.input_bool();
        let o = env.xor(&a, &b).unwrap();
        let p = env.finish(&[o]);
        let s = stats(&p.body);
        assert_eq!(s[&GateTag::Arith], 6);
        assert_eq!(s[&GateTag::BoolCheck], 5);
        assert_eq!(stats(&p.preamble)[&GateTag::BoolCheck], 2);
        assert!(validate(&p.circuit()).is_ok());
    }

    #[test]
    fn reduce_terms_checks_lengths() {
        let g = FieldSpec::goldilocks();
        let mut env = Env::new(g);
        let x = env.input_field();
        assert!(matches!(
            env.reduce_terms(&[g.one(), g.one()], std::slice::from_ref(&x)),
            Err(BuildError::LengthMismatch { .. })
        ));
        assert_eq!(env.reduce_terms(&[], &[]), Err(BuildError::NoTerms));
        env.reduce_terms(&[g.elem(3)], &[x]).unwrap();
        assert_eq!(env.gates().len(), 1);
    }

    #[test]
    fn range_check_needs_table() {
        let mut env = Env::new(FieldSpec::goldilocks());
        let x = env.input_field();
        env.remove_table("u4");
        assert_eq!(env.range_check_u4(&x), Err(BuildError::MissingTable("u4".into())));
        assert_eq!(env.range_check_n(&x, 6), Err(BuildError::BadBits(6)));
    }

    #[test]
    fn range_check_36_shape() {
        let g = FieldSpec::goldilocks();
        let mut env = Env::new(g);
        let x = env.input_field();
        let (low, high) = env.range_check_36(&x).unwrap();
        let p = env.finish(&[low.clone(), high.clone()]);
        let s = stats(&p.body);
        assert_eq!(s[&GateTag::Decompose], 1);
        assert_eq!(s[&GateTag::Lookup], 9);
        assert_eq!(s[&GateTag::LinComb], 1);
        let t = p.run(&[g.elem((1 << 32) + 5)]).unwrap();
        assert_eq!(t.get(low.wire), Some(g.elem(5)));
        assert_eq!(t.get(high.wire), Some(g.one()));
        assert!(p.run(&[g.elem(1 << 36)]).is_err());
    }
}
