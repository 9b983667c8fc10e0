//! Constrained vectors, identities, and the compiler from circuits to them.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

use crate::circuit::{Circuit, GateInstance, GateKind, LookupTable, WireId};
use crate::field::{FieldElement, FieldSpec};
use crate::witness::Trace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("{what} slot {index} out of range (length {len})")]
    SlotOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
}

/// `coeff · Π constants[const_slots] · Π wires[wire_slots]`.
///
/// Slot lists are kept sorted, so equal monomials compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub coeff: FieldElement,
    pub const_slots: Vec<usize>,
    pub wire_slots: Vec<usize>,
}

impl Monomial {
    pub fn new(coeff: FieldElement, mut const_slots: Vec<usize>, mut wire_slots: Vec<usize>) -> Self {
        const_slots.sort_unstable();
        wire_slots.sort_unstable();
        Self {
            coeff,
            const_slots,
            wire_slots,
        }
    }

    pub fn degree(&self) -> usize {
        self.wire_slots.len()
    }
}

/// A polynomial identity `Σ monomials = 0` over the slots of a vector.
///
/// The name is a label for rendering and selector columns; equality and
/// hashing look at the monomials only.
#[derive(Debug, Clone)]
pub struct Identity {
    pub name: String,
    pub monomials: Vec<Monomial>,
}

impl PartialEq for Identity {
    fn eq(&self, other: &Self) -> bool {
        self.monomials == other.monomials
    }
}

impl Eq for Identity {}

impl Hash for Identity {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.monomials.hash(state);
    }
}

impl Identity {
    pub fn new(monomials: Vec<Monomial>) -> Self {
        Self::named("custom", monomials)
    }

    pub fn named(name: impl Into<String>, mut monomials: Vec<Monomial>) -> Self {
        monomials.sort_by(|a, b| {
            (b.degree(), &a.wire_slots, &a.const_slots).cmp(&(a.degree(), &b.wire_slots, &b.const_slots))
        });
        Self {
            name: name.into(),
            monomials,
        }
    }

    pub fn degree(&self) -> usize {
        identity_degree(self)
    }

    fn max_slots(&self) -> (usize, usize) {
        let w = self
            .monomials
            .iter()
            .flat_map(|m| m.wire_slots.iter().map(|s| s + 1))
            .max();
        let c = self
            .monomials
            .iter()
            .flat_map(|m| m.const_slots.iter().map(|s| s + 1))
            .max();
        (w.unwrap_or(0), c.unwrap_or(0))
    }

    /// Renders the polynomial with caller-chosen slot names.
    pub fn render(&self, wire: impl Fn(usize) -> String, constant: impl Fn(usize) -> String) -> String {
        if self.monomials.is_empty() {
            return "0 = 0".into();
        }
        let mut out = String::new();
        for (i, m) in self.monomials.iter().enumerate() {
            let c = m.coeff;
            let neg = c.value() > c.spec().modulus() / 2;
            let mag = if neg { -c } else { c };
            out.push_str(match (i, neg) {
                (0, true) => "-",
                (0, false) => "",
                (_, true) => " - ",
                (_, false) => " + ",
            });
            let mut factors: Vec<String> = Vec::new();
            if !mag.is_one() || (m.const_slots.is_empty() && m.wire_slots.is_empty()) {
                factors.push(mag.to_string());
            }
            factors.extend(m.const_slots.iter().map(|&s| constant(s)));
            factors.extend(m.wire_slots.iter().map(|&s| wire(s)));
            out.push_str(&factors.join("*"));
        }
        out.push_str(" = 0");
        out
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.render(|i| format!("x{i}"), |i| format!("q{i}"));
        write!(f, "{s}")
    }
}

/// Shared identity shapes.
pub mod ids {
    use super::*;

    fn m(field: FieldSpec, coeff: i64, consts: &[usize], wires: &[usize]) -> Monomial {
        Monomial::new(field.from_i64(coeff), consts.to_vec(), wires.to_vec())
    }

    /// `ql·l + qr·r + qo·o + qm·l·r + qc = 0` over wires (l, r, o).
    pub fn arith(field: FieldSpec) -> Identity {
        Identity::named(
            "arith",
            vec![
                m(field, 1, &[0], &[0]),
                m(field, 1, &[1], &[1]),
                m(field, 1, &[2], &[2]),
                m(field, 1, &[3], &[0, 1]),
                m(field, 1, &[4], &[]),
            ],
        )
    }

    /// `x·(x − 1) = 0` on the given wire slot.
    pub fn boolean(field: FieldSpec, slot: usize) -> Identity {
        Identity::named(
            "bool",
            vec![m(field, 1, &[], &[slot, slot]), m(field, -1, &[], &[slot])],
        )
    }

    /// `o − q = 0`.
    pub fn constant(field: FieldSpec) -> Identity {
        Identity::named("const", vec![m(field, 1, &[], &[0]), m(field, -1, &[0], &[])])
    }

    /// `o + i·r − 1 = 0` over (i, r, o).
    pub fn is_zero_inverse(field: FieldSpec) -> Identity {
        Identity::named(
            "is_zero_inv",
            vec![
                m(field, 1, &[], &[2]),
                m(field, 1, &[], &[0, 1]),
                m(field, -1, &[], &[]),
            ],
        )
    }

    /// `i·o = 0` over (i, r, o).
    pub fn is_zero_product(field: FieldSpec) -> Identity {
        Identity::named("is_zero_prod", vec![m(field, 1, &[], &[0, 2])])
    }

    /// `c0·a·b + c1·c − d = 0` over (a, b, c, d).
    pub fn fma(field: FieldSpec) -> Identity {
        Identity::named(
            "fma",
            vec![
                m(field, 1, &[0], &[0, 1]),
                m(field, 1, &[1], &[2]),
                m(field, -1, &[], &[3]),
            ],
        )
    }

    /// `Σ q_i·x_i − o = 0` over (x_0..x_{k−1}, o).
    pub fn lin_comb(field: FieldSpec, k: usize) -> Identity {
        let mut ms: Vec<Monomial> = (0..k).map(|i| m(field, 1, &[i], &[i])).collect();
        ms.push(m(field, -1, &[], &[k]));
        Identity::named(format!("lc{k}"), ms)
    }

    /// `Σ n_i·2^{b·i} − x = 0` over (x, n_0..n_{k−1}).
    pub fn decompose(field: FieldSpec, chunks: usize, bits: u32) -> Identity {
        let two = field.elem(2);
        let mut ms: Vec<Monomial> = (0..chunks)
            .map(|i| Monomial::new(two.pow(bits as u64 * i as u64), vec![], vec![i + 1]))
            .collect();
        ms.push(m(field, -1, &[], &[0]));
        Identity::named(format!("decompose{chunks}x{bits}"), ms)
    }
}

/// One gate's footprint: its wires, constants, and identities.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConstrainedVector {
    pub wires: Vec<WireId>,
    pub constants: Vec<FieldElement>,
    pub identities: Vec<Identity>,
}

impl ConstrainedVector {
    pub fn new(
        wires: Vec<WireId>,
        constants: Vec<FieldElement>,
        identities: Vec<Identity>,
    ) -> Result<Self, ConstraintError> {
        for id in &identities {
            let (w, c) = id.max_slots();
            if w > wires.len() {
                return Err(ConstraintError::SlotOutOfRange {
                    what: "wire",
                    index: w - 1,
                    len: wires.len(),
                });
            }
            if c > constants.len() {
                return Err(ConstraintError::SlotOutOfRange {
                    what: "constant",
                    index: c - 1,
                    len: constants.len(),
                });
            }
        }
        Ok(Self {
            wires,
            constants,
            identities,
        })
    }

    /// The identities with wire and constant values substituted in.
    pub fn render(&self) -> Vec<String> {
        self.identities
            .iter()
            .map(|id| {
                id.render(
                    |s| self.wires[s].to_string(),
                    |s| format!("({})", self.constants[s].to_signed_string()),
                )
            })
            .collect()
    }
}

/// A lookup of a wire tuple in a named table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LookupConstraint {
    pub wires: Vec<WireId>,
    pub table: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSystem {
    pub field: FieldSpec,
    pub width: usize,
    pub cvs: Vec<ConstrainedVector>,
    pub lookups: Vec<LookupConstraint>,
    pub tables: BTreeMap<String, Arc<LookupTable>>,
}

impl ConstraintSystem {
    pub fn empty(field: FieldSpec) -> Self {
        Self {
            field,
            width: 0,
            cvs: Vec::new(),
            lookups: Vec::new(),
            tables: BTreeMap::new(),
        }
    }

    pub fn push_cv(&mut self, cv: ConstrainedVector) {
        self.width = self.width.max(cv.wires.iter().map(|w| w.0 + 1).max().unwrap_or(0));
        self.cvs.push(cv);
    }

    pub fn push_lookup(&mut self, table: Arc<LookupTable>, wires: Vec<WireId>) {
        self.width = self.width.max(wires.iter().map(|w| w.0 + 1).max().unwrap_or(0));
        self.lookups.push(LookupConstraint {
            wires,
            table: table.name().to_string(),
        });
        self.tables.entry(table.name().to_string()).or_insert(table);
    }

    pub fn degree(&self) -> usize {
        self.cvs.iter().map(cv_degree).max().unwrap_or(0)
    }

    pub fn identity_count(&self) -> usize {
        self.cvs.iter().map(|cv| cv.identities.len()).sum::<usize>() + self.lookups.len()
    }
}

fn eval_with(
    id: &Identity,
    wire: impl Fn(usize) -> FieldElement,
    constant: impl Fn(usize) -> FieldElement,
    field: FieldSpec,
) -> FieldElement {
    let mut acc = field.zero();
    for m in &id.monomials {
        let mut term = m.coeff;
        for &s in &m.const_slots {
            term = term * constant(s);
        }
        for &s in &m.wire_slots {
            term = term * wire(s);
        }
        acc = acc + term;
    }
    acc
}

/// Evaluates `id` at the given slot values; zero means satisfied.
pub fn eval_identity(
    id: &Identity,
    wire_vals: &[FieldElement],
    const_vals: &[FieldElement],
) -> Result<FieldElement, ConstraintError> {
    let (w, c) = id.max_slots();
    if w > wire_vals.len() {
        return Err(ConstraintError::SlotOutOfRange {
            what: "wire",
            index: w - 1,
            len: wire_vals.len(),
        });
    }
    if c > const_vals.len() {
        return Err(ConstraintError::SlotOutOfRange {
            what: "constant",
            index: c - 1,
            len: const_vals.len(),
        });
    }
    let field = id.monomials.first().map(|m| m.coeff.spec()).unwrap_or_default();
    Ok(eval_with(id, |s| wire_vals[s], |s| const_vals[s], field))
}

/// Why a trace does not satisfy a system.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Unsat {
    #[error("wire {0} is not set")]
    UnsetWire(WireId),
    #[error("constrained vector #{cv}: identity {identity} evaluates to {value}")]
    Identity {
        cv: usize,
        identity: String,
        value: FieldElement,
    },
    #[error("lookup #{index} into {table}: {values:?} not in table")]
    Lookup {
        index: usize,
        table: String,
        values: Vec<FieldElement>,
    },
    #[error("unknown table {0}")]
    UnknownTable(String),
}

fn check_cv_at(
    cv: &ConstrainedVector,
    index: usize,
    value: &impl Fn(WireId) -> Option<FieldElement>,
) -> Result<(), Unsat> {
    let mut vals = Vec::with_capacity(cv.wires.len());
    for &w in &cv.wires {
        vals.push(value(w).ok_or(Unsat::UnsetWire(w))?);
    }
    for id in &cv.identities {
        let field = vals
            .first()
            .map(|v| v.spec())
            .or_else(|| id.monomials.first().map(|m| m.coeff.spec()))
            .unwrap_or_default();
        let v = eval_with(id, |s| vals[s], |s| cv.constants[s], field);
        if !v.is_zero() {
            return Err(Unsat::Identity {
                cv: index,
                identity: id.name.clone(),
                value: v,
            });
        }
    }
    Ok(())
}

/// Like [`sat_cv`], with a diagnostic on failure.
pub fn check_cv(cv: &ConstrainedVector, t: &Trace) -> Result<(), Unsat> {
    check_cv_at(cv, 0, &|w| t.get(w))
}

pub fn sat_cv(cv: &ConstrainedVector, t: &Trace) -> bool {
    check_cv(cv, t).is_ok()
}

/// Checks every constrained vector and lookup of `cs` against wire values.
pub fn check_with(cs: &ConstraintSystem, value: impl Fn(WireId) -> Option<FieldElement>) -> Result<(), Unsat> {
    for (i, cv) in cs.cvs.iter().enumerate() {
        check_cv_at(cv, i, &value)?;
    }
    for (i, l) in cs.lookups.iter().enumerate() {
        let table = cs
            .tables
            .get(&l.table)
            .ok_or_else(|| Unsat::UnknownTable(l.table.clone()))?;
        let values: Vec<FieldElement> = l
            .wires
            .iter()
            .map(|&w| value(w).ok_or(Unsat::UnsetWire(w)))
            .collect::<Result<_, _>>()?;
        if !table.contains(&values) {
            return Err(Unsat::Lookup {
                index: i,
                table: l.table.clone(),
                values,
            });
        }
    }
    Ok(())
}

pub fn check(cs: &ConstraintSystem, t: &Trace) -> Result<(), Unsat> {
    check_with(cs, |w| t.get(w))
}

pub fn sat(cs: &ConstraintSystem, t: &Trace) -> bool {
    check(cs, t).is_ok()
}

/// Satisfiability of a full assignment given as a dense slice.
pub fn sat_values(cs: &ConstraintSystem, values: &[FieldElement]) -> bool {
    check_with(cs, |w| values.get(w.0).copied()).is_ok()
}

/// How IsZero gates are compiled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsZeroEncoding {
    /// `o + i·r − 1 = 0`, `i·o = 0`, `o·(o − 1) = 0`.
    #[default]
    Complete,
    /// Only `o = 1 − i·r` (as an arith row with constants (0, 0, −1, −1, 1))
    /// and a boolean check on `o`. Admits `o = 1` for nonzero `i`.
    Literal,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CompileOptions {
    /// Field for gates that carry no constants; defaults to the circuit's.
    pub field: Option<FieldSpec>,
    pub is_zero: IsZeroEncoding,
}

/// The constrained vector of one non-lookup gate.
pub fn gate_cv(g: &GateInstance, field: FieldSpec, is_zero: IsZeroEncoding) -> Option<ConstrainedVector> {
    let ins = g.inputs();
    let outs = g.outputs();
    let q = g.constants().to_vec();
    let (wires, constants, identities) = match g.kind() {
        GateKind::Constant => (vec![outs[0]], q, vec![ids::constant(field)]),
        GateKind::Arith => (vec![ins[0], ins[1], outs[0]], q, vec![ids::arith(field)]),
        GateKind::BoolCheck => (vec![ins[0]], q, vec![ids::boolean(field, 0)]),
        GateKind::IsZero => {
            let wires = vec![ins[0], g.aux()[0], outs[0]];
            match is_zero {
                IsZeroEncoding::Complete => (
                    wires,
                    q,
                    vec![
                        ids::is_zero_inverse(field),
                        ids::is_zero_product(field),
                        ids::boolean(field, 2),
                    ],
                ),
                IsZeroEncoding::Literal => (
                    wires,
                    [0, 0, -1, -1, 1].map(|c| field.from_i64(c)).to_vec(),
                    vec![ids::arith(field), ids::boolean(field, 2)],
                ),
            }
        }
        GateKind::Fma => (vec![ins[0], ins[1], ins[2], outs[0]], q, vec![ids::fma(field)]),
        GateKind::LinComb(k) => {
            let mut wires = ins.to_vec();
            wires.push(outs[0]);
            (wires, q, vec![ids::lin_comb(field, *k)])
        }
        GateKind::Lookup(_) => return None,
        GateKind::Decompose { chunks, bits } => {
            let mut wires = vec![ins[0]];
            wires.extend_from_slice(outs);
            (wires, q, vec![ids::decompose(field, *chunks, *bits)])
        }
    };
    Some(ConstrainedVector::new(wires, constants, identities).expect("gate shapes match their identities"))
}

pub fn gen_cs_with(c: &Circuit, opts: CompileOptions) -> ConstraintSystem {
    let field = opts.field.or_else(|| c.field()).unwrap_or_default();
    let mut cs = ConstraintSystem::empty(field);
    for g in c.gates() {
        match g.kind() {
            GateKind::Lookup(table) => cs.push_lookup(table.clone(), g.inputs().to_vec()),
            _ => cs.push_cv(gate_cv(g, field, opts.is_zero).expect("non-lookup gate")),
        }
    }
    cs.width = cs.width.max(c.width());
    cs
}

/// Compiles each gate to its constrained vector or lookup, in gate order.
pub fn gen_cs(c: &Circuit) -> ConstraintSystem {
    gen_cs_with(c, CompileOptions::default())
}

pub fn identity_degree(id: &Identity) -> usize {
    id.monomials.iter().map(Monomial::degree).max().unwrap_or(0)
}

pub fn cv_degree(cv: &ConstrainedVector) -> usize {
    cv.identities.iter().map(identity_degree).max().unwrap_or(0)
}
