//! Traces and the functional semantics of circuits.

use std::fmt;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitSignature, GateInstance, GateKind, WireId};
use crate::field::{FieldElement, FieldSpec};

/// A partial assignment from wires to field elements.
///
/// Equality ignores trailing unset slots, so `[5, 7]` equals `[5, 7, _]`.
#[derive(Clone)]
pub struct Trace {
    field: FieldSpec,
    slots: Vec<Option<FieldElement>>,
}

impl Trace {
    pub fn new(field: FieldSpec) -> Self {
        Self {
            field,
            slots: Vec::new(),
        }
    }

    pub fn from_values(field: FieldSpec, values: &[u64]) -> Self {
        Self {
            field,
            slots: values.iter().map(|&v| Some(field.elem(v))).collect(),
        }
    }

    pub fn from_elements(field: FieldSpec, values: impl IntoIterator<Item = FieldElement>) -> Self {
        Self {
            field,
            slots: values.into_iter().map(Some).collect(),
        }
    }

    pub fn from_slots(field: FieldSpec, slots: Vec<Option<FieldElement>>) -> Self {
        Self { field, slots }
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }

    pub fn get(&self, w: WireId) -> Option<FieldElement> {
        self.slots.get(w.0).copied().flatten()
    }

    pub fn slots(&self) -> &[Option<FieldElement>] {
        &self.slots
    }

    /// Overwrites freely; generation goes through [`Trace::write_once`].
    pub fn set(&mut self, w: WireId, v: FieldElement) {
        if self.slots.len() <= w.0 {
            self.slots.resize(w.0 + 1, None);
        }
        self.slots[w.0] = Some(v);
    }

    pub fn unset(&mut self, w: WireId) {
        if let Some(slot) = self.slots.get_mut(w.0) {
            *slot = None;
        }
    }

    /// Writes `v` unless the slot already holds a value. Rewriting the same
    /// value is accepted; a different one is reported as a conflict.
    fn write_once(&mut self, w: WireId, v: FieldElement) -> Result<(), FailureReason> {
        match self.get(w) {
            None => {
                self.set(w, v);
                Ok(())
            }
            Some(old) if old == v => Ok(()),
            Some(old) => Err(FailureReason::Conflict {
                wire: w,
                existing: old,
                computed: v,
            }),
        }
    }

    /// The sub-trace holding only `wires`.
    pub fn restrict(&self, wires: &[WireId]) -> Trace {
        let mut out = Trace::new(self.field);
        for &w in wires {
            if let Some(v) = self.get(w) {
                out.set(w, v);
            }
        }
        out
    }

    fn trimmed(&self) -> &[Option<FieldElement>] {
        let end = self.slots.iter().rposition(Option::is_some).map_or(0, |i| i + 1);
        &self.slots[..end]
    }
}

impl PartialEq for Trace {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.trimmed() == other.trimmed()
    }
}

impl Eq for Trace {}

impl fmt::Debug for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, s) in self.slots.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            match s {
                Some(v) => write!(f, "{v}")?,
                None => write!(f, "_")?,
            }
        }
        write!(f, "]")
    }
}

/// Why witness generation stopped.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FailureReason {
    #[error("wire {0} is not set")]
    MissingInput(WireId),
    #[error("bool check failed: {wire} = {value}")]
    NotBoolean { wire: WireId, value: FieldElement },
    #[error("lookup miss in table {table:?}: {values:?}")]
    LookupMiss { table: String, values: Vec<FieldElement> },
    #[error("value {value} of {wire} does not fit in {bits} bits")]
    OutOfRange {
        wire: WireId,
        value: FieldElement,
        bits: u32,
    },
    #[error("wire {wire} already holds {existing}, gate computed {computed}")]
    Conflict {
        wire: WireId,
        existing: FieldElement,
        computed: FieldElement,
    },
}

/// The absent result of [`gen_trace`], with a diagnostic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("gate #{gate_index} ({gate}): {reason}")]
pub struct GenFailure {
    pub gate_index: usize,
    pub gate: String,
    pub reason: FailureReason,
}

pub type TraceResult = Result<Trace, GenFailure>;

fn read(t: &Trace, w: WireId) -> Result<FieldElement, FailureReason> {
    t.get(w).ok_or(FailureReason::MissingInput(w))
}

/// Runs one gate's witness generator on `t`.
pub fn gate_trace(g: &GateInstance, t: &mut Trace) -> Result<(), FailureReason> {
    let ins: Vec<FieldElement> = g.inputs().iter().map(|&w| read(t, w)).collect::<Result<_, _>>()?;
    let q = g.constants();
    match g.kind() {
        GateKind::Constant => t.write_once(g.outputs()[0], q[0]),
        GateKind::Arith => {
            let (l, r) = (ins[0], ins[1]);
            let (ql, qr, qo, qm, qc) = (q[0], q[1], q[2], q[3], q[4]);
            let qo_inv = qo.inv().expect("arith gates have qo != 0");
            let o = -((ql * l + qr * r + qm * l * r + qc) * qo_inv);
            t.write_once(g.outputs()[0], o)
        }
        GateKind::BoolCheck => {
            let v = ins[0];
            if v.is_zero() || v.is_one() {
                Ok(())
            } else {
                Err(FailureReason::NotBoolean {
                    wire: g.inputs()[0],
                    value: v,
                })
            }
        }
        GateKind::IsZero => {
            let i = ins[0];
            let field = i.spec();
            let (r, o) = match i.inv() {
                Ok(inv) => (inv, field.zero()),
                Err(_) => (field.zero(), field.one()),
            };
            t.write_once(g.aux()[0], r)?;
            t.write_once(g.outputs()[0], o)
        }
        GateKind::Fma => {
            let d = q[0] * ins[0] * ins[1] + q[1] * ins[2];
            t.write_once(g.outputs()[0], d)
        }
        GateKind::LinComb(_) => {
            let field = ins[0].spec();
            let o = ins.iter().zip(q).fold(field.zero(), |acc, (&x, &c)| acc + c * x);
            t.write_once(g.outputs()[0], o)
        }
        GateKind::Lookup(table) => {
            if table.contains(&ins) {
                Ok(())
            } else {
                Err(FailureReason::LookupMiss {
                    table: table.name().to_string(),
                    values: ins,
                })
            }
        }
        GateKind::Decompose { chunks, bits } => {
            let x = ins[0];
            let total = *chunks as u32 * bits;
            let value = x.value();
            if total < 64 && value >> total != 0 {
                return Err(FailureReason::OutOfRange {
                    wire: g.inputs()[0],
                    value: x,
                    bits: total,
                });
            }
            let mask = (1u64 << bits) - 1;
            for (i, &out) in g.outputs().iter().enumerate() {
                let chunk = (value >> (bits * i as u32)) & mask;
                t.write_once(out, x.spec().elem(chunk))?;
            }
            Ok(())
        }
    }
}

/// Computes the witness of `c` from an initial trace holding its inputs.
///
/// Gates run in canonical order; `Par` branches write disjoint wires, so the
/// left-then-right order gives the same result as any interleaving.
pub fn gen_trace(c: &Circuit, initial: &Trace) -> TraceResult {
    let mut t = initial.clone();
    for (index, g) in c.gates().into_iter().enumerate() {
        gate_trace(g, &mut t).map_err(|reason| GenFailure {
            gate_index: index,
            gate: g.to_string(),
            reason,
        })?;
    }
    Ok(t)
}

/// Trace equivalence on the input and output positions of `sig`.
///
/// Two failures agree regardless of their diagnostics; a failure never
/// agrees with a success.
pub fn trace_equiv(sig: &CircuitSignature, a: &TraceResult, b: &TraceResult) -> bool {
    match (a, b) {
        (Err(_), Err(_)) => true,
        (Ok(a), Ok(b)) => sig.io_positions().all(|w| a.get(w) == b.get(w)),
        _ => false,
    }
}

/// Trace equivalence between circuits whose io wires may differ: inputs
/// and outputs are compared position by position.
pub fn trace_equiv_mapped(
    a_sig: &CircuitSignature,
    a: &TraceResult,
    b_sig: &CircuitSignature,
    b: &TraceResult,
) -> bool {
    match (a, b) {
        (Err(_), Err(_)) => true,
        (Ok(a), Ok(b)) => {
            a_sig.inputs.len() == b_sig.inputs.len()
                && a_sig.outputs.len() == b_sig.outputs.len()
                && a_sig
                    .io_positions()
                    .zip(b_sig.io_positions())
                    .all(|(x, y)| a.get(x) == b.get(y))
        }
        _ => false,
    }
}
