//! The source language: gate instances over numbered wires, composed into a
//! binary tree of sequential and parallel nodes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

use crate::field::{FieldElement, FieldSpec};

/// Position of a value in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WireId(pub usize);

impl WireId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for WireId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("{kind} gate expects {expected} {what}, got {got}")]
    Arity {
        kind: GateTag,
        what: &'static str,
        expected: String,
        got: usize,
    },
    #[error("arith gate needs a nonzero output coefficient qo")]
    ZeroOutputCoefficient,
    #[error("invalid gate payload: {0}")]
    Payload(String),
    #[error("gate constants come from different fields")]
    MixedFields,
    #[error("declared output {0} is not defined by the circuit")]
    UndefinedOutput(WireId),
    #[error("lookup table {name:?}: {reason}")]
    Table { name: String, reason: String },
}

/// A finite relation used by lookup gates, e.g. `u4 = {(v) : 0 <= v < 16}`.
///
/// Rows hold canonical integer representatives; membership is tested on the
/// canonical values of field elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupTable {
    name: String,
    arity: usize,
    rows: BTreeSet<Vec<u64>>,
}

impl LookupTable {
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        rows: impl IntoIterator<Item = Vec<u64>>,
    ) -> Result<Self, CircuitError> {
        let name = name.into();
        let rows: BTreeSet<Vec<u64>> = rows.into_iter().collect();
        let bad = |reason: String| CircuitError::Table {
            name: name.clone(),
            reason,
        };
        if arity == 0 {
            return Err(bad("arity must be at least 1".into()));
        }
        if rows.is_empty() {
            return Err(bad("table is empty".into()));
        }
        if let Some(row) = rows.iter().find(|r| r.len() != arity) {
            return Err(bad(format!("row {row:?} does not have arity {arity}")));
        }
        Ok(Self { name, arity, rows })
    }

    /// The 4-bit range table `{(v) : 0 <= v < 16}`.
    pub fn u4() -> Self {
        Self::new("u4", 1, (0..16).map(|v| vec![v])).expect("static table")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn contains(&self, values: &[FieldElement]) -> bool {
        let key: Vec<u64> = values.iter().map(|v| v.value()).collect();
        self.rows.contains(&key)
    }
}

impl Hash for LookupTable {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.name.hash(state);
        self.arity.hash(state);
    }
}

/// Gate kinds, with their payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GateKind {
    Constant,
    Arith,
    BoolCheck,
    IsZero,
    Fma,
    LinComb(usize),
    Lookup(Arc<LookupTable>),
    Decompose { chunks: usize, bits: u32 },
}

/// A gate kind with the payload stripped; the key of [`stats`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateTag {
    Constant,
    Arith,
    BoolCheck,
    IsZero,
    Fma,
    LinComb,
    Lookup,
    Decompose,
}

impl GateTag {
    pub const ALL: [GateTag; 8] = [
        GateTag::Constant,
        GateTag::Arith,
        GateTag::BoolCheck,
        GateTag::IsZero,
        GateTag::Fma,
        GateTag::LinComb,
        GateTag::Lookup,
        GateTag::Decompose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateTag::Constant => "Constant",
            GateTag::Arith => "Arith",
            GateTag::BoolCheck => "BoolCheck",
            GateTag::IsZero => "IsZero",
            GateTag::Fma => "FMA",
            GateTag::LinComb => "LinComb",
            GateTag::Lookup => "Lookup",
            GateTag::Decompose => "Decompose",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }
}

impl fmt::Display for GateTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl GateKind {
    pub fn tag(&self) -> GateTag {
        match self {
            GateKind::Constant => GateTag::Constant,
            GateKind::Arith => GateTag::Arith,
            GateKind::BoolCheck => GateTag::BoolCheck,
            GateKind::IsZero => GateTag::IsZero,
            GateKind::Fma => GateTag::Fma,
            GateKind::LinComb(_) => GateTag::LinComb,
            GateKind::Lookup(_) => GateTag::Lookup,
            GateKind::Decompose { .. } => GateTag::Decompose,
        }
    }

    /// Gates that can make witness generation fail on well-formed input.
    pub fn is_assertion(&self) -> bool {
        matches!(
            self,
            GateKind::BoolCheck | GateKind::Lookup(_) | GateKind::Decompose { .. }
        )
    }
}

/// One gate applied to concrete wires.
///
/// Arity per kind (inputs / aux / outputs / constants):
///
/// | kind           | in | aux | out | const                   |
/// |----------------|----|-----|-----|-------------------------|
/// | Constant       | 0  | 0   | 1   | 1 (q)                   |
/// | Arith          | 2  | 0   | 1   | 5 (ql, qr, qo, qm, qc)  |
/// | BoolCheck      | 1  | 0   | 0   | 0                       |
/// | IsZero         | 1  | 1   | 1   | 0                       |
/// | Fma            | 3  | 0   | 1   | 2 (c0, c1)              |
/// | LinComb(k)     | k  | 0   | 1   | k                       |
/// | Lookup(t)      | m  | 0   | 0   | 0                       |
/// | Decompose(k,b) | 1  | 0   | k   | 0                       |
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GateInstance {
    kind: GateKind,
    inputs: Vec<WireId>,
    aux: Vec<WireId>,
    outputs: Vec<WireId>,
    constants: Vec<FieldElement>,
}

fn check_count(kind: GateTag, what: &'static str, expected: usize, got: usize) -> Result<(), CircuitError> {
    if expected == got {
        Ok(())
    } else {
        Err(CircuitError::Arity {
            kind,
            what,
            expected: expected.to_string(),
            got,
        })
    }
}

impl GateInstance {
    pub fn new(
        kind: GateKind,
        inputs: Vec<WireId>,
        aux: Vec<WireId>,
        outputs: Vec<WireId>,
        constants: Vec<FieldElement>,
    ) -> Result<Self, CircuitError> {
        let tag = kind.tag();
        let (n_in, n_aux, n_out, n_const) = match &kind {
            GateKind::Constant => (0, 0, 1, 1),
            GateKind::Arith => (2, 0, 1, 5),
            GateKind::BoolCheck => (1, 0, 0, 0),
            GateKind::IsZero => (1, 1, 1, 0),
            GateKind::Fma => (3, 0, 1, 2),
            GateKind::LinComb(k) => {
                if *k == 0 {
                    return Err(CircuitError::Payload("linear combination width must be >= 1".into()));
                }
                (*k, 0, 1, *k)
            }
            GateKind::Lookup(table) => (table.arity(), 0, 0, 0),
            GateKind::Decompose { chunks, bits } => {
                if *chunks == 0 {
                    return Err(CircuitError::Payload("decomposition needs at least one chunk".into()));
                }
                if !(1..=16).contains(bits) {
                    return Err(CircuitError::Payload(format!("chunk bits {bits} outside 1..=16")));
                }
                if *chunks as u64 * *bits as u64 > 64 {
                    return Err(CircuitError::Payload(format!(
                        "{chunks} chunks of {bits} bits exceed 64 bits"
                    )));
                }
                (1, 0, *chunks, 0)
            }
        };
        check_count(tag, "inputs", n_in, inputs.len())?;
        check_count(tag, "aux wires", n_aux, aux.len())?;
        check_count(tag, "outputs", n_out, outputs.len())?;
        check_count(tag, "constants", n_const, constants.len())?;
        if let Some(first) = constants.first() {
            if constants.iter().any(|c| c.spec() != first.spec()) {
                return Err(CircuitError::MixedFields);
            }
        }
        if tag == GateTag::Arith && constants[2].is_zero() {
            return Err(CircuitError::ZeroOutputCoefficient);
        }
        Ok(Self {
            kind,
            inputs,
            aux,
            outputs,
            constants,
        })
    }

    pub fn constant(out: WireId, q: FieldElement) -> Self {
        Self::new(GateKind::Constant, vec![], vec![], vec![out], vec![q]).expect("constant arity")
    }

    /// `ql*l + qr*r + qo*o + qm*l*r + qc = 0`, constants in that order.
    pub fn arith(l: WireId, r: WireId, o: WireId, q: [FieldElement; 5]) -> Result<Self, CircuitError> {
        Self::new(GateKind::Arith, vec![l, r], vec![], vec![o], q.to_vec())
    }

    pub fn bool_check(i: WireId) -> Self {
        Self::new(GateKind::BoolCheck, vec![i], vec![], vec![], vec![]).expect("bool arity")
    }

    /// `o = (i == 0)`, with `r` holding the inverse of `i` when it exists.
    pub fn is_zero(i: WireId, r: WireId, o: WireId) -> Self {
        Self::new(GateKind::IsZero, vec![i], vec![r], vec![o], vec![]).expect("is_zero arity")
    }

    /// `d = c0*a*b + c1*c`.
    pub fn fma(a: WireId, b: WireId, c: WireId, d: WireId, c0: FieldElement, c1: FieldElement) -> Self {
        Self::new(GateKind::Fma, vec![a, b, c], vec![], vec![d], vec![c0, c1]).expect("fma arity")
    }

    /// `o = sum_i coeffs[i] * inputs[i]`.
    pub fn lin_comb(inputs: Vec<WireId>, coeffs: Vec<FieldElement>, o: WireId) -> Result<Self, CircuitError> {
        Self::new(GateKind::LinComb(inputs.len()), inputs, vec![], vec![o], coeffs)
    }

    pub fn lookup(table: Arc<LookupTable>, inputs: Vec<WireId>) -> Result<Self, CircuitError> {
        Self::new(GateKind::Lookup(table), inputs, vec![], vec![], vec![])
    }

    /// Little-endian split of `x` into `chunks.len()` limbs of `bits` bits.
    pub fn decompose(x: WireId, chunks: Vec<WireId>, bits: u32) -> Result<Self, CircuitError> {
        let k = chunks.len();
        Self::new(GateKind::Decompose { chunks: k, bits }, vec![x], vec![], chunks, vec![])
    }

    pub fn kind(&self) -> &GateKind {
        &self.kind
    }

    pub fn tag(&self) -> GateTag {
        self.kind.tag()
    }

    pub fn inputs(&self) -> &[WireId] {
        &self.inputs
    }

    pub fn aux(&self) -> &[WireId] {
        &self.aux
    }

    pub fn outputs(&self) -> &[WireId] {
        &self.outputs
    }

    pub fn constants(&self) -> &[FieldElement] {
        &self.constants
    }

    /// Aux wires followed by outputs: everything this gate writes.
    pub fn defined(&self) -> impl Iterator<Item = WireId> + '_ {
        self.aux.iter().chain(self.outputs.iter()).copied()
    }

    pub fn all_wires(&self) -> impl Iterator<Item = WireId> + '_ {
        self.inputs.iter().copied().chain(self.defined())
    }

    pub fn field(&self) -> Option<FieldSpec> {
        self.constants.first().map(|c| c.spec())
    }

    /// Same gate with every wire passed through `f`.
    pub fn map_wires(&self, mut f: impl FnMut(WireId) -> WireId) -> Self {
        Self {
            kind: self.kind.clone(),
            inputs: self.inputs.iter().map(|&w| f(w)).collect(),
            aux: self.aux.iter().map(|&w| f(w)).collect(),
            outputs: self.outputs.iter().map(|&w| f(w)).collect(),
            constants: self.constants.clone(),
        }
    }
}

impl fmt::Display for GateInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |ws: &[WireId]| ws.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" ");
        write!(f, "{}", self.tag())?;
        match &self.kind {
            GateKind::LinComb(k) => write!(f, "[{k}]")?,
            GateKind::Lookup(t) => write!(f, "[{}]", t.name())?,
            GateKind::Decompose { chunks, bits } => write!(f, "[{chunks}x{bits}]")?,
            _ => {}
        }
        write!(f, " ({})", list(&self.inputs))?;
        if !self.aux.is_empty() {
            write!(f, " aux ({})", list(&self.aux))?;
        }
        write!(f, " -> ({})", list(&self.outputs))?;
        if !self.constants.is_empty() {
            let cs: Vec<String> = self.constants.iter().map(|c| c.to_signed_string()).collect();
            write!(f, " [{}]", cs.join(" "))?;
        }
        Ok(())
    }
}

/// A circuit: a tree whose leaves are gates.
///
/// In `Seq(a, b)` the right subtree may read wires defined in the left one;
/// in `Par(a, b)` neither branch may read the other's definitions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Circuit {
    #[default]
    Nil,
    Gate(GateInstance),
    Seq(Box<Circuit>, Box<Circuit>),
    Par(Box<Circuit>, Box<Circuit>),
}

impl From<GateInstance> for Circuit {
    fn from(g: GateInstance) -> Self {
        Circuit::Gate(g)
    }
}

impl Circuit {
    pub fn seq(left: Circuit, right: Circuit) -> Self {
        Circuit::Seq(Box::new(left), Box::new(right))
    }

    pub fn par(left: Circuit, right: Circuit) -> Self {
        Circuit::Par(Box::new(left), Box::new(right))
    }

    /// A balanced `Seq` tree over `gates`, keeping their order. An empty
    /// sequence gives `Nil`.
    pub fn from_gates(gates: impl IntoIterator<Item = GateInstance>) -> Self {
        let nodes: Vec<Circuit> = gates.into_iter().map(Circuit::Gate).collect();
        Self::seq_all(nodes)
    }

    /// Balanced sequential composition of `parts`, dropping `Nil`s.
    pub fn seq_all(parts: Vec<Circuit>) -> Self {
        fn build(mut parts: Vec<Circuit>) -> Circuit {
            match parts.len() {
                0 => Circuit::Nil,
                1 => parts.pop().unwrap(),
                n => {
                    let right = parts.split_off(n / 2);
                    Circuit::seq(build(parts), build(right))
                }
            }
        }
        build(parts.into_iter().filter(|p| !matches!(p, Circuit::Nil)).collect())
    }

    /// Gates in canonical order: left subtree before right, for both `Seq`
    /// and `Par`.
    pub fn gates(&self) -> Vec<&GateInstance> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                Circuit::Nil => {}
                Circuit::Gate(g) => out.push(g),
                Circuit::Seq(l, r) | Circuit::Par(l, r) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        out
    }

    pub fn gate_count(&self) -> usize {
        self.gates().len()
    }

    pub fn is_empty(&self) -> bool {
        self.gate_count() == 0
    }

    /// One past the largest wire index mentioned anywhere.
    pub fn width(&self) -> usize {
        self.gates()
            .iter()
            .flat_map(|g| g.all_wires())
            .map(|w| w.0 + 1)
            .max()
            .unwrap_or(0)
    }

    /// The field of the first gate constant, if any gate carries one.
    pub fn field(&self) -> Option<FieldSpec> {
        self.gates().iter().find_map(|g| g.field())
    }

    /// Every lookup table referenced by a gate, keyed by name.
    pub fn tables(&self) -> BTreeMap<String, Arc<LookupTable>> {
        self.gates()
            .iter()
            .filter_map(|g| match g.kind() {
                GateKind::Lookup(t) => Some((t.name().to_string(), t.clone())),
                _ => None,
            })
            .collect()
    }

    /// Rebuilds the tree, replacing every gate leaf by the sequence `f`
    /// returns for it. Structure is kept; emptied subtrees collapse.
    pub fn map_gates(&self, f: &mut impl FnMut(&GateInstance) -> Vec<GateInstance>) -> Circuit {
        match self {
            Circuit::Nil => Circuit::Nil,
            Circuit::Gate(g) => Circuit::from_gates(f(g)),
            Circuit::Seq(l, r) => {
                let (l, r) = (l.map_gates(f), r.map_gates(f));
                match (l, r) {
                    (Circuit::Nil, x) | (x, Circuit::Nil) => x,
                    (l, r) => Circuit::seq(l, r),
                }
            }
            Circuit::Par(l, r) => {
                let (l, r) = (l.map_gates(f), r.map_gates(f));
                match (l, r) {
                    (Circuit::Nil, x) | (x, Circuit::Nil) => x,
                    (l, r) => Circuit::par(l, r),
                }
            }
        }
    }

    /// Applies a wire renaming everywhere; unmapped wires are kept.
    pub fn rename_wires(&self, map: &HashMap<WireId, WireId>) -> Circuit {
        self.map_gates(&mut |g| vec![g.map_wires(|w| *map.get(&w).unwrap_or(&w))])
    }

    /// Shifts every wire index by `offset`, for composing independently
    /// built circuits.
    pub fn shift_wires(&self, offset: usize) -> Circuit {
        self.map_gates(&mut |g| vec![g.map_wires(|w| WireId(w.0 + offset))])
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.gates().iter().enumerate() {
            writeln!(f, "{i:4}: {g}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// A wire is written by more than one gate (or twice by one gate).
    MultipleDefinition,
    /// A gate reads a wire that is only defined later in sequence order.
    UseBeforeDefinition,
    /// A `Par` branch reads a wire defined by its sibling.
    ParIsolation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub wire: WireId,
    /// Tree path of the offending gate: `L`/`R` steps from the root.
    pub path: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "root" } else { &self.path };
        write!(f, "{:?} on {} at {}", self.kind, self.wire, path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn defined_in(c: &Circuit) -> HashSet<WireId> {
    c.gates().iter().flat_map(|g| g.defined()).collect()
}

/// Checks single assignment, def-before-use and `Par` isolation. All
/// violations are collected; none of them aborts the walk.
pub fn validate(c: &Circuit) -> ValidationReport {
    struct Walk {
        all_defined: HashSet<WireId>,
        seen: HashSet<WireId>,
        siblings: Vec<HashSet<WireId>>,
        violations: Vec<Violation>,
    }

    impl Walk {
        fn visit(&mut self, node: &Circuit, visible: &mut HashSet<WireId>, path: &mut String) {
            match node {
                Circuit::Nil => {}
                Circuit::Gate(g) => {
                    for &w in g.inputs() {
                        if self.all_defined.contains(&w) && !visible.contains(&w) {
                            let kind = if self.siblings.iter().any(|s| s.contains(&w)) {
                                ViolationKind::ParIsolation
                            } else {
                                ViolationKind::UseBeforeDefinition
                            };
                            self.violations.push(Violation {
                                kind,
                                wire: w,
                                path: path.clone(),
                            });
                        }
                    }
                    for w in g.defined() {
                        if !self.seen.insert(w) {
                            self.violations.push(Violation {
                                kind: ViolationKind::MultipleDefinition,
                                wire: w,
                                path: path.clone(),
                            });
                        }
                        visible.insert(w);
                    }
                }
                Circuit::Seq(l, r) => {
                    path.push('L');
                    self.visit(l, visible, path);
                    path.pop();
                    path.push('R');
                    self.visit(r, visible, path);
                    path.pop();
                }
                Circuit::Par(l, r) => {
                    let (left_defs, right_defs) = (defined_in(l), defined_in(r));
                    let mut left_scope = visible.clone();
                    self.siblings.push(right_defs);
                    path.push('L');
                    self.visit(l, &mut left_scope, path);
                    path.pop();
                    self.siblings.pop();

                    let mut right_scope = visible.clone();
                    self.siblings.push(left_defs);
                    path.push('R');
                    self.visit(r, &mut right_scope, path);
                    path.pop();
                    self.siblings.pop();

                    visible.extend(left_scope);
                    visible.extend(right_scope);
                }
            }
        }
    }

    let mut walk = Walk {
        all_defined: defined_in(c),
        seen: HashSet::new(),
        siblings: Vec::new(),
        violations: Vec::new(),
    };
    walk.visit(c, &mut HashSet::new(), &mut String::new());
    ValidationReport {
        violations: walk.violations,
    }
}

/// The positions `≈` compares traces on: circuit inputs and outputs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CircuitSignature {
    pub inputs: Vec<WireId>,
    pub outputs: Vec<WireId>,
}

impl CircuitSignature {
    pub fn io_positions(&self) -> impl Iterator<Item = WireId> + '_ {
        self.inputs.iter().chain(self.outputs.iter()).copied()
    }
}

/// Computes the signature of `c`.
///
/// Inputs are the wires read but never defined, ascending. Outputs are
/// `declared` (order kept, duplicates dropped) or, by default, the gate
/// outputs that no non-assertion gate reads.
pub fn signature(c: &Circuit, declared: Option<&[WireId]>) -> Result<CircuitSignature, CircuitError> {
    let gates = c.gates();
    let defined: HashSet<WireId> = gates.iter().flat_map(|g| g.defined()).collect();
    let inputs: BTreeSet<WireId> = gates
        .iter()
        .flat_map(|g| g.inputs().iter().copied())
        .filter(|w| !defined.contains(w))
        .collect();
    let outputs = match declared {
        Some(ws) => {
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            for &w in ws {
                if !defined.contains(&w) {
                    return Err(CircuitError::UndefinedOutput(w));
                }
                if seen.insert(w) {
                    out.push(w);
                }
            }
            out
        }
        None => {
            let consumed: HashSet<WireId> = gates
                .iter()
                .filter(|g| !g.kind().is_assertion() || g.tag() == GateTag::Decompose)
                .flat_map(|g| g.inputs().iter().copied())
                .collect();
            let outs: BTreeSet<WireId> = gates
                .iter()
                .flat_map(|g| g.outputs().iter().copied())
                .filter(|w| !consumed.contains(w))
                .collect();
            outs.into_iter().collect()
        }
    };
    Ok(CircuitSignature {
        inputs: inputs.into_iter().collect(),
        outputs,
    })
}

/// Canonical linearization of the tree.
pub fn gates_in_order(c: &Circuit) -> Vec<GateInstance> {
    c.gates().into_iter().cloned().collect()
}

pub type GateStats = BTreeMap<GateTag, usize>;

/// Gate counts by kind.
pub fn stats(c: &Circuit) -> GateStats {
    let mut counts = GateStats::new();
    for g in c.gates() {
        *counts.entry(g.tag()).or_default() += 1;
    }
    counts
}

pub fn format_stats(stats: &GateStats) -> String {
    let parts: Vec<String> = stats.iter().map(|(k, v)| format!("{k}: {v}")).collect();
    format!("{{{}}}", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f7() -> FieldSpec {
        FieldSpec::new(7).unwrap()
    }

    fn mul(l: usize, r: usize, o: usize) -> GateInstance {
        let f = f7();
        GateInstance::arith(
            WireId(l),
            WireId(r),
            WireId(o),
            [f.zero(), f.zero(), f.from_i64(-1), f.one(), f.zero()],
        )
        .unwrap()
    }

    fn add(l: usize, r: usize, o: usize) -> GateInstance {
        let f = f7();
        GateInstance::arith(
            WireId(l),
            WireId(r),
            WireId(o),
            [f.one(), f.one(), f.from_i64(-1), f.zero(), f.zero()],
        )
        .unwrap()
    }

    fn chained() -> Circuit {
        Circuit::seq(mul(0, 1, 3).into(), add(2, 3, 4).into())
    }

    #[test]
    fn arity_is_checked() {
        let f = f7();
        let err = GateInstance::new(
            GateKind::Arith,
            vec![WireId(0)],
            vec![],
            vec![WireId(1)],
            vec![f.one(); 5],
        );
        assert!(matches!(err, Err(CircuitError::Arity { what: "inputs", .. })));
        let zero_qo = GateInstance::arith(
            WireId(0),
            WireId(1),
            WireId(2),
            [f.one(), f.one(), f.zero(), f.one(), f.one()],
        );
        assert_eq!(zero_qo, Err(CircuitError::ZeroOutputCoefficient));
        assert!(GateInstance::decompose(WireId(0), vec![], 4).is_err());
        assert!(GateInstance::decompose(WireId(0), vec![WireId(1)], 17).is_err());
        assert!(GateInstance::lin_comb(vec![], vec![], WireId(0)).is_err());
        let mixed = GateInstance::lin_comb(
            vec![WireId(0), WireId(1)],
            vec![f.one(), FieldSpec::new(5).unwrap().one()],
            WireId(2),
        );
        assert_eq!(mixed, Err(CircuitError::MixedFields));
    }

    #[test]
    fn lookup_table_invariants() {
        assert!(LookupTable::new("empty", 1, vec![]).is_err());
        assert!(LookupTable::new("bad", 2, vec![vec![1]]).is_err());
        let u4 = LookupTable::u4();
        assert_eq!(u4.arity(), 1);
        assert!(u4.contains(&[f7().elem(6)]));
        let g = FieldSpec::goldilocks();
        assert!(u4.contains(&[g.elem(15)]));
        assert!(!u4.contains(&[g.elem(16)]));
    }

    #[test]
    fn chained_gates_validate_and_signature() {
        let c = chained();
        assert!(validate(&c).is_ok());
        let sig = signature(&c, None).unwrap();
        assert_eq!(sig.inputs, vec![WireId(0), WireId(1), WireId(2)]);
        assert_eq!(sig.outputs, vec![WireId(4)]);
        let order: Vec<_> = gates_in_order(&c);
        assert_eq!(order, vec![mul(0, 1, 3), add(2, 3, 4)]);
        assert_eq!(stats(&c), GateStats::from([(GateTag::Arith, 2)]));
    }

    #[test]
    fn nil_is_trivial() {
        let c = Circuit::Nil;
        assert!(validate(&c).is_ok());
        assert_eq!(signature(&c, None).unwrap(), CircuitSignature::default());
        assert!(gates_in_order(&c).is_empty());
        assert!(stats(&c).is_empty());
        assert_eq!(c.width(), 0);
    }

    #[test]
    fn is_zero_aux_is_neither_input_nor_output() {
        let c: Circuit = GateInstance::is_zero(WireId(0), WireId(1), WireId(2)).into();
        let sig = signature(&c, None).unwrap();
        assert_eq!(sig.inputs, vec![WireId(0)]);
        assert_eq!(sig.outputs, vec![WireId(2)]);
    }

    #[test]
    fn par_isolation_violation() {
        let c = Circuit::par(mul(0, 1, 3).into(), add(3, 2, 4).into());
        let report = validate(&c);
        assert_eq!(
            report.violations,
            vec![Violation {
                kind: ViolationKind::ParIsolation,
                wire: WireId(3),
                path: "R".into()
            }]
        );
        // the same gates in sequence are fine
        assert!(validate(&Circuit::seq(mul(0, 1, 3).into(), add(3, 2, 4).into())).is_ok());
    }

    #[test]
    fn par_left_reading_right_is_also_rejected() {
        let c = Circuit::par(add(3, 2, 4).into(), mul(0, 1, 3).into());
        let report = validate(&c);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::ParIsolation);
        assert_eq!(report.violations[0].path, "L");
    }

    #[test]
    fn ssa_and_order_violations() {
        let twice = Circuit::seq(mul(0, 1, 3).into(), add(0, 1, 3).into());
        let report = validate(&twice);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::MultipleDefinition);

        let backwards = Circuit::seq(add(2, 3, 4).into(), mul(0, 1, 3).into());
        let report = validate(&backwards);
        assert_eq!(report.violations[0].kind, ViolationKind::UseBeforeDefinition);
        assert_eq!(report.violations[0].wire, WireId(3));
        assert_eq!(report.violations[0].path, "L");
    }

    #[test]
    fn after_par_both_branches_are_visible() {
        let c = Circuit::seq(
            Circuit::par(mul(0, 1, 3).into(), mul(0, 2, 4).into()),
            add(3, 4, 5).into(),
        );
        assert!(validate(&c).is_ok());
        let order: Vec<_> = gates_in_order(&Circuit::par(mul(0, 1, 3).into(), mul(0, 2, 4).into()));
        assert_eq!(order, vec![mul(0, 1, 3), mul(0, 2, 4)]);
    }

    #[test]
    fn declared_outputs() {
        let c = chained();
        let sig = signature(&c, Some(&[WireId(3), WireId(4), WireId(3)])).unwrap();
        assert_eq!(sig.outputs, vec![WireId(3), WireId(4)]);
        assert_eq!(
            signature(&c, Some(&[WireId(9)])),
            Err(CircuitError::UndefinedOutput(WireId(9)))
        );
        assert_eq!(
            signature(&c, Some(&[WireId(0)])),
            Err(CircuitError::UndefinedOutput(WireId(0)))
        );
    }

    #[test]
    fn signature_stable_under_reassociation() {
        let (a, b, c) = (mul(0, 1, 3), add(2, 3, 4), mul(4, 4, 5));
        let left = Circuit::seq(Circuit::seq(a.clone().into(), b.clone().into()), c.clone().into());
        let right = Circuit::seq(a.into(), Circuit::seq(b.into(), c.into()));
        assert_eq!(signature(&left, None), signature(&right, None));
        assert_eq!(gates_in_order(&left), gates_in_order(&right));
    }

    #[test]
    fn stats_are_additive() {
        let a = chained();
        let b: Circuit = GateInstance::bool_check(WireId(4)).into();
        let mut expected = stats(&a);
        for (k, v) in stats(&b) {
            *expected.entry(k).or_default() += v;
        }
        assert_eq!(stats(&Circuit::seq(a, b)), expected);
    }

    #[test]
    fn map_gates_keeps_structure_and_collapses_nil() {
        let c = Circuit::par(mul(0, 1, 3).into(), add(0, 2, 4).into());
        let dropped = c.map_gates(&mut |g| {
            if g.outputs() == [WireId(3)] {
                vec![]
            } else {
                vec![g.clone()]
            }
        });
        assert_eq!(dropped, Circuit::Gate(add(0, 2, 4)));
        let shifted = c.shift_wires(10);
        assert!(matches!(shifted, Circuit::Par(..)));
        assert_eq!(shifted.gates()[0].outputs(), &[WireId(13)]);
    }

    #[test]
    fn from_gates_is_balanced_and_ordered() {
        let gates: Vec<GateInstance> = (0..100).map(|i| mul(i, i, i + 1)).collect();
        let c = Circuit::from_gates(gates.clone());
        assert_eq!(gates_in_order(&c), gates);
        fn depth(c: &Circuit) -> usize {
            match c {
                Circuit::Seq(l, r) | Circuit::Par(l, r) => 1 + depth(l).max(depth(r)),
                _ => 0,
            }
        }
        assert!(depth(&c) <= 8);
    }
}
