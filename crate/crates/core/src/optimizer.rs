//! Whole-circuit rewrite passes, profile lowering, and flattening.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::builder::Program;
use crate::circuit::{
    gates_in_order, signature, stats, validate, Circuit, CircuitSignature, GateInstance, GateKind, GateStats, GateTag,
    WireId,
};
use crate::constraints::{ConstrainedVector, ConstraintSystem, Identity};
use crate::field::{FieldElement, FieldSpec};
use crate::poly::Poly;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptError {
    #[error("wire {0} is given as boolean but nothing constrains it")]
    UnconstrainedFact(WireId),
    #[error("optimized circuit is invalid: {0}")]
    Invalid(String),
    #[error("soundness discipline violated: {}", fmt_violations(.0))]
    Discipline(Vec<DisciplineViolation>),
    #[error("cannot flatten a circuit with lookups (table {0})")]
    LookupInFlatten(String),
    #[error("degree bound {0} is below 2")]
    BoundTooSmall(usize),
    #[error("gate {gate} has degree {degree}, above the bound {bound}")]
    GateAboveBound { gate: String, degree: usize, bound: usize },
    #[error("unknown pass {0:?}")]
    UnknownPass(String),
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
}

fn fmt_violations(vs: &[DisciplineViolation]) -> String {
    let parts: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
    parts.join("; ")
}

/// Target gate sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    PlonkArith,
    BoojumLike { lc_width: usize },
}

impl Profile {
    pub fn boojum() -> Self {
        Profile::BoojumLike { lc_width: 4 }
    }

    pub fn parse(s: &str) -> Result<Self, OptError> {
        match s {
            "plonk" | "plonk_arith" => Ok(Profile::PlonkArith),
            "boojum" | "boojum_like" => Ok(Profile::boojum()),
            _ => Err(OptError::UnknownProfile(s.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::PlonkArith => "plonk",
            Profile::BoojumLike { .. } => "boojum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pass {
    BooleanReduce,
    LinearInline,
    Cse,
    DedupAssertions,
    ToProfile,
    Dce,
    /// Deliberately wrong: removes every BoolCheck. Exists to show that
    /// the preservation harness notices lost assertions.
    DropBoolChecks,
}

impl Pass {
    pub const DEFAULT: [Pass; 6] = [
        Pass::BooleanReduce,
        Pass::LinearInline,
        Pass::Cse,
        Pass::DedupAssertions,
        Pass::ToProfile,
        Pass::Dce,
    ];

    pub const ALL: [Pass; 7] = [
        Pass::BooleanReduce,
        Pass::LinearInline,
        Pass::Cse,
        Pass::DedupAssertions,
        Pass::ToProfile,
        Pass::Dce,
        Pass::DropBoolChecks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pass::BooleanReduce => "boolean_reduce",
            Pass::LinearInline => "linear_inline",
            Pass::Cse => "cse",
            Pass::DedupAssertions => "dedup_assertions",
            Pass::ToProfile => "to_profile",
            Pass::Dce => "dce",
            Pass::DropBoolChecks => "drop_bool_checks",
        }
    }

    pub fn parse(s: &str) -> Result<Self, OptError> {
        Pass::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| OptError::UnknownPass(s.to_string()))
    }

    /// Parses a comma separated list.
    pub fn parse_list(s: &str) -> Result<Vec<Pass>, OptError> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(Pass::parse)
            .collect()
    }
}

impl fmt::Display for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PassReport {
    pub pass: String,
    pub applications: usize,
    #[serde(serialize_with = "ser_stats")]
    pub before: GateStats,
    #[serde(serialize_with = "ser_stats")]
    pub after: GateStats,
}

fn ser_stats<S: serde::Serializer>(s: &GateStats, ser: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut m = ser.serialize_map(Some(s.len()))?;
    for (k, v) in s {
        m.serialize_entry(k.name(), v)?;
    }
    m.end()
}

/// The state passes transform: a gate list plus the wires that matter.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub field: FieldSpec,
    pub gates: Vec<GateInstance>,
    /// Observable outputs; passes that merge wires rename them here.
    pub outputs: Vec<WireId>,
    /// Wires known boolean because something outside the unit checks them.
    pub assumed_bool: BTreeSet<WireId>,
    pub next_wire: usize,
}

impl Unit {
    pub fn from_circuit(c: &Circuit) -> Self {
        let outputs = signature(c, None).map(|s| s.outputs).unwrap_or_default();
        Self {
            field: c.field().unwrap_or_default(),
            gates: gates_in_order(c),
            outputs,
            assumed_bool: BTreeSet::new(),
            next_wire: c.width(),
        }
    }

    /// The body of `p`, assuming its preamble checks.
    pub fn from_program(p: &Program) -> Self {
        Self {
            field: p.field,
            gates: gates_in_order(&p.body),
            outputs: p.outputs.clone(),
            assumed_bool: p.assumed_bool(),
            next_wire: p.next_wire.max(p.circuit().width()),
        }
    }

    pub fn circuit(&self) -> Circuit {
        Circuit::from_gates(self.gates.iter().cloned())
    }

    pub fn into_program(self, base: &Program) -> Program {
        Program {
            body: self.circuit(),
            outputs: self.outputs,
            next_wire: self.next_wire,
            ..base.clone()
        }
    }

    fn fresh(&mut self) -> WireId {
        let w = WireId(self.next_wire);
        self.next_wire += 1;
        w
    }
}

fn var(field: FieldSpec, w: WireId) -> Poly {
    Poly::var(field, w)
}

/// The value a functional gate writes to its (single) output, as a
/// polynomial in `sub` of its inputs.
fn gate_poly(g: &GateInstance, sub: &dyn Fn(WireId) -> Poly) -> Option<Poly> {
    let q = g.constants();
    let ins = g.inputs();
    match g.kind() {
        GateKind::Constant => Some(Poly::constant(q[0])),
        GateKind::Arith => {
            let (l, r) = (sub(ins[0]), sub(ins[1]));
            let num = l
                .scale(q[0])
                .add(&r.scale(q[1]))
                .add(&l.mul(&r).scale(q[3]))
                .add(&Poly::constant(q[4]));
            Some(num.scale(-q[2].inv().expect("qo is nonzero")))
        }
        GateKind::Fma => Some(sub(ins[0]).mul(&sub(ins[1])).scale(q[0]).add(&sub(ins[2]).scale(q[1]))),
        GateKind::LinComb(_) => {
            let field = q[0].spec();
            Some(
                ins.iter()
                    .zip(q)
                    .fold(Poly::zero(field), |acc, (&w, &c)| acc.add(&sub(w).scale(c))),
            )
        }
        _ => None,
    }
}

fn own_poly(g: &GateInstance, field: FieldSpec) -> Option<Poly> {
    gate_poly(g, &|w| var(field, w))
}

/// True when `p` only takes values 0 and 1 on boolean assignments.
fn boolean_valued(p: &Poly) -> bool {
    let vars: Vec<WireId> = p.vars().into_iter().collect();
    if vars.len() > 16 {
        return false;
    }
    let field = p.field();
    (0u32..1 << vars.len()).all(|bits| {
        let v = p
            .eval(|w| {
                let i = vars.iter().position(|&x| x == w)?;
                Some(field.elem(((bits >> i) & 1) as u64))
            })
            .expect("all variables assigned");
        v.is_zero() || v.is_one()
    })
}

fn coefficient(p: &Poly, key: &[WireId]) -> FieldElement {
    let mut key = key.to_vec();
    key.sort();
    p.terms()
        .find(|(k, _)| *k == key.as_slice())
        .map(|(_, c)| c)
        .unwrap_or(p.field().zero())
}

/// An Arith gate computing a multilinear `p` in at most two variables.
fn arith_from_poly(p: &Poly, fallback: WireId, o: WireId) -> GateInstance {
    let field = p.field();
    let vars: Vec<WireId> = p.vars().into_iter().collect();
    let (x, y) = match vars.len() {
        0 => (fallback, fallback),
        1 => (vars[0], vars[0]),
        _ => (vars[0], vars[1]),
    };
    let cx = if vars.is_empty() {
        field.zero()
    } else {
        coefficient(p, &[x])
    };
    let cy = if vars.len() == 2 {
        coefficient(p, &[y])
    } else {
        field.zero()
    };
    let cxy = if vars.len() == 2 {
        coefficient(p, &[x, y])
    } else {
        field.zero()
    };
    GateInstance::arith(x, y, o, [cx, cy, -field.one(), cxy, p.constant_term()]).expect("qo = -1")
}

fn boolean_sources(gates: &[GateInstance], assumed: &BTreeSet<WireId>) -> HashSet<WireId> {
    let mut out: HashSet<WireId> = assumed.iter().copied().collect();
    for g in gates {
        match g.kind() {
            GateKind::BoolCheck => {
                out.insert(g.inputs()[0]);
            }
            GateKind::IsZero => {
                out.insert(g.outputs()[0]);
            }
            _ => {}
        }
    }
    out
}

fn boolean_reduce_unit(u: &Unit) -> (Unit, usize) {
    let field = u.field;
    let checked = boolean_sources(&u.gates, &u.assumed_bool);
    // Until a gate says otherwise, a boolean wire is its own source.
    let mut expr: HashMap<WireId, Poly> = checked.iter().map(|&w| (w, var(field, w))).collect();
    let mut gates = Vec::with_capacity(u.gates.len());
    let mut applied = 0;
    for g in &u.gates {
        match g.kind() {
            GateKind::Arith => {
                let o = g.outputs()[0];
                if g.inputs().iter().all(|w| expr.contains_key(w)) {
                    let p = gate_poly(g, &|w| expr[&w].clone())
                        .expect("arith")
                        .reduce_boolean(&checked);
                    if p.vars().len() <= 2 {
                        if Some(&p) == own_poly(g, field).as_ref() {
                            gates.push(g.clone());
                        } else {
                            gates.push(arith_from_poly(&p, g.inputs()[0], o));
                            applied += 1;
                        }
                        expr.insert(o, p);
                        continue;
                    }
                }
                gates.push(g.clone());
            }
            GateKind::BoolCheck => {
                let w = g.inputs()[0];
                match expr.get(&w) {
                    Some(p) if *p != var(field, w) && boolean_valued(p) => applied += 1,
                    _ => gates.push(g.clone()),
                }
            }
            GateKind::Constant => {
                expr.insert(g.outputs()[0], Poly::constant(g.constants()[0]));
                gates.push(g.clone());
            }
            _ => gates.push(g.clone()),
        }
    }
    (Unit { gates, ..u.clone() }, applied)
}

/// `x1 = a·x0 + b` for Arith gates that are linear in one wire.
fn linear_producer(g: &GateInstance, field: FieldSpec) -> Option<(WireId, FieldElement, FieldElement)> {
    if g.tag() != GateTag::Arith {
        return None;
    }
    let p = own_poly(g, field)?;
    let (terms, b) = p.as_linear()?;
    match terms.as_slice() {
        [(x0, a)] => Some((*x0, *a, b)),
        _ => None,
    }
}

fn linear_inline_unit(u: &Unit) -> (Unit, usize) {
    let field = u.field;
    let mut gates = u.gates.clone();
    let mut total = 0;
    for _ in 0..=gates.len() {
        let producers: HashMap<WireId, (WireId, FieldElement, FieldElement)> = gates
            .iter()
            .filter_map(|g| linear_producer(g, field).map(|p| (g.outputs()[0], p)))
            .collect();
        let mut changed = 0;
        for g in gates.iter_mut() {
            if g.tag() != GateTag::Arith {
                continue;
            }
            let (mut l, mut r) = (g.inputs()[0], g.inputs()[1]);
            let c = g.constants();
            let (mut ql, mut qr, qo, mut qm, mut qc) = (c[0], c[1], c[2], c[3], c[4]);
            let mut hit = false;
            if let Some(&(x0, a, b)) = producers.get(&l) {
                (ql, qr, qm, qc) = (ql * a, qr + qm * b, qm * a, ql * b + qc);
                l = x0;
                hit = true;
            }
            if let Some(&(x0, a, b)) = producers.get(&r) {
                (ql, qr, qm, qc) = (ql + qm * b, qr * a, qm * a, qr * b + qc);
                r = x0;
                hit = true;
            }
            if hit {
                *g = GateInstance::arith(l, r, g.outputs()[0], [ql, qr, qo, qm, qc]).expect("qo kept");
                changed += 1;
            }
        }
        if changed == 0 {
            break;
        }
        total += changed;
    }
    (Unit { gates, ..u.clone() }, total)
}

fn cse_unit(u: &Unit) -> (Unit, usize) {
    type Key = (GateKind, Vec<WireId>, Vec<FieldElement>);
    let mut rename: HashMap<WireId, WireId> = HashMap::new();
    let mut seen: HashMap<Key, Vec<WireId>> = HashMap::new();
    let mut gates = Vec::with_capacity(u.gates.len());
    let mut applied = 0;
    for g in &u.gates {
        let g = g.map_wires(|w| *rename.get(&w).unwrap_or(&w));
        if matches!(g.kind(), GateKind::BoolCheck | GateKind::Lookup(_)) {
            gates.push(g);
            continue;
        }
        let key = (g.kind().clone(), g.inputs().to_vec(), g.constants().to_vec());
        match seen.get(&key) {
            Some(first) => {
                for (d, &f) in g.defined().zip(first) {
                    rename.insert(d, f);
                }
                applied += 1;
            }
            None => {
                seen.insert(key, g.defined().collect());
                gates.push(g);
            }
        }
    }
    let outputs = u.outputs.iter().map(|w| *rename.get(w).unwrap_or(w)).collect();
    (
        Unit {
            gates,
            outputs,
            ..u.clone()
        },
        applied,
    )
}

fn dedup_unit(u: &Unit) -> (Unit, usize) {
    let mut seen: HashSet<(GateKind, Vec<WireId>)> = HashSet::new();
    let mut gates = Vec::with_capacity(u.gates.len());
    let mut applied = 0;
    for g in &u.gates {
        if matches!(g.kind(), GateKind::BoolCheck | GateKind::Lookup(_))
            && !seen.insert((g.kind().clone(), g.inputs().to_vec()))
        {
            applied += 1;
            continue;
        }
        gates.push(g.clone());
    }
    (Unit { gates, ..u.clone() }, applied)
}

fn dce_gates(gates: &[GateInstance], outputs: &[WireId]) -> (Vec<GateInstance>, usize) {
    let mut live: HashSet<WireId> = outputs.iter().copied().collect();
    let mut keep = vec![false; gates.len()];
    for (i, g) in gates.iter().enumerate().rev() {
        if g.kind().is_assertion() || g.defined().any(|w| live.contains(&w)) {
            keep[i] = true;
            live.extend(g.inputs().iter().copied());
        }
    }
    let out: Vec<GateInstance> = gates
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(g, _)| g.clone())
        .collect();
    let removed = gates.len() - out.len();
    (out, removed)
}

fn dce_unit(u: &Unit) -> (Unit, usize) {
    let (gates, removed) = dce_gates(&u.gates, &u.outputs);
    (Unit { gates, ..u.clone() }, removed)
}

fn drop_bool_checks_unit(u: &Unit) -> (Unit, usize) {
    let before = u.gates.len();
    let gates: Vec<GateInstance> = u
        .gates
        .iter()
        .filter(|g| g.tag() != GateTag::BoolCheck)
        .cloned()
        .collect();
    let removed = before - gates.len();
    (Unit { gates, ..u.clone() }, removed)
}

/// Linear terms of a degree-one Arith gate, in input order, and its constant.
fn linear_terms(g: &GateInstance, field: FieldSpec) -> (Vec<(WireId, FieldElement)>, FieldElement) {
    let p = own_poly(g, field).expect("arith");
    let (l, r) = (g.inputs()[0], g.inputs()[1]);
    let mut terms = vec![(l, coefficient(&p, &[l]))];
    if r != l {
        terms.push((r, coefficient(&p, &[r])));
    }
    (terms, p.constant_term())
}

fn push_term(terms: &mut Vec<(WireId, FieldElement)>, w: WireId, c: FieldElement) {
    match terms.iter_mut().find(|(x, _)| *x == w) {
        Some(t) => t.1 = t.1 + c,
        None => terms.push((w, c)),
    }
}

struct Lowering<'a> {
    unit: &'a mut Unit,
    one: WireId,
    one_used: bool,
}

impl Lowering<'_> {
    fn one(&mut self) -> WireId {
        self.one_used = true;
        self.one
    }

    fn fma(&self, a: WireId, b: WireId, c: WireId, d: WireId, c0: FieldElement, c1: FieldElement) -> GateInstance {
        GateInstance::fma(a, b, c, d, c0, c1)
    }

    /// `o = Σ terms + k` as LinComb gates of width `lc`.
    fn lin_comb(
        &mut self,
        mut terms: Vec<(WireId, FieldElement)>,
        k: FieldElement,
        o: WireId,
        lc: usize,
    ) -> Vec<GateInstance> {
        let field = self.unit.field;
        terms.retain(|(_, c)| !c.is_zero());
        if !k.is_zero() || terms.is_empty() {
            let one = self.one();
            terms.push((one, k));
        }
        let mut out = Vec::new();
        let mut rest = terms.into_iter().peekable();
        let mut acc: Option<WireId> = None;
        while rest.peek().is_some() {
            let mut chunk: Vec<(WireId, FieldElement)> = acc.map(|w| (w, field.one())).into_iter().collect();
            while chunk.len() < lc {
                match rest.next() {
                    Some(t) => chunk.push(t),
                    None => break,
                }
            }
            let last = chunk.last().expect("nonempty").0;
            while chunk.len() < lc {
                chunk.push((last, field.zero()));
            }
            let dst = if rest.peek().is_some() { self.unit.fresh() } else { o };
            let (ws, cs): (Vec<WireId>, Vec<FieldElement>) = chunk.into_iter().unzip();
            out.push(GateInstance::lin_comb(ws, cs, dst).expect("width >= 1"));
            acc = Some(dst);
        }
        out
    }

    /// A nonlinear Arith gate as one to three FMA gates.
    fn fmas(&mut self, g: &GateInstance) -> Vec<GateInstance> {
        let field = self.unit.field;
        let p = own_poly(g, field).expect("arith");
        let (l, r, o) = (g.inputs()[0], g.inputs()[1], g.outputs()[0]);
        let m = coefficient(&p, &[l, r]);
        let mut lin = Vec::new();
        let (terms, k) = linear_terms(g, field);
        for (w, c) in terms {
            if !c.is_zero() {
                lin.push((w, c));
            }
        }
        if !k.is_zero() {
            let one = self.one();
            lin.push((one, k));
        }
        let (zero, unit) = (field.zero(), field.one());
        match lin.as_slice() {
            [] => vec![self.fma(l, r, l, o, m, zero)],
            [(x, c)] => vec![self.fma(l, r, *x, o, m, *c)],
            [(x1, c1), (x2, c2)] => {
                let one = self.one();
                let u = self.unit.fresh();
                vec![self.fma(*x1, one, *x2, u, *c1, *c2), self.fma(l, r, u, o, m, unit)]
            }
            [(x1, c1), (x2, c2), (x3, c3)] => {
                let one = self.one();
                let u1 = self.unit.fresh();
                let u2 = self.unit.fresh();
                vec![
                    self.fma(*x1, one, *x2, u1, *c1, *c2),
                    self.fma(*x3, one, u1, u2, *c3, unit),
                    self.fma(l, r, u2, o, m, unit),
                ]
            }
            _ => unreachable!("at most two inputs and a constant"),
        }
    }
}

fn to_profile_unit(u: &Unit, profile: Profile) -> (Unit, usize) {
    let lc = match profile {
        Profile::PlonkArith => return (u.clone(), 0),
        Profile::BoojumLike { lc_width } => lc_width.max(2),
    };
    let field = u.field;
    let mut unit = u.clone();
    let gates = std::mem::take(&mut unit.gates);

    let is_linear = |g: &GateInstance| g.tag() == GateTag::Arith && own_poly(g, field).is_some_and(|p| p.degree() <= 1);
    let mut uses: HashMap<WireId, usize> = HashMap::new();
    for g in &gates {
        for &w in g.inputs() {
            *uses.entry(w).or_default() += 1;
        }
    }
    let outputs: HashSet<WireId> = unit.outputs.iter().copied().collect();
    let mut consumer_linear: HashSet<WireId> = HashSet::new();
    for g in gates.iter().filter(|g| is_linear(g)) {
        consumer_linear.extend(g.inputs().iter().copied());
    }
    let by_output: HashMap<WireId, &GateInstance> = gates
        .iter()
        .filter(|g| is_linear(g))
        .map(|g| (g.outputs()[0], g))
        .collect();
    let inlinable = |w: WireId| {
        by_output.contains_key(&w) && uses.get(&w) == Some(&1) && !outputs.contains(&w) && consumer_linear.contains(&w)
    };

    fn expand(
        g: &GateInstance,
        field: FieldSpec,
        scale: FieldElement,
        by_output: &HashMap<WireId, &GateInstance>,
        inlinable: &dyn Fn(WireId) -> bool,
        terms: &mut Vec<(WireId, FieldElement)>,
        k: &mut FieldElement,
    ) {
        let (ts, c) = linear_terms(g, field);
        *k = *k + scale * c;
        for (w, coef) in ts {
            if inlinable(w) {
                expand(by_output[&w], field, scale * coef, by_output, inlinable, terms, k);
            } else {
                push_term(terms, w, scale * coef);
            }
        }
    }

    let existing_one = gates
        .iter()
        .find(|g| g.tag() == GateTag::Constant && g.constants()[0].is_one())
        .map(|g| g.outputs()[0]);
    let one = existing_one.unwrap_or(WireId(unit.next_wire));
    if existing_one.is_none() {
        unit.next_wire += 1;
    }
    let mut low = Lowering {
        unit: &mut unit,
        one,
        one_used: false,
    };
    let mut out = Vec::new();
    let mut applied = 0;
    for g in &gates {
        if g.tag() != GateTag::Arith {
            out.push(g.clone());
            continue;
        }
        applied += 1;
        if is_linear(g) {
            if inlinable(g.outputs()[0]) {
                continue;
            }
            let mut terms = Vec::new();
            let mut k = field.zero();
            expand(g, field, field.one(), &by_output, &inlinable, &mut terms, &mut k);
            out.extend(low.lin_comb(terms, k, g.outputs()[0], lc));
        } else {
            out.extend(low.fmas(g));
        }
    }
    let one_used = low.one_used;
    if one_used {
        out.retain(|g| !(g.tag() == GateTag::Constant && g.outputs()[0] == one));
        out.insert(0, GateInstance::constant(one, field.one()));
    } else if existing_one.is_none() {
        unit.next_wire -= 1;
    }
    unit.gates = out;
    (unit, applied)
}

impl Pass {
    pub fn apply(self, u: &Unit, profile: Profile) -> (Unit, usize) {
        match self {
            Pass::BooleanReduce => boolean_reduce_unit(u),
            Pass::LinearInline => linear_inline_unit(u),
            Pass::Cse => cse_unit(u),
            Pass::DedupAssertions => dedup_unit(u),
            Pass::ToProfile => to_profile_unit(u, profile),
            Pass::Dce => dce_unit(u),
            Pass::DropBoolChecks => drop_bool_checks_unit(u),
        }
    }
}

/// Rewrites Arith gates over boolean wires into multilinear form and drops
/// boolean checks that the rewriting proves redundant.
///
/// Every fact must be constrained boolean inside `c`.
pub fn boolean_reduce(c: &Circuit, facts: &BTreeSet<WireId>) -> Result<Circuit, OptError> {
    let unit = Unit::from_circuit(c);
    let constrained = boolean_sources(&unit.gates, &BTreeSet::new());
    if let Some(&w) = facts.iter().find(|w| !constrained.contains(w)) {
        return Err(OptError::UnconstrainedFact(w));
    }
    Ok(boolean_reduce_unit(&unit).0.circuit())
}

/// Substitutes linear single-wire producers into the Arith gates that read
/// them. Producers stay; [`dce`] removes the dead ones.
pub fn linear_inline(c: &Circuit) -> Circuit {
    linear_inline_unit(&Unit::from_circuit(c)).0.circuit()
}

/// Merges identical functional gates; the first occurrence wins.
pub fn cse(c: &Circuit) -> Circuit {
    cse_unit(&Unit::from_circuit(c)).0.circuit()
}

pub fn dedup_assertions(c: &Circuit) -> Circuit {
    dedup_unit(&Unit::from_circuit(c)).0.circuit()
}

pub fn to_profile(c: &Circuit, p: Profile) -> Circuit {
    to_profile_unit(&Unit::from_circuit(c), p).0.circuit()
}

/// Removes gates that neither feed `sig`'s outputs nor an assertion.
pub fn dce(c: &Circuit, sig: &CircuitSignature) -> Circuit {
    Circuit::from_gates(dce_gates(&gates_in_order(c), &sig.outputs).0)
}

const MAX_ROUNDS: usize = 10;

/// Runs `passes` in order, repeatedly, until a round changes nothing.
pub fn optimize_unit(u: &Unit, profile: Profile, passes: &[Pass]) -> (Unit, Vec<PassReport>) {
    let mut reports: Vec<PassReport> = passes
        .iter()
        .map(|p| PassReport {
            pass: p.name().to_string(),
            applications: 0,
            before: GateStats::new(),
            after: GateStats::new(),
        })
        .collect();
    let mut cur = u.clone();
    for round in 0..MAX_ROUNDS {
        let start = cur.clone();
        for (pass, report) in passes.iter().zip(reports.iter_mut()) {
            let before = stats(&cur.circuit());
            let (next, n) = pass.apply(&cur, profile);
            if round == 0 {
                report.before = before;
            }
            report.applications += n;
            report.after = stats(&next.circuit());
            cur = next;
        }
        if cur == start {
            break;
        }
    }
    (cur, reports)
}

/// Optimizes a whole circuit; outputs come from its default signature.
pub fn optimize(
    c: &Circuit,
    profile: Profile,
    passes: Option<&[Pass]>,
) -> Result<(Circuit, Vec<PassReport>), OptError> {
    let (u, reports) = optimize_unit(&Unit::from_circuit(c), profile, passes.unwrap_or(&Pass::DEFAULT));
    let out = u.circuit();
    finish_checks(&out, &BTreeSet::new())?;
    Ok((out, reports))
}

/// Optimizes the body of `p` under its preamble's checks.
pub fn optimize_program(
    p: &Program,
    profile: Profile,
    passes: Option<&[Pass]>,
) -> Result<(Program, Vec<PassReport>), OptError> {
    let (u, reports) = optimize_unit(&Unit::from_program(p), profile, passes.unwrap_or(&Pass::DEFAULT));
    let out = u.into_program(p);
    finish_checks(&out.circuit(), &out.bool_wires)?;
    Ok((out, reports))
}

fn finish_checks(c: &Circuit, bool_wires: &BTreeSet<WireId>) -> Result<(), OptError> {
    let report = validate(c);
    if !report.is_ok() {
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(OptError::Invalid(msgs.join("; ")));
    }
    let vs = check_discipline(c, bool_wires);
    if vs.is_empty() {
        Ok(())
    } else {
        Err(OptError::Discipline(vs))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DisciplineViolation {
    #[error("chunk {wire} of decomposition #{gate} has no lookup")]
    UncheckedChunk { gate: usize, wire: WireId },
    #[error("boolean wire {0} is not provably boolean")]
    UnconstrainedBool(WireId),
}

/// The static soundness check: every Decompose output is looked up, and
/// every wire in `bool_wires` that still occurs is provably boolean.
///
/// A wire is provably boolean if a BoolCheck reads it, an IsZero defines
/// it, or its value is a polynomial in such wires that only yields 0 or 1
/// on boolean assignments.
pub fn check_discipline(c: &Circuit, bool_wires: &BTreeSet<WireId>) -> Vec<DisciplineViolation> {
    let gates = c.gates();
    let field = c.field().unwrap_or_default();
    let looked_up: HashSet<WireId> = gates
        .iter()
        .filter(|g| g.tag() == GateTag::Lookup)
        .flat_map(|g| g.inputs().iter().copied())
        .collect();
    let mut out = Vec::new();
    for (i, g) in gates.iter().enumerate() {
        if g.tag() == GateTag::Decompose {
            for &w in g.outputs() {
                if !looked_up.contains(&w) {
                    out.push(DisciplineViolation::UncheckedChunk { gate: i, wire: w });
                }
            }
        }
    }
    let sources = boolean_sources(
        &gates.iter().map(|g| (*g).clone()).collect::<Vec<_>>(),
        &BTreeSet::new(),
    );
    let mut boolean = sources.clone();
    // Wires expressible as polynomials over the sources.
    let mut expr: HashMap<WireId, Poly> = sources.iter().map(|&w| (w, var(field, w))).collect();
    for g in &gates {
        if own_poly(g, field).is_none() || !g.inputs().iter().all(|w| expr.contains_key(w)) {
            continue;
        }
        let o = g.outputs()[0];
        if sources.contains(&o) {
            continue;
        }
        let p = gate_poly(g, &|w| expr[&w].clone())
            .expect("functional gate")
            .reduce_boolean(&sources);
        if boolean_valued(&p) {
            boolean.insert(o);
        }
        expr.insert(o, p);
    }
    let present: HashSet<WireId> = gates.iter().flat_map(|g| g.all_wires()).collect();
    for &w in bool_wires {
        if present.contains(&w) && !boolean.contains(&w) {
            out.push(DisciplineViolation::UnconstrainedBool(w));
        }
    }
    out
}

/// A single wide gate: identities over slots, each slot a circuit wire.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomGate {
    pub field: FieldSpec,
    /// Witness map: slot `i` holds the value of circuit wire `slots[i]`.
    pub slots: Vec<WireId>,
    pub identities: Vec<Identity>,
    /// Each identity as a polynomial over circuit wires.
    pub polys: Vec<Poly>,
    pub max_degree: usize,
    pub bound: usize,
}

impl CustomGate {
    pub fn width(&self) -> usize {
        self.slots.len()
    }

    pub fn cv(&self) -> ConstrainedVector {
        ConstrainedVector::new(self.slots.clone(), vec![], self.identities.clone()).expect("slots resolve")
    }

    /// The gate as a system over circuit wires.
    pub fn constraint_system(&self) -> ConstraintSystem {
        let mut cs = ConstraintSystem::empty(self.field);
        cs.push_cv(self.cv());
        cs
    }

    /// The same gate with slot `i` renamed to wire `i`, for enumeration
    /// over exactly `width` wires.
    pub fn compact_system(&self) -> ConstraintSystem {
        let mut cs = ConstraintSystem::empty(self.field);
        let cv = ConstrainedVector::new((0..self.width()).map(WireId).collect(), vec![], self.identities.clone())
            .expect("slots resolve");
        cs.push_cv(cv);
        cs
    }
}

/// Builds a gate's polynomial from a lookup of its inputs' expressions.
type Compose<'a> = dyn Fn(&dyn Fn(WireId) -> Poly) -> Poly + 'a;

struct Flattener {
    field: FieldSpec,
    bound: usize,
    expr: HashMap<WireId, Poly>,
    slots: Vec<WireId>,
    polys: Vec<Poly>,
}

impl Flattener {
    fn slot(&mut self, w: WireId) {
        if !self.slots.contains(&w) {
            self.slots.push(w);
        }
    }

    fn get(&self, w: WireId) -> Poly {
        self.expr.get(&w).cloned().unwrap_or_else(|| var(self.field, w))
    }

    /// Makes `w` a slot with its own defining identity.
    fn keep(&mut self, w: WireId) {
        let e = self.get(w);
        let v = var(self.field, w);
        if e != v {
            self.polys.push(e.sub(&v));
            self.expr.insert(w, v);
        }
        self.slot(w);
    }

    /// Composes `build` over the inputs' expressions, keeping the highest
    /// degree inputs as slots until the result fits the bound.
    fn fit(&mut self, g: &GateInstance, inputs: &[WireId], build: &Compose<'_>) -> Result<Poly, OptError> {
        loop {
            let p = build(&|w| self.get(w));
            if p.degree() <= self.bound {
                return Ok(p);
            }
            let candidate = inputs
                .iter()
                .copied()
                .filter(|&w| self.get(w) != var(self.field, w))
                .max_by_key(|&w| (self.get(w).degree(), std::cmp::Reverse(w)));
            match candidate {
                Some(w) => self.keep(w),
                None => {
                    return Err(OptError::GateAboveBound {
                        gate: g.to_string(),
                        degree: p.degree(),
                        bound: self.bound,
                    })
                }
            }
        }
    }
}

/// Flattens `c` into one custom gate whose identities have degree at most
/// `max_degree`, with `c`'s default signature.
pub fn flatten(c: &Circuit, max_degree: usize) -> Result<CustomGate, OptError> {
    let sig = signature(c, None).map_err(|e| OptError::Invalid(e.to_string()))?;
    flatten_with(c, &sig, max_degree)
}

pub fn flatten_with(c: &Circuit, sig: &CircuitSignature, max_degree: usize) -> Result<CustomGate, OptError> {
    if max_degree < 2 {
        return Err(OptError::BoundTooSmall(max_degree));
    }
    let field = c.field().unwrap_or_default();
    let mut fl = Flattener {
        field,
        bound: max_degree,
        expr: HashMap::new(),
        slots: Vec::new(),
        polys: Vec::new(),
    };
    for &w in &sig.inputs {
        fl.slot(w);
    }
    for g in c.gates() {
        let ins = g.inputs().to_vec();
        match g.kind() {
            GateKind::Lookup(t) => return Err(OptError::LookupInFlatten(t.name().to_string())),
            GateKind::Constant | GateKind::Arith | GateKind::Fma | GateKind::LinComb(_) => {
                let p = fl.fit(g, &ins, &|sub| gate_poly(g, sub).expect("functional gate"))?;
                fl.expr.insert(g.outputs()[0], p);
            }
            GateKind::BoolCheck => {
                let p = fl.fit(g, &ins, &|sub| {
                    let b = sub(ins[0]);
                    b.mul(&b).sub(&b)
                })?;
                fl.polys.push(p);
            }
            GateKind::IsZero => {
                let (r, o) = (g.aux()[0], g.outputs()[0]);
                fl.slot(r);
                fl.slot(o);
                let (vr, vo) = (var(field, r), var(field, o));
                let one = Poly::constant(field.one());
                let inv = fl.fit(g, &ins, &|sub| vo.add(&sub(ins[0]).mul(&vr)).sub(&one))?;
                let prod = fl.fit(g, &ins, &|sub| sub(ins[0]).mul(&vo))?;
                fl.polys.push(inv);
                fl.polys.push(prod);
                fl.polys.push(vo.mul(&vo).sub(&vo));
            }
            GateKind::Decompose { bits, .. } => {
                let two = field.elem(2);
                let mut sum = Poly::zero(field);
                for (i, &n) in g.outputs().iter().enumerate() {
                    fl.slot(n);
                    sum = sum.add(&var(field, n).scale(two.pow(*bits as u64 * i as u64)));
                }
                let p = fl.fit(g, &ins, &|sub| sum.sub(&sub(ins[0])))?;
                fl.polys.push(p);
            }
        }
    }
    for &o in &sig.outputs {
        fl.keep(o);
    }
    let identities: Vec<Identity> = fl.polys.iter().map(|p| p.to_identity(&fl.slots)).collect();
    let max_degree_seen = fl.polys.iter().map(Poly::degree).max().unwrap_or(0);
    Ok(CustomGate {
        field,
        slots: fl.slots,
        identities,
        polys: fl.polys,
        max_degree: max_degree_seen,
        bound: max_degree,
    })
}
