//! JSON forms of circuits, traces, constraint systems and custom gates.
//! Field elements are decimal strings.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::circuit::{Circuit, GateInstance, GateKind, LookupTable, WireId};
use crate::constraints::{ConstraintSystem, Identity};
use crate::field::{FieldElement, FieldSpec};
use crate::optimizer::CustomGate;
use crate::witness::Trace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed JSON document: {0}")]
pub struct JsonError(pub String);

fn err(e: impl ToString) -> JsonError {
    JsonError(e.to_string())
}

fn dec(v: &FieldElement) -> String {
    v.value().to_string()
}

fn ids(ws: &[WireId]) -> Vec<usize> {
    ws.iter().map(|w| w.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum NodeDoc {
    Nil,
    Gate(GateDoc),
    Seq { left: Box<NodeDoc>, right: Box<NodeDoc> },
    Par { left: Box<NodeDoc>, right: Box<NodeDoc> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GateDoc {
    gate: String,
    inputs: Vec<usize>,
    aux: Vec<usize>,
    outputs: Vec<usize>,
    constants: Vec<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CircuitDoc {
    field_modulus: String,
    root: NodeDoc,
    tables: BTreeMap<String, Vec<Vec<u64>>>,
}

fn gate_doc(g: &GateInstance) -> GateDoc {
    let payload = match g.kind() {
        GateKind::LinComb(k) => json!({ "width": k }),
        GateKind::Lookup(t) => json!({ "table": t.name() }),
        GateKind::Decompose { chunks, bits } => json!({ "chunks": chunks, "bits": bits }),
        _ => Value::Null,
    };
    GateDoc {
        gate: g.tag().name().to_string(),
        inputs: ids(g.inputs()),
        aux: ids(g.aux()),
        outputs: ids(g.outputs()),
        constants: g.constants().iter().map(dec).collect(),
        payload,
    }
}

fn node_doc(c: &Circuit) -> NodeDoc {
    match c {
        Circuit::Nil => NodeDoc::Nil,
        Circuit::Gate(g) => NodeDoc::Gate(gate_doc(g)),
        Circuit::Seq(l, r) => NodeDoc::Seq {
            left: Box::new(node_doc(l)),
            right: Box::new(node_doc(r)),
        },
        Circuit::Par(l, r) => NodeDoc::Par {
            left: Box::new(node_doc(l)),
            right: Box::new(node_doc(r)),
        },
    }
}

pub fn circuit_to_json(c: &Circuit, field: FieldSpec) -> Value {
    let tables = c
        .tables()
        .into_iter()
        .map(|(name, t)| (name, t.rows().map(<[u64]>::to_vec).collect()))
        .collect();
    let doc = CircuitDoc {
        field_modulus: field.modulus().to_string(),
        root: node_doc(c),
        tables,
    };
    serde_json::to_value(doc).expect("serializable")
}

fn payload_usize(p: &Value, key: &str) -> Result<usize, JsonError> {
    p.get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| err(format!("gate payload lacks {key}")))
}

fn parse_node(
    n: &NodeDoc,
    field: FieldSpec,
    tables: &BTreeMap<String, Arc<LookupTable>>,
) -> Result<Circuit, JsonError> {
    let wires = |v: &[usize]| v.iter().map(|&w| WireId(w)).collect::<Vec<_>>();
    Ok(match n {
        NodeDoc::Nil => Circuit::Nil,
        NodeDoc::Seq { left, right } => {
            Circuit::seq(parse_node(left, field, tables)?, parse_node(right, field, tables)?)
        }
        NodeDoc::Par { left, right } => {
            Circuit::par(parse_node(left, field, tables)?, parse_node(right, field, tables)?)
        }
        NodeDoc::Gate(g) => {
            let kind = match g.gate.as_str() {
                "Constant" => GateKind::Constant,
                "Arith" => GateKind::Arith,
                "BoolCheck" => GateKind::BoolCheck,
                "IsZero" => GateKind::IsZero,
                "FMA" | "Fma" => GateKind::Fma,
                "LinComb" => GateKind::LinComb(payload_usize(&g.payload, "width")?),
                "Lookup" => {
                    let name = g
                        .payload
                        .get("table")
                        .and_then(Value::as_str)
                        .ok_or_else(|| err("lookup payload lacks table"))?;
                    GateKind::Lookup(
                        tables
                            .get(name)
                            .cloned()
                            .ok_or_else(|| err(format!("unknown table {name}")))?,
                    )
                }
                "Decompose" => GateKind::Decompose {
                    chunks: payload_usize(&g.payload, "chunks")?,
                    bits: payload_usize(&g.payload, "bits")? as u32,
                },
                other => return Err(err(format!("unknown gate kind {other}"))),
            };
            let constants = g
                .constants
                .iter()
                .map(|s| field.parse(s).map_err(err))
                .collect::<Result<Vec<_>, _>>()?;
            Circuit::Gate(
                GateInstance::new(kind, wires(&g.inputs), wires(&g.aux), wires(&g.outputs), constants).map_err(err)?,
            )
        }
    })
}

pub fn circuit_from_json(v: &Value) -> Result<(Circuit, FieldSpec), JsonError> {
    let doc: CircuitDoc = serde_json::from_value(v.clone()).map_err(err)?;
    let field = FieldSpec::new(doc.field_modulus.parse().map_err(err)?).map_err(err)?;
    let mut tables = BTreeMap::new();
    for (name, rows) in doc.tables {
        let arity = rows.first().map_or(0, Vec::len);
        let t = LookupTable::new(name.clone(), arity, rows).map_err(err)?;
        tables.insert(name, Arc::new(t));
    }
    Ok((parse_node(&doc.root, field, &tables)?, field))
}

pub fn trace_to_json(t: &Trace) -> Value {
    Value::Array(
        t.slots()
            .iter()
            .map(|s| s.as_ref().map_or(Value::Null, |v| Value::String(dec(v))))
            .collect(),
    )
}

pub fn trace_from_json(v: &Value, field: FieldSpec) -> Result<Trace, JsonError> {
    let arr = v.as_array().ok_or_else(|| err("trace must be an array"))?;
    let slots = arr
        .iter()
        .map(|s| match s {
            Value::Null => Ok(None),
            Value::String(s) => field.parse(s).map(Some).map_err(err),
            other => Err(err(format!("bad trace slot {other}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trace::from_slots(field, slots))
}

fn identity_json(id: &Identity) -> Value {
    json!({
        "name": id.name,
        "polynomial": id.to_string(),
        "degree": id.degree(),
        "monomials": id.monomials.iter().map(|m| json!({
            "coeff": dec(&m.coeff),
            "const_slots": m.const_slots,
            "wire_slots": m.wire_slots,
        })).collect::<Vec<_>>(),
    })
}

pub fn constraint_system_to_json(cs: &ConstraintSystem) -> Value {
    json!({
        "field_modulus": cs.field.modulus().to_string(),
        "width": cs.width,
        "constrained_vectors": cs.cvs.iter().map(|cv| json!({
            "wires": ids(&cv.wires),
            "constants": cv.constants.iter().map(dec).collect::<Vec<_>>(),
            "identities": cv.identities.iter().map(identity_json).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "lookups": cs.lookups.iter().map(|l| json!({
            "wires": ids(&l.wires),
            "table": l.table,
        })).collect::<Vec<_>>(),
    })
}

pub fn custom_gate_to_json(g: &CustomGate) -> Value {
    json!({
        "field_modulus": g.field.modulus().to_string(),
        "bound": g.bound,
        "width": g.width(),
        "max_degree": g.max_degree,
        "slots": ids(&g.slots),
        "identities": g.identities.iter().zip(&g.polys).map(|(id, p)| {
            let mut v = identity_json(id);
            v["over_wires"] = Value::String(p.to_string());
            v
        }).collect::<Vec<_>>(),
    })
}
