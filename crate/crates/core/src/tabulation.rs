//! Fixed-geometry Plonkish tables with selector columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{LookupTable, WireId};
use crate::constraints::{eval_identity, ConstrainedVector, ConstraintSystem, Identity, Monomial};
use crate::field::{FieldElement, FieldSpec};
use crate::witness::Trace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("constrained vector #{index} has {width} wires, above the maximum {max}")]
    TooWide { index: usize, width: usize, max: usize },
    #[error("malformed table document: {0}")]
    Malformed(String),
}

/// Column layout and the global identity set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableGeometry {
    pub wire_columns: usize,
    /// Names of all constant columns; the selector columns come last.
    pub constant_columns: Vec<String>,
    /// Number of non-selector constant columns.
    pub plain_constants: usize,
    /// `(selector column, identity)`; identities read row constants by
    /// their plain slots.
    pub identities: Vec<(usize, Identity)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub wires: Vec<WireId>,
    pub constants: Vec<FieldElement>,
}

/// A lookup of some row's wire columns in a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupEntry {
    pub row: usize,
    pub columns: Vec<usize>,
    pub table: String,
    pub selector: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlonkishTable {
    pub field: FieldSpec,
    pub geometry: TableGeometry,
    pub rows: Vec<Row>,
    pub lookups: Vec<LookupEntry>,
    pub tables: BTreeMap<String, Arc<LookupTable>>,
}

impl PlonkishTable {
    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.geometry.wire_columns).map(|i| format!("w{i}")).collect();
        names.extend(self.geometry.constant_columns.iter().cloned());
        names
    }

    /// Row constants excluding selectors.
    pub fn row_constants(&self, row: usize) -> &[FieldElement] {
        &self.rows[row].constants[..self.geometry.plain_constants]
    }

    /// Selector values of a row, in selector-column order.
    pub fn row_selectors(&self, row: usize) -> Vec<bool> {
        self.rows[row].constants[self.geometry.plain_constants..]
            .iter()
            .map(|c| c.is_one())
            .collect()
    }
}

pub fn tabulate(cs: &ConstraintSystem) -> PlonkishTable {
    tabulate_with(cs, None).expect("no width limit")
}

/// Tabulates `cs`: one row per constrained vector, identical identities
/// sharing a selector, lookups attached to rows that already hold their
/// wires or else given rows of their own.
pub fn tabulate_with(cs: &ConstraintSystem, max_width: Option<usize>) -> Result<PlonkishTable, TableError> {
    let field = cs.field;
    let mut width = cs.cvs.iter().map(|cv| cv.wires.len()).max().unwrap_or(0);
    if let Some(max) = max_width {
        if let Some((index, cv)) = cs.cvs.iter().enumerate().find(|(_, cv)| cv.wires.len() > max) {
            return Err(TableError::TooWide {
                index,
                width: cv.wires.len(),
                max,
            });
        }
    }
    width = width.max(cs.lookups.iter().map(|l| l.wires.len()).max().unwrap_or(0));
    let plain = cs.cvs.iter().map(|cv| cv.constants.len()).max().unwrap_or(0);

    let mut shapes: Vec<Identity> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut row_shapes: Vec<Vec<usize>> = Vec::new();
    for cv in &cs.cvs {
        let mut mine = Vec::new();
        for id in &cv.identities {
            let index = match shapes.iter().position(|s| s == id) {
                Some(i) => i,
                None => {
                    let base = format!("q_{}", id.name);
                    let mut name = base.clone();
                    let mut n = 2;
                    while names.contains(&name) {
                        name = format!("{base}_{n}");
                        n += 1;
                    }
                    names.push(name);
                    shapes.push(id.clone());
                    shapes.len() - 1
                }
            };
            if !mine.contains(&index) {
                mine.push(index);
            }
        }
        row_shapes.push(mine);
    }

    let mut constant_columns: Vec<String> = (0..plain).map(|i| format!("c{i}")).collect();
    constant_columns.extend(names);
    let geometry = TableGeometry {
        wire_columns: width,
        constant_columns,
        plain_constants: plain,
        identities: shapes.into_iter().enumerate().map(|(i, id)| (plain + i, id)).collect(),
    };
    let n_const = geometry.constant_columns.len();
    let pad_wires = |ws: &[WireId]| {
        let mut ws = ws.to_vec();
        let first = ws.first().copied().unwrap_or(WireId(0));
        ws.resize(width, first);
        ws
    };

    let mut rows: Vec<Row> = cs
        .cvs
        .iter()
        .zip(&row_shapes)
        .map(|(cv, shapes)| {
            let mut constants = cv.constants.clone();
            constants.resize(n_const, field.zero());
            for &s in shapes {
                constants[plain + s] = field.one();
            }
            Row {
                wires: pad_wires(&cv.wires),
                constants,
            }
        })
        .collect();

    let mut lookups = Vec::new();
    let mut has_lookup = vec![false; rows.len()];
    for l in &cs.lookups {
        let host = (0..cs.cvs.len()).find(|&r| !has_lookup[r] && l.wires.iter().all(|w| cs.cvs[r].wires.contains(w)));
        let (row, columns) = match host {
            Some(r) => {
                let cols = l
                    .wires
                    .iter()
                    .map(|w| cs.cvs[r].wires.iter().position(|x| x == w).expect("contained"))
                    .collect();
                (r, cols)
            }
            None => {
                rows.push(Row {
                    wires: pad_wires(&l.wires),
                    constants: vec![field.zero(); n_const],
                });
                has_lookup.push(false);
                (rows.len() - 1, (0..l.wires.len()).collect())
            }
        };
        has_lookup[row] = true;
        lookups.push(LookupEntry {
            row,
            columns,
            table: l.table.clone(),
            selector: true,
        });
    }

    Ok(PlonkishTable {
        field,
        geometry,
        rows,
        lookups,
        tables: cs.tables.clone(),
    })
}

/// Why a trace does not satisfy a table.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableUnsat {
    #[error("row {row}: wire {wire} is not set")]
    UnsetWire { row: usize, wire: WireId },
    #[error("row {row}: selector {selector} enables an identity that evaluates to {value}")]
    Identity {
        row: usize,
        selector: String,
        value: FieldElement,
    },
    #[error("row {row}: {values:?} not in table {table}")]
    Lookup {
        row: usize,
        table: String,
        values: Vec<FieldElement>,
    },
    #[error("unknown table {0}")]
    UnknownTable(String),
}

pub fn check_plonkish(t: &PlonkishTable, trace: &Trace) -> Result<(), TableUnsat> {
    let mut values: Vec<Vec<FieldElement>> = Vec::with_capacity(t.rows.len());
    for (r, row) in t.rows.iter().enumerate() {
        let mut vals = Vec::with_capacity(row.wires.len());
        for &w in &row.wires {
            vals.push(trace.get(w).ok_or(TableUnsat::UnsetWire { row: r, wire: w })?);
        }
        for (sel, id) in &t.geometry.identities {
            let s = row.constants[*sel];
            if s.is_zero() {
                continue;
            }
            let v = s * eval_identity(id, &vals, &row.constants).expect("geometry slots resolve");
            if !v.is_zero() {
                return Err(TableUnsat::Identity {
                    row: r,
                    selector: t.geometry.constant_columns[*sel].clone(),
                    value: v,
                });
            }
        }
        values.push(vals);
    }
    for l in t.lookups.iter().filter(|l| l.selector) {
        let table = t
            .tables
            .get(&l.table)
            .ok_or_else(|| TableUnsat::UnknownTable(l.table.clone()))?;
        let tuple: Vec<FieldElement> = l.columns.iter().map(|&c| values[l.row][c]).collect();
        if !table.contains(&tuple) {
            return Err(TableUnsat::Lookup {
                row: l.row,
                table: l.table.clone(),
                values: tuple,
            });
        }
    }
    Ok(())
}

/// Every enabled identity holds on every row, and every selected lookup
/// tuple is in its table.
pub fn sat_plonkish(t: &PlonkishTable, trace: &Trace) -> bool {
    check_plonkish(t, trace).is_ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct MonomialDoc {
    coeff: String,
    const_slots: Vec<usize>,
    wire_slots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct IdentityDoc {
    selector: String,
    name: String,
    polynomial: String,
    monomials: Vec<MonomialDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RowDoc {
    wires: Vec<usize>,
    constants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct LookupDoc {
    row: usize,
    columns: Vec<usize>,
    table: String,
    selector: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TableDoc {
    field_modulus: String,
    wire_columns: usize,
    plain_constant_columns: usize,
    constant_columns: Vec<String>,
    identities: Vec<IdentityDoc>,
    rows: Vec<RowDoc>,
    lookup: Vec<LookupDoc>,
    tables: BTreeMap<String, Vec<Vec<String>>>,
}

fn dec(v: FieldElement) -> String {
    v.value().to_string()
}

pub fn export_json(t: &PlonkishTable) -> String {
    let g = &t.geometry;
    let doc = TableDoc {
        field_modulus: t.field.modulus().to_string(),
        wire_columns: g.wire_columns,
        plain_constant_columns: g.plain_constants,
        constant_columns: g.constant_columns.clone(),
        identities: g
            .identities
            .iter()
            .map(|(sel, id)| IdentityDoc {
                selector: g.constant_columns[*sel].clone(),
                name: id.name.clone(),
                polynomial: id.render(|i| format!("w{i}"), |i| g.constant_columns[i].clone()),
                monomials: id
                    .monomials
                    .iter()
                    .map(|m| MonomialDoc {
                        coeff: dec(m.coeff),
                        const_slots: m.const_slots.clone(),
                        wire_slots: m.wire_slots.clone(),
                    })
                    .collect(),
            })
            .collect(),
        rows: t
            .rows
            .iter()
            .map(|r| RowDoc {
                wires: r.wires.iter().map(|w| w.0).collect(),
                constants: r.constants.iter().map(|&c| dec(c)).collect(),
            })
            .collect(),
        lookup: t
            .lookups
            .iter()
            .map(|l| LookupDoc {
                row: l.row,
                columns: l.columns.clone(),
                table: l.table.clone(),
                selector: l.selector as u8,
            })
            .collect(),
        tables: t
            .tables
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    v.rows().map(|r| r.iter().map(u64::to_string).collect()).collect(),
                )
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("serializable")
}

fn malformed(e: impl ToString) -> TableError {
    TableError::Malformed(e.to_string())
}

pub fn parse_json(text: &str) -> Result<PlonkishTable, TableError> {
    let doc: TableDoc = serde_json::from_str(text).map_err(malformed)?;
    let modulus: u64 = doc.field_modulus.parse().map_err(malformed)?;
    let field = FieldSpec::new(modulus).map_err(malformed)?;
    let elem = |s: &str| field.parse(s).map_err(malformed);
    let mut identities = Vec::new();
    for id in &doc.identities {
        let sel = doc
            .constant_columns
            .iter()
            .position(|c| *c == id.selector)
            .ok_or_else(|| malformed(format!("unknown selector {}", id.selector)))?;
        let monomials = id
            .monomials
            .iter()
            .map(|m| {
                Ok(Monomial::new(
                    elem(&m.coeff)?,
                    m.const_slots.clone(),
                    m.wire_slots.clone(),
                ))
            })
            .collect::<Result<Vec<_>, TableError>>()?;
        identities.push((sel, Identity::named(id.name.clone(), monomials)));
    }
    let rows = doc
        .rows
        .iter()
        .map(|r| {
            Ok(Row {
                wires: r.wires.iter().map(|&w| WireId(w)).collect(),
                constants: r.constants.iter().map(|c| elem(c)).collect::<Result<_, _>>()?,
            })
        })
        .collect::<Result<Vec<_>, TableError>>()?;
    let mut tables = BTreeMap::new();
    for (name, rows) in &doc.tables {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|v| v.parse::<u64>().map_err(malformed)).collect())
            .collect::<Result<Vec<Vec<u64>>, _>>()?;
        let arity = rows.first().map_or(0, Vec::len);
        let table = LookupTable::new(name.clone(), arity, rows).map_err(malformed)?;
        tables.insert(name.clone(), Arc::new(table));
    }
    Ok(PlonkishTable {
        field,
        geometry: TableGeometry {
            wire_columns: doc.wire_columns,
            constant_columns: doc.constant_columns,
            plain_constants: doc.plain_constant_columns,
            identities,
        },
        rows,
        lookups: doc
            .lookup
            .iter()
            .map(|l| LookupEntry {
                row: l.row,
                columns: l.columns.clone(),
                table: l.table.clone(),
                selector: l.selector != 0,
            })
            .collect(),
        tables,
    })
}

/// One line per row: wire indices, then constants as canonical decimals.
pub fn export_csv(t: &PlonkishTable) -> String {
    let mut out = t.column_names().join(",");
    out.push('\n');
    for r in &t.rows {
        let cells: Vec<String> = r
            .wires
            .iter()
            .map(|w| w.0.to_string())
            .chain(r.constants.iter().map(|&c| dec(c)))
            .collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// A constrained vector rebuilt from a table row, for debugging.
pub fn row_cv(t: &PlonkishTable, row: usize) -> ConstrainedVector {
    let r = &t.rows[row];
    let ids = t
        .geometry
        .identities
        .iter()
        .filter(|(sel, _)| r.constants[*sel].is_one())
        .map(|(_, id)| id.clone())
        .collect();
    ConstrainedVector::new(r.wires.clone(), t.row_constants(row).to_vec(), ids).expect("geometry slots resolve")
}
