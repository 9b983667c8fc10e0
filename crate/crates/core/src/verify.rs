//! Executable completeness, soundness and preservation checks, with a
//! brute-force enumeration oracle over small fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::builder::Program;
use crate::circuit::WireId;
use crate::constraints::{check, eval_identity, ConstraintSystem};
use crate::field::{FieldElement, FieldSpec};
use crate::gadgets::{double_bool_check, mutate_input, registry, sample_inputs};
use crate::optimizer::{optimize_program, OptError, Pass, Profile, Unit};
use crate::tabulation::{sat_plonkish, tabulate, PlonkishTable};
use crate::witness::{gen_trace, trace_equiv, trace_equiv_mapped, Trace, TraceResult};

/// Largest number of assignments the enumerator will visit.
pub const ENUMERATION_BUDGET: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("{modulus}^{width} assignments exceed the enumeration budget of {ENUMERATION_BUDGET}")]
    Budget { modulus: u64, width: usize },
    #[error("constraint system mentions wire {wire} outside the enumerated width {width}")]
    WireOutOfRange { wire: WireId, width: usize },
    #[error(transparent)]
    Opt(#[from] OptError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub input: Vec<String>,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub property: String,
    pub subject: String,
    pub cases: usize,
    /// Cases that did not exercise the property, e.g. inputs on which
    /// generation legitimately fails.
    pub skipped: usize,
    pub failures: Vec<Failure>,
}

impl CheckReport {
    fn new(property: &str, subject: &str) -> Self {
        Self {
            property: property.into(),
            subject: subject.into(),
            cases: 0,
            skipped: 0,
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn show(values: &[FieldElement]) -> Vec<String> {
    values.iter().map(|v| v.value().to_string()).collect()
}

fn show_result(r: &TraceResult) -> String {
    match r {
        Ok(t) => format!("{t:?}"),
        Err(e) => format!("failure: {e}"),
    }
}

fn check_budget(field: FieldSpec, width: usize) -> Result<(), VerifyError> {
    let over = VerifyError::Budget {
        modulus: field.modulus(),
        width,
    };
    let mut total: u128 = 1;
    for _ in 0..width {
        total = total.checked_mul(field.modulus() as u128).ok_or(over.clone())?;
        if total > ENUMERATION_BUDGET {
            return Err(over);
        }
    }
    Ok(())
}

struct Plan<'a> {
    cs: &'a ConstraintSystem,
    width: usize,
    /// Constrained vectors, then lookups, grouped by their highest wire.
    cvs_at: Vec<Vec<usize>>,
    lookups_at: Vec<Vec<usize>>,
    elements: Vec<FieldElement>,
}

impl Plan<'_> {
    fn holds_at(&self, k: usize, vals: &[FieldElement]) -> bool {
        let get = |ws: &[WireId]| ws.iter().map(|w| vals[w.0]).collect::<Vec<_>>();
        self.cvs_at[k].iter().all(|&i| {
            let cv = &self.cs.cvs[i];
            let wv = get(&cv.wires);
            cv.identities
                .iter()
                .all(|id| eval_identity(id, &wv, &cv.constants).is_ok_and(|v| v.is_zero()))
        }) && self.lookups_at[k].iter().all(|&i| {
            let l = &self.cs.lookups[i];
            self.cs.tables.get(&l.table).is_some_and(|t| t.contains(&get(&l.wires)))
        })
    }

    fn dfs(&self, vals: &mut Vec<FieldElement>, out: &mut Vec<Vec<FieldElement>>) {
        let k = vals.len();
        if k == self.width {
            out.push(vals.clone());
            return;
        }
        for &e in &self.elements {
            vals.push(e);
            if self.holds_at(k, vals) {
                self.dfs(vals, out);
            }
            vals.pop();
        }
    }
}

/// Every assignment of wires `0..width` satisfying `cs`, in lexicographic
/// order. Constraints are checked as soon as their wires are assigned.
pub fn enumerate_satisfying(cs: &ConstraintSystem, width: usize, field: FieldSpec) -> Result<Vec<Trace>, VerifyError> {
    check_budget(field, width)?;
    let mut cvs_at = vec![Vec::new(); width.max(1)];
    let mut lookups_at = vec![Vec::new(); width.max(1)];
    let slot = |ws: &[WireId]| -> Result<usize, VerifyError> {
        match ws.iter().max() {
            Some(&w) if w.0 >= width => Err(VerifyError::WireOutOfRange { wire: w, width }),
            Some(&w) => Ok(w.0),
            None => Ok(0),
        }
    };
    for (i, cv) in cs.cvs.iter().enumerate() {
        cvs_at[slot(&cv.wires)?].push(i);
    }
    for (i, l) in cs.lookups.iter().enumerate() {
        lookups_at[slot(&l.wires)?].push(i);
    }
    let plan = Plan {
        cs,
        width,
        cvs_at,
        lookups_at,
        elements: field.elements().collect(),
    };
    if width == 0 {
        let empty = Trace::new(field);
        return Ok(if check(cs, &empty).is_ok() { vec![empty] } else { vec![] });
    }
    let parts: Vec<Vec<Vec<FieldElement>>> = plan
        .elements
        .par_iter()
        .map(|&e| {
            let mut out = Vec::new();
            let mut vals = vec![e];
            if plan.holds_at(0, &vals) {
                plan.dfs(&mut vals, &mut out);
            }
            out
        })
        .collect();
    Ok(parts
        .into_iter()
        .flatten()
        .map(|v| Trace::from_elements(field, v))
        .collect())
}

pub fn check_completeness(p: &Program, subject: &str, samples: usize, seed: u64) -> CheckReport {
    check_completeness_with(p, &p.constraint_system(), subject, samples, seed)
}

/// Whenever generation succeeds on a sampled valid input, `cs` accepts the
/// generated trace.
pub fn check_completeness_with(
    p: &Program,
    cs: &ConstraintSystem,
    subject: &str,
    samples: usize,
    seed: u64,
) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new("completeness", subject);
    for _ in 0..samples {
        let input = sample_inputs(p, &mut rng);
        report.cases += 1;
        match p.run(&input) {
            Err(_) => report.skipped += 1,
            Ok(t) => {
                if let Err(e) = check(cs, &t) {
                    report.failures.push(Failure {
                        input: show(&input),
                        expected: "satisfied".into(),
                        actual: e.to_string(),
                    });
                }
            }
        }
    }
    report
}

pub fn check_soundness_bruteforce(p: &Program, subject: &str) -> Result<CheckReport, VerifyError> {
    check_soundness_with(p, &p.constraint_system(), subject)
}

/// Every trace satisfying `cs` agrees on the io positions with the trace
/// generated from its inputs.
pub fn check_soundness_with(p: &Program, cs: &ConstraintSystem, subject: &str) -> Result<CheckReport, VerifyError> {
    let c = p.circuit();
    let sig = p.signature();
    let width = c.width().max(cs.width);
    let mut report = CheckReport::new("soundness", subject);
    for t in enumerate_satisfying(cs, width, p.field)? {
        report.cases += 1;
        let generated = gen_trace(&c, &t.restrict(&sig.inputs));
        if !trace_equiv(&sig, &Ok(t.clone()), &generated) {
            let input: Vec<FieldElement> = sig.inputs.iter().filter_map(|&w| t.get(w)).collect();
            report.failures.push(Failure {
                input: show(&input),
                expected: show_result(&generated),
                actual: format!("satisfying {t:?}"),
            });
        }
    }
    Ok(report)
}

/// Randomized search for satisfying traces that generation disagrees with:
/// perturb one non-input wire of a generated trace and re-check. Finding
/// nothing proves nothing.
pub fn soundness_smoke(p: &Program, subject: &str, samples: usize, seed: u64) -> CheckReport {
    let c = p.circuit();
    let cs = p.constraint_system();
    let sig = p.signature();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new("soundness-smoke", subject);
    let internal: Vec<WireId> = (0..c.width()).map(WireId).filter(|w| !sig.inputs.contains(w)).collect();
    for _ in 0..samples {
        report.cases += 1;
        let input = sample_inputs(p, &mut rng);
        let Ok(mut t) = p.run(&input) else {
            report.skipped += 1;
            continue;
        };
        if internal.is_empty() {
            report.skipped += 1;
            continue;
        }
        let w = internal[rng.gen_range(0..internal.len())];
        t.set(w, p.field.elem(rng.gen_range(0..p.field.modulus())));
        if check(&cs, &t).is_ok() {
            let generated = gen_trace(&c, &t.restrict(&sig.inputs));
            if !trace_equiv(&sig, &Ok(t.clone()), &generated) {
                report.failures.push(Failure {
                    input: show(&input),
                    expected: show_result(&generated),
                    actual: format!("satisfying {t:?}"),
                });
            }
        }
    }
    report
}

/// `p` with one pass applied once to its body.
pub fn apply_pass(pass: Pass, p: &Program, profile: Profile) -> Program {
    pass.apply(&Unit::from_program(p), profile).0.into_program(p)
}

/// Valid inputs, every other one with a coordinate replaced at random.
pub fn preservation_inputs(p: &Program, samples: usize, seed: u64) -> Vec<Vec<FieldElement>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|i| {
            let mut input = sample_inputs(p, &mut rng);
            if i % 2 == 1 {
                mutate_input(&mut input, p.field, &mut rng);
            }
            input
        })
        .collect()
}

/// Every input in `field^n`, lexicographically.
pub fn all_inputs(field: FieldSpec, n: usize) -> Result<Vec<Vec<FieldElement>>, VerifyError> {
    check_budget(field, n)?;
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                field.elements().map(move |e| {
                    let mut v = prefix.clone();
                    v.push(e);
                    v
                })
            })
            .collect();
    }
    Ok(out)
}

/// `before` and `after` agree on every input, failures included.
pub fn check_agreement(
    property: &str,
    subject: &str,
    before: &Program,
    after: &Program,
    inputs: &[Vec<FieldElement>],
) -> CheckReport {
    let (sa, sb) = (before.signature(), after.signature());
    let mut report = CheckReport::new(property, subject);
    for input in inputs {
        report.cases += 1;
        let (a, b) = (before.run(input), after.run(input));
        if !trace_equiv_mapped(&sa, &a, &sb, &b) {
            let io = |p: &Program, r: &TraceResult| match r {
                Ok(t) => format!(
                    "outputs {:?}",
                    p.output_values(t)
                        .iter()
                        .map(|v| v.map(|v| v.value()))
                        .collect::<Vec<_>>()
                ),
                Err(e) => format!("failure: {e}"),
            };
            report.failures.push(Failure {
                input: show(input),
                expected: io(before, &a),
                actual: io(after, &b),
            });
        }
    }
    report
}

pub fn check_preservation(
    pass: Pass,
    p: &Program,
    profile: Profile,
    subject: &str,
    samples: usize,
    seed: u64,
) -> CheckReport {
    let after = apply_pass(pass, p, profile);
    let inputs = preservation_inputs(p, samples, seed);
    check_agreement(&format!("preservation:{}", pass.name()), subject, p, &after, &inputs)
}

pub fn check_preservation_exhaustive(
    pass: Pass,
    p: &Program,
    profile: Profile,
    subject: &str,
) -> Result<CheckReport, VerifyError> {
    let after = apply_pass(pass, p, profile);
    let inputs = all_inputs(p.field, p.inputs.len())?;
    Ok(check_agreement(
        &format!("preservation:{}", pass.name()),
        subject,
        p,
        &after,
        &inputs,
    ))
}

/// Preservation for the whole optimizer pipeline.
pub fn check_pipeline_preservation(
    p: &Program,
    profile: Profile,
    subject: &str,
    samples: usize,
    seed: u64,
) -> Result<CheckReport, VerifyError> {
    let (after, _) = optimize_program(p, profile, None)?;
    let inputs = preservation_inputs(p, samples, seed);
    Ok(check_agreement("preservation:optimize", subject, p, &after, &inputs))
}

fn tabulation_case(cs: &ConstraintSystem, table: &PlonkishTable, t: &Trace, report: &mut CheckReport) {
    report.cases += 1;
    let (a, b) = (check(cs, t).is_ok(), sat_plonkish(table, t));
    if a != b {
        report.failures.push(Failure {
            input: t
                .slots()
                .iter()
                .map(|v| v.map_or("_".into(), |v| v.value().to_string()))
                .collect(),
            expected: format!("sat = {a}"),
            actual: format!("sat_plonkish = {b}"),
        });
    }
}

/// `sat(cs, t) = sat_plonkish(tabulate(cs), t)` for every `t` over wires
/// `0..width`.
pub fn check_tabulation_exhaustive(
    cs: &ConstraintSystem,
    width: usize,
    subject: &str,
) -> Result<CheckReport, VerifyError> {
    check_budget(cs.field, width)?;
    let table = tabulate(cs);
    let p = cs.field.modulus();
    let total = p.pow(width as u32);
    let chunk = p.pow(width.saturating_sub(1) as u32);
    let parts: Vec<CheckReport> = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|part| {
            let mut report = CheckReport::new("tabulation", subject);
            for n in part * chunk..((part + 1) * chunk).min(total) {
                let mut digits = Vec::with_capacity(width);
                let mut rest = n;
                for _ in 0..width {
                    digits.push(cs.field.elem(rest % p));
                    rest /= p;
                }
                digits.reverse();
                tabulation_case(cs, &table, &Trace::from_elements(cs.field, digits), &mut report);
            }
            report
        })
        .collect();
    let mut report = CheckReport::new("tabulation", subject);
    for r in parts {
        report.cases += r.cases;
        report.failures.extend(r.failures);
    }
    Ok(report)
}

/// The same equation on generated traces of `p`, every other one with one
/// wire overwritten at random.
pub fn check_tabulation_sampled(p: &Program, subject: &str, samples: usize, seed: u64) -> CheckReport {
    let cs = p.constraint_system();
    let table = tabulate(&cs);
    let width = p.circuit().width().max(cs.width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new("tabulation", subject);
    for i in 0..samples {
        let input = sample_inputs(p, &mut rng);
        let mut t = match p.run(&input) {
            Ok(t) => t,
            Err(_) => p.input_trace(&input),
        };
        if i % 2 == 1 && width > 0 {
            let w = WireId(rng.gen_range(0..width));
            t.set(w, p.field.elem(rng.gen_range(0..p.field.modulus())));
        }
        tabulation_case(&cs, &table, &t, &mut report);
    }
    report
}

/// Every registered gadget over `field`, followed by its optimized forms
/// under both profiles and the double assertion demo.
pub fn corpus(field: FieldSpec) -> Vec<(String, Program)> {
    let mut out = Vec::new();
    for g in registry() {
        let p = (g.build)(field);
        let opts: Vec<_> = [Profile::PlonkArith, Profile::boojum()]
            .into_iter()
            .filter_map(|profile| {
                let (opt, _) = optimize_program(&p, profile, None).ok()?;
                Some((format!("{}@{}", g.name, profile.name()), opt))
            })
            .collect();
        out.push((g.name.to_string(), p));
        out.extend(opts);
    }
    out.push(("double_bool_check".into(), double_bool_check(field)));
    out
}
