//! Sparse multivariate polynomials over wires, used for symbolic rewriting.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use crate::circuit::WireId;
use crate::constraints::{Identity, Monomial};
use crate::field::{FieldElement, FieldSpec};

/// A polynomial with wire variables. Keys are sorted variable multisets.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    field: FieldSpec,
    terms: BTreeMap<Vec<WireId>, FieldElement>,
}

impl Poly {
    pub fn zero(field: FieldSpec) -> Self {
        Self {
            field,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: FieldElement) -> Self {
        let mut p = Self::zero(c.spec());
        p.add_term(Vec::new(), c);
        p
    }

    pub fn var(field: FieldSpec, w: WireId) -> Self {
        let mut p = Self::zero(field);
        p.add_term(vec![w], field.one());
        p
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[WireId], FieldElement)> {
        self.terms.iter().map(|(k, &c)| (k.as_slice(), c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, mut key: Vec<WireId>, c: FieldElement) {
        if c.is_zero() {
            return;
        }
        key.sort();
        let sum = self.terms.get(&key).copied().unwrap_or(self.field.zero()) + c;
        if sum.is_zero() {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, sum);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (k, &c) in &other.terms {
            out.add_term(k.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-self.field.one()))
    }

    pub fn scale(&self, c: FieldElement) -> Poly {
        let mut out = Poly::zero(self.field);
        for (k, &v) in &self.terms {
            out.add_term(k.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.field);
        for (ka, &ca) in &self.terms {
            for (kb, &cb) in &other.terms {
                let mut key = ka.clone();
                key.extend_from_slice(kb);
                out.add_term(key, ca * cb);
            }
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<WireId> {
        self.terms.keys().flatten().copied().collect()
    }

    pub fn constant_term(&self) -> FieldElement {
        self.terms.get(&Vec::new()).copied().unwrap_or(self.field.zero())
    }

    /// Degree of `w` in the polynomial.
    pub fn degree_in(&self, w: WireId) -> usize {
        self.terms
            .keys()
            .map(|k| k.iter().filter(|&&v| v == w).count())
            .max()
            .unwrap_or(0)
    }

    /// Replaces every occurrence of `w` by `p`.
    pub fn substitute(&self, w: WireId, p: &Poly) -> Poly {
        let mut out = Poly::zero(self.field);
        for (k, &c) in &self.terms {
            let rest: Vec<WireId> = k.iter().copied().filter(|&v| v != w).collect();
            let n = k.len() - rest.len();
            let mut term = Poly::zero(self.field);
            term.add_term(rest, c);
            for _ in 0..n {
                term = term.mul(p);
            }
            out = out.add(&term);
        }
        out
    }

    /// Collapses `b^k` to `b` for every boolean `b`.
    pub fn reduce_boolean(&self, facts: &HashSet<WireId>) -> Poly {
        let mut out = Poly::zero(self.field);
        for (k, &c) in &self.terms {
            let mut key = k.clone();
            key.dedup_by(|a, b| a == b && facts.contains(a));
            out.add_term(key, c);
        }
        out
    }

    /// `Some((terms, constant))` when the polynomial has degree at most one.
    pub fn as_linear(&self) -> Option<(Vec<(WireId, FieldElement)>, FieldElement)> {
        if self.degree() > 1 {
            return None;
        }
        let terms = self
            .terms
            .iter()
            .filter(|(k, _)| k.len() == 1)
            .map(|(k, &c)| (k[0], c))
            .collect();
        Some((terms, self.constant_term()))
    }

    pub fn eval(&self, value: impl Fn(WireId) -> Option<FieldElement>) -> Option<FieldElement> {
        let mut acc = self.field.zero();
        for (k, &c) in &self.terms {
            let mut term = c;
            for &w in k {
                term = term * value(w)?;
            }
            acc = acc + term;
        }
        Some(acc)
    }

    /// The identity `self = 0` over `slots`; every variable must appear there.
    pub fn to_identity(&self, slots: &[WireId]) -> Identity {
        let monomials = self
            .terms
            .iter()
            .map(|(k, &c)| {
                let wire_slots = k
                    .iter()
                    .map(|w| slots.iter().position(|s| s == w).expect("variable has a slot"))
                    .collect();
                Monomial::new(c, vec![], wire_slots)
            })
            .collect();
        Identity::new(monomials)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // Highest degree first, then by variables.
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(b.0)));
        for (i, (k, &c)) in terms.into_iter().enumerate() {
            let neg = c.value() > c.spec().modulus() / 2;
            let mag = if neg { -c } else { c };
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let vars: Vec<String> = k.iter().map(|w| w.to_string()).collect();
            if k.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{mag}*{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
