use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Boolean value of every variable, by id.
pub type State = BTreeMap<String, bool>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Current,
    /// Value at the end of the previous iteration (the `p` suffix).
    Previous,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub var: String,
    pub binding: Binding,
}

impl Literal {
    pub fn current(var: impl Into<String>) -> Self {
        Literal {
            var: var.into(),
            binding: Binding::Current,
        }
    }

    pub fn previous(var: impl Into<String>) -> Self {
        Literal {
            var: var.into(),
            binding: Binding::Previous,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.binding {
            Binding::Current => f.write_str(&self.var),
            Binding::Previous => write!(f, "{}p", self.var),
        }
    }
}

/// Product of literals. The empty product is true.
pub type Term = BTreeSet<Literal>;

/// Sum of products without negation, kept free of duplicate and absorbed
/// terms. The empty sum is false.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoolExpr {
    terms: BTreeSet<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unknown variable `{var}` ({binding:?} value)")]
    UnknownVariable { var: String, binding: Binding },
}

impl BoolExpr {
    pub fn falsity() -> Self {
        BoolExpr::default()
    }

    pub fn from_terms<I: IntoIterator<Item = Term>>(terms: I) -> Self {
        let mut expr = BoolExpr::default();
        for t in terms {
            expr.add_term(t);
        }
        expr
    }

    pub fn literal(lit: Literal) -> Self {
        BoolExpr::from_terms([Term::from([lit])])
    }

    /// OR a term in, applying absorption both ways.
    pub fn add_term(&mut self, term: Term) {
        if self.terms.iter().any(|t| t.is_subset(&term)) {
            return;
        }
        self.terms.retain(|t| !term.is_subset(t));
        self.terms.insert(term);
    }

    pub fn or(mut self, other: &BoolExpr) -> Self {
        for t in &other.terms {
            self.add_term(t.clone());
        }
        self
    }

    pub fn and(&self, other: &BoolExpr) -> Self {
        let mut out = BoolExpr::default();
        for a in &self.terms {
            for b in &other.terms {
                out.add_term(a.union(b).cloned().collect());
            }
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_false(&self) -> bool {
        self.terms.is_empty()
    }

    /// Every term as a set of variable names, bindings dropped.
    pub fn variable_sets(&self) -> BTreeSet<BTreeSet<String>> {
        self.terms
            .iter()
            .map(|t| t.iter().map(|l| l.var.clone()).collect())
            .collect()
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.terms.iter().flatten()
    }

    pub fn eval(&self, current: &State, previous: &State) -> Result<bool, EvalError> {
        eval_expr(self, current, previous)
    }
}

/// OR over terms of AND over literals, `Current` literals read from
/// `current` and `Previous` ones from `previous`.
pub fn eval_expr(expr: &BoolExpr, current: &State, previous: &State) -> Result<bool, EvalError> {
    let mut result = false;
    for term in &expr.terms {
        let mut product = true;
        for lit in term {
            let map = match lit.binding {
                Binding::Current => current,
                Binding::Previous => previous,
            };
            let value = *map.get(&lit.var).ok_or_else(|| EvalError::UnknownVariable {
                var: lit.var.clone(),
                binding: lit.binding,
            })?;
            product &= value;
        }
        // keep scanning so an unknown variable is reported whatever the values
        result |= product;
    }
    Ok(result)
}
