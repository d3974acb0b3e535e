use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::require_convention;
use crate::error::{Error, Result};
use crate::rbm::{Convention, RbmParams};

/// A possibly negated Boolean variable. `positive` literals have polarity
/// `q = +1`, negated ones `q = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Self {
            var,
            positive: true,
        }
    }

    pub fn neg(var: usize) -> Self {
        Self {
            var,
            positive: false,
        }
    }

    #[inline]
    pub fn polarity(self) -> f64 {
        if self.positive {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    pub fn holds(self, assignment: &[bool]) -> bool {
        assignment[self.var] == self.positive
    }

    /// 1-based signed DIMACS literal.
    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.positive {
            v
        } else {
            -v
        }
    }

    pub fn from_dimacs(lit: i64) -> Option<Self> {
        if lit == 0 {
            return None;
        }
        Some(Self {
            var: lit.unsigned_abs() as usize - 1,
            positive: lit > 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnaryClause {
    pub literal: Literal,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryClause {
    pub literals: [Literal; 2],
    pub weight: f64,
}

/// Weighted MAX-2-SAT instance with separate 1-SAT and 2-SAT clause lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Max2SatInstance {
    pub n_vars: usize,
    pub unary: Vec<UnaryClause>,
    pub binary: Vec<BinaryClause>,
}

impl Max2SatInstance {
    pub fn new(n_vars: usize, unary: Vec<UnaryClause>, binary: Vec<BinaryClause>) -> Result<Self> {
        let inst = Self {
            n_vars,
            unary,
            binary,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let check_weight = |w: f64| {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "clause weight {w} is not strictly positive"
                )));
            }
            Ok(())
        };
        let check_lit = |l: Literal| {
            if l.var >= self.n_vars {
                return Err(Error::InvalidInstance(format!(
                    "literal references variable {} of {}",
                    l.var + 1,
                    self.n_vars
                )));
            }
            Ok(())
        };
        for c in &self.unary {
            check_weight(c.weight)?;
            check_lit(c.literal)?;
        }
        for c in &self.binary {
            check_weight(c.weight)?;
            check_lit(c.literals[0])?;
            check_lit(c.literals[1])?;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.unary.is_empty() && self.binary.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.unary.iter().map(|c| c.weight).sum::<f64>()
            + self.binary.iter().map(|c| c.weight).sum::<f64>()
    }

    pub fn satisfied_weight(&self, assignment: &[bool]) -> f64 {
        self.total_weight() - self.unsatisfied_weight(assignment)
    }

    pub fn unsatisfied_weight(&self, assignment: &[bool]) -> f64 {
        let unary: f64 = self
            .unary
            .iter()
            .filter(|c| !c.literal.holds(assignment))
            .map(|c| c.weight)
            .sum();
        let binary: f64 = self
            .binary
            .iter()
            .filter(|c| !c.literals[0].holds(assignment) && !c.literals[1].holds(assignment))
            .map(|c| c.weight)
            .sum();
        unary + binary
    }
}

/// Continuous clause function `½ min(1 - q_i v_i, 1 - q_j v_j)`; the clause
/// counts as satisfied when the value is below `0.5`.
#[inline]
pub fn clause_value(voltages: &[f64], clause: &BinaryClause) -> f64 {
    let [a, b] = clause.literals;
    0.5 * (1.0 - a.polarity() * voltages[a.var]).min(1.0 - b.polarity() * voltages[b.var])
}

/// Encode a `±1` RBM as weighted MAX-2-SAT. Variables are the visible units
/// followed by the hidden units (true ↔ `+1`). Every coupling contributes
/// two 2-clauses of weight `2|W_ij|` (agreement clauses for `W > 0`,
/// disagreement clauses for `W < 0`) and every bias a unit clause of weight
/// `2|bias|` on the literal favoured by its sign, so that
/// `E(s) + SatWeight(s) = 3Σ|W| + Σ|a| + Σ|b|` for every assignment.
pub fn rbm_to_max2sat(rbm: &RbmParams) -> Result<Max2SatInstance> {
    require_convention(rbm, Convention::PlusMinus)?;
    let (n, m) = (rbm.n_visible(), rbm.n_hidden());
    let mut unary = Vec::new();
    let mut binary = Vec::new();
    let bias_clause = |var: usize, bias: f64| UnaryClause {
        literal: Literal {
            var,
            positive: bias > 0.0,
        },
        weight: 2.0 * bias.abs(),
    };
    for (i, &a) in rbm.visible_bias.iter().enumerate() {
        if a != 0.0 {
            unary.push(bias_clause(i, a));
        }
    }
    for (j, &b) in rbm.hidden_bias.iter().enumerate() {
        if b != 0.0 {
            unary.push(bias_clause(n + j, b));
        }
    }
    for i in 0..n {
        for j in 0..m {
            let w = rbm.weights[[i, j]];
            if w == 0.0 {
                continue;
            }
            let weight = 2.0 * w.abs();
            let (x, y) = (i, n + j);
            let pairs = if w > 0.0 {
                [
                    [Literal::pos(x), Literal::neg(y)],
                    [Literal::neg(x), Literal::pos(y)],
                ]
            } else {
                [
                    [Literal::pos(x), Literal::pos(y)],
                    [Literal::neg(x), Literal::neg(y)],
                ]
            };
            for literals in pairs {
                binary.push(BinaryClause { literals, weight });
            }
        }
    }
    Max2SatInstance::new(n + m, unary, binary)
}

/// Write the instance in weighted DIMACS CNF (`p wcnf N M`, one
/// weight-prefixed, zero-terminated clause per line). Weights use Rust's
/// shortest round-trip float formatting.
pub fn write_wcnf<W: Write>(inst: &Max2SatInstance, comment: Option<&str>, mut out: W) -> Result<()> {
    let mut text = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            let _ = writeln!(text, "c {line}");
        }
    }
    let _ = writeln!(
        text,
        "p wcnf {} {}",
        inst.n_vars,
        inst.unary.len() + inst.binary.len()
    );
    for c in &inst.unary {
        let _ = writeln!(text, "{} {} 0", c.weight, c.literal.to_dimacs());
    }
    for c in &inst.binary {
        let _ = writeln!(
            text,
            "{} {} {} 0",
            c.weight,
            c.literals[0].to_dimacs(),
            c.literals[1].to_dimacs()
        );
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_wcnf<R: BufRead>(input: R) -> Result<Max2SatInstance> {
    let err = |line: usize, message: String| Error::Parse {
        format: "wcnf",
        line,
        message,
    };
    let mut header: Option<(usize, usize)> = None;
    let mut unary = Vec::new();
    let mut binary = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('p') {
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if header.is_some() {
                return Err(err(line_no, "duplicate header".into()));
            }
            if fields.len() < 4 || fields[1] != "wcnf" {
                return Err(err(line_no, format!("bad header {trimmed:?}")));
            }
            let n = fields[2]
                .parse()
                .map_err(|_| err(line_no, "bad variable count".into()))?;
            let m = fields[3]
                .parse()
                .map_err(|_| err(line_no, "bad clause count".into()))?;
            header = Some((n, m));
            continue;
        }
        let (n_vars, _) = header.ok_or_else(|| err(line_no, "clause before header".into()))?;
        let mut fields = trimmed.split_whitespace();
        let weight: f64 = fields
            .next()
            .and_then(|w| w.parse().ok())
            .ok_or_else(|| err(line_no, "missing or bad weight".into()))?;
        let mut lits = Vec::with_capacity(2);
        let mut terminated = false;
        for f in fields {
            let lit: i64 = f
                .parse()
                .map_err(|_| err(line_no, format!("bad literal {f:?}")))?;
            if lit == 0 {
                terminated = true;
                break;
            }
            let lit = Literal::from_dimacs(lit).expect("non-zero literal");
            if lit.var >= n_vars {
                return Err(err(line_no, format!("variable {} out of range", lit.var + 1)));
            }
            lits.push(lit);
        }
        if !terminated {
            return Err(err(line_no, "clause is not zero-terminated".into()));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(err(line_no, format!("weight {weight} is not positive")));
        }
        match lits.as_slice() {
            [l] => unary.push(UnaryClause { literal: *l, weight }),
            [a, b] => binary.push(BinaryClause {
                literals: [*a, *b],
                weight,
            }),
            other => {
                return Err(err(
                    line_no,
                    format!("clauses must have 1 or 2 literals, found {}", other.len()),
                ))
            }
        }
    }
    let (n_vars, n_clauses) = header.ok_or_else(|| err(0, "missing header".into()))?;
    if unary.len() + binary.len() != n_clauses {
        return Err(err(
            0,
            format!(
                "header declares {n_clauses} clauses, found {}",
                unary.len() + binary.len()
            ),
        ));
    }
    Max2SatInstance::new(n_vars, unary, binary)
}
