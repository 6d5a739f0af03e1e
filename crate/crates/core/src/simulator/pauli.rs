//! Pauli strings and Pauli-sum observables.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Single-qubit Pauli operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Result<Pauli> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::invalid(format!("unknown Pauli symbol {other:?}"))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis; character `i` acts on qubit `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(pub Vec<Pauli>);

/// Bit masks describing how a Pauli string acts on computational basis states.
///
/// `P|b⟩ = i^{n_y} (−1)^{|b & phase|} |b ⊕ flip⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PauliMasks {
    pub flip: usize,
    pub phase: usize,
    pub n_y: u32,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString(vec![Pauli::I; n])
    }

    /// A string with `p` on qubit `q` and identities elsewhere.
    pub fn single(n: usize, q: usize, p: Pauli) -> Self {
        let mut v = vec![Pauli::I; n];
        v[q] = p;
        PauliString(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn masks(&self) -> PauliMasks {
        let mut m = PauliMasks {
            flip: 0,
            phase: 0,
            n_y: 0,
        };
        for (q, &p) in self.0.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => m.flip |= 1 << q,
                Pauli::Y => {
                    m.flip |= 1 << q;
                    m.phase |= 1 << q;
                    m.n_y += 1;
                }
                Pauli::Z => m.phase |= 1 << q,
            }
        }
        m
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::invalid("empty Pauli string"));
        }
        s.chars()
            .map(Pauli::from_char)
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

/// A real linear combination of Pauli strings of a common width.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    terms: Vec<(f64, PauliString)>,
}

#[derive(Serialize, Deserialize)]
struct TermRecord {
    coeff: f64,
    pauli_string: String,
}

impl Observable {
    pub fn new(terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::invalid("observable needs at least one term"));
        };
        let n = first.1.len();
        if n == 0 {
            return Err(Error::invalid("observable acts on zero qubits"));
        }
        for (c, p) in &terms {
            if !c.is_finite() {
                return Err(Error::invalid("observable coefficient is not finite"));
            }
            if p.len() != n {
                return Err(Error::dim("observable terms", n, p.len()));
            }
        }
        Ok(Observable { terms })
    }

    /// Single Pauli string with unit coefficient.
    pub fn pauli(p: PauliString) -> Result<Self> {
        Observable::new(vec![(1.0, p)])
    }

    /// Parses terms such as `[(0.5, "XI"), (-1.0, "ZZ")]`.
    pub fn from_terms(terms: &[(f64, &str)]) -> Result<Self> {
        let parsed = terms
            .iter()
            .map(|(c, s)| Ok((*c, s.parse::<PauliString>()?)))
            .collect::<Result<Vec<_>>>()?;
        Observable::new(parsed)
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn num_qubits(&self) -> usize {
        self.terms[0].1.len()
    }

    /// Largest number of non-identity factors in any term.
    pub fn locality(&self) -> usize {
        self.terms
            .iter()
            .map(|(_, p)| p.weight())
            .max()
            .unwrap_or(0)
    }

    /// Sum of absolute coefficients.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    /// `α·self + β·other`, keeping terms in order (no merging).
    pub fn linear_combination(
        &self,
        alpha: f64,
        other: &Observable,
        beta: f64,
    ) -> Result<Observable> {
        let mut terms: Vec<_> = self
            .terms
            .iter()
            .map(|(c, p)| (alpha * c, p.clone()))
            .collect();
        terms.extend(other.terms.iter().map(|(c, p)| (beta * c, p.clone())));
        Observable::new(terms)
    }

    /// Canonical text used for hashing and caching.
    pub fn canonical_key(&self) -> String {
        let mut s = String::new();
        for (c, p) in &self.terms {
            s.push_str(&format!("{:016x}:{};", c.to_bits(), p));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        let recs: Vec<_> = self
            .terms
            .iter()
            .map(|(c, p)| TermRecord {
                coeff: *c,
                pauli_string: p.to_string(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&recs)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let recs: Vec<TermRecord> = serde_json::from_str(text)?;
        let terms = recs
            .into_iter()
            .map(|r| Ok((r.coeff, r.pauli_string.parse()?)))
            .collect::<Result<Vec<_>>>()?;
        Observable::new(terms)
    }
}
