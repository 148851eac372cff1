//! Two-output, multi-setting Bell inequalities in Clauser–Horne (probability) form.
//!
//! An inequality is stored as
//!
//! ```text
//! P = Σ_ij joint[i][j] P(0,0|i,j) + Σ_i alice_marg[i] P_A(0|i) + Σ_j bob_marg[j] P_B(0|j) ≤ bound
//! ```
//!
//! Settings are 1-based in names and coefficient files (`P11`, `joint 1 1 c`) and
//! 0-based in the Rust API.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Tolerance used for normalization and no-signaling checks on tables.
pub const TABLE_TOL: f64 = 1e-9;

/// Coefficient record of a two-output Bell inequality in probability form.
#[derive(Debug, Clone, PartialEq)]
pub struct BellInequality {
    name: String,
    m_a: usize,
    m_b: usize,
    /// Row-major `m_a × m_b`.
    joint: Vec<f64>,
    alice_marg: Vec<f64>,
    bob_marg: Vec<f64>,
    classical_bound: f64,
}

impl BellInequality {
    pub fn new(
        name: impl Into<String>,
        joint: Vec<Vec<f64>>,
        alice_marg: Vec<f64>,
        bob_marg: Vec<f64>,
        classical_bound: f64,
    ) -> Result<Self> {
        let m_a = joint.len();
        let m_b = joint.first().map_or(0, Vec::len);
        if m_a < 2 || m_b < 2 {
            return Err(Error::DimensionMismatch {
                expected: "at least 2 settings per party".into(),
                got: format!("{m_a}x{m_b}"),
            });
        }
        if joint.iter().any(|row| row.len() != m_b) {
            return Err(Error::DimensionMismatch {
                expected: format!("{m_b} columns in every row"),
                got: "ragged coefficient table".into(),
            });
        }
        if alice_marg.len() != m_a || bob_marg.len() != m_b {
            return Err(Error::DimensionMismatch {
                expected: format!("marginals of length {m_a} and {m_b}"),
                got: format!("{} and {}", alice_marg.len(), bob_marg.len()),
            });
        }
        let joint: Vec<f64> = joint.into_iter().flatten().collect();
        if joint.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidTable(
                "inequality has no joint-probability terms".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            m_a,
            m_b,
            joint,
            alice_marg,
            bob_marg,
            classical_bound,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m_a(&self) -> usize {
        self.m_a
    }

    pub fn m_b(&self) -> usize {
        self.m_b
    }

    /// Coefficient of `P(0,0|i,j)` (0-based settings).
    #[inline]
    pub fn joint(&self, i: usize, j: usize) -> f64 {
        self.joint[i * self.m_b + j]
    }

    pub fn alice_marg(&self) -> &[f64] {
        &self.alice_marg
    }

    pub fn bob_marg(&self) -> &[f64] {
        &self.bob_marg
    }

    pub fn classical_bound(&self) -> f64 {
        self.classical_bound
    }

    /// Value of the Bell expression on a probability table.
    pub fn evaluate(&self, table: &ProbabilityTable) -> Result<f64> {
        if table.m_a != self.m_a || table.m_b != self.m_b {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} table", self.m_a, self.m_b),
                got: format!("{}x{}", table.m_a, table.m_b),
            });
        }
        let mut value = 0.0;
        for i in 0..self.m_a {
            for j in 0..self.m_b {
                value += self.joint(i, j) * table.p(0, 0, i, j);
            }
        }
        for (i, c) in self.alice_marg.iter().enumerate() {
            value += c * table.alice_marginal(0, i);
        }
        for (j, c) in self.bob_marg.iter().enumerate() {
            value += c * table.bob_marginal(0, j);
        }
        Ok(value)
    }

    /// Maximum of the expression over all deterministic local strategies.
    ///
    /// Enumerates all `2^(m_a + m_b)` output assignments.
    pub fn deterministic_max(&self) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for amask in 0u32..(1 << self.m_a) {
            for bmask in 0u32..(1 << self.m_b) {
                // bit set means the setting outputs 0
                let a0 = |i: usize| amask >> i & 1 == 1;
                let b0 = |j: usize| bmask >> j & 1 == 1;
                let mut v = 0.0;
                for i in 0..self.m_a {
                    for j in 0..self.m_b {
                        if a0(i) && b0(j) {
                            v += self.joint(i, j);
                        }
                    }
                }
                for i in (0..self.m_a).filter(|&i| a0(i)) {
                    v += self.alice_marg[i];
                }
                for j in (0..self.m_b).filter(|&j| b0(j)) {
                    v += self.bob_marg[j];
                }
                best = best.max(v);
            }
        }
        best
    }

    /// Parses the plain-text coefficient format.
    ///
    /// One term per line: `joint i j c`, `amarg i c` or `bmarg j c`, with 1-based
    /// settings. Optional `name <id>` and `bound <c>` lines are accepted; `#`
    /// starts a comment. Setting counts are the largest indices that appear.
    pub fn parse_coefficients(default_name: &str, text: &str) -> Result<Self> {
        let mut name = default_name.to_string();
        let mut bound = 0.0;
        let mut joint_terms = Vec::new();
        let mut a_terms = Vec::new();
        let mut b_terms = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            let index = |s: &str| -> Result<usize> {
                let k: usize = s.parse().map_err(|_| err("bad setting index"))?;
                if k == 0 {
                    return Err(err("setting indices start at 1"));
                }
                Ok(k - 1)
            };
            let coeff = |s: &str| -> Result<f64> {
                let c: f64 = s.parse().map_err(|_| err("bad coefficient"))?;
                if !c.is_finite() {
                    return Err(err("coefficient must be finite"));
                }
                Ok(c)
            };
            match toks.as_slice() {
                ["joint", i, j, c] => joint_terms.push((index(i)?, index(j)?, coeff(c)?)),
                ["amarg", i, c] => a_terms.push((index(i)?, coeff(c)?)),
                ["bmarg", j, c] => b_terms.push((index(j)?, coeff(c)?)),
                ["name", n] => name = (*n).to_string(),
                ["bound", c] => bound = coeff(c)?,
                _ => return Err(err("expected `joint i j c`, `amarg i c` or `bmarg j c`")),
            }
        }
        let m_a = joint_terms
            .iter()
            .map(|t| t.0 + 1)
            .chain(a_terms.iter().map(|t| t.0 + 1))
            .max()
            .unwrap_or(0);
        let m_b = joint_terms
            .iter()
            .map(|t| t.1 + 1)
            .chain(b_terms.iter().map(|t| t.0 + 1))
            .max()
            .unwrap_or(0);
        let mut joint = vec![vec![0.0; m_b]; m_a];
        for (i, j, c) in joint_terms {
            joint[i][j] += c;
        }
        let mut am = vec![0.0; m_a];
        for (i, c) in a_terms {
            am[i] += c;
        }
        let mut bm = vec![0.0; m_b];
        for (j, c) in b_terms {
            bm[j] += c;
        }
        Self::new(name, joint, am, bm, bound)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("custom");
        Self::parse_coefficients(stem, &text)
    }

    /// Serializes to the coefficient file format; zero coefficients are omitted.
    pub fn to_coefficients(&self) -> String {
        let mut out = format!("name {}\nbound {}\n", self.name, self.classical_bound);
        for i in 0..self.m_a {
            for j in 0..self.m_b {
                let c = self.joint(i, j);
                if c != 0.0 {
                    out.push_str(&format!("joint {} {} {}\n", i + 1, j + 1, c));
                }
            }
        }
        for (i, &c) in self.alice_marg.iter().enumerate().filter(|(_, c)| **c != 0.0) {
            out.push_str(&format!("amarg {} {}\n", i + 1, c));
        }
        for (j, &c) in self.bob_marg.iter().enumerate().filter(|(_, c)| **c != 0.0) {
            out.push_str(&format!("bmarg {} {}\n", j + 1, c));
        }
        out
    }
}

impl fmt::Display for BellInequality {
    /// Renders in the `P11 + P12 − P10` notation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for i in 0..self.m_a {
            for j in 0..self.m_b {
                terms.push((self.joint(i, j), format!("P{}{}", i + 1, j + 1)));
            }
        }
        for (i, &c) in self.alice_marg.iter().enumerate() {
            terms.push((c, format!("P{}0", i + 1)));
        }
        for (j, &c) in self.bob_marg.iter().enumerate() {
            terms.push((c, format!("P0{}", j + 1)));
        }
        let mut out = String::new();
        for (c, label) in terms.into_iter().filter(|(c, _)| *c != 0.0) {
            if out.is_empty() {
                if c < 0.0 {
                    out.push('-');
                }
            } else {
                out.push_str(if c < 0.0 { " - " } else { " + " });
            }
            if c.abs() != 1.0 {
                out.push_str(&c.abs().to_string());
            }
            out.push_str(&label);
        }
        f.write_str(&out)
    }
}

/// Joint outcome probabilities `P(a,b|i,j)` for binary outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    m_a: usize,
    m_b: usize,
    /// Index `((i * m_b + j) * 2 + a) * 2 + b`.
    p: Vec<f64>,
}

impl ProbabilityTable {
    /// Builds a table from a closure `(a, b, i, j) -> P(a,b|i,j)` and validates it.
    pub fn from_fn(
        m_a: usize,
        m_b: usize,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let table = Self::from_fn_unchecked(m_a, m_b, f);
        table.validate()?;
        Ok(table)
    }

    pub(crate) fn from_fn_unchecked(
        m_a: usize,
        m_b: usize,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut p = vec![0.0; m_a * m_b * 4];
        for i in 0..m_a {
            for j in 0..m_b {
                for a in 0..2 {
                    for b in 0..2 {
                        p[((i * m_b + j) * 2 + a) * 2 + b] = f(a, b, i, j);
                    }
                }
            }
        }
        Self { m_a, m_b, p }
    }

    /// Deterministic local table in which every setting always outputs 0.
    pub fn all_zero_outcomes(m_a: usize, m_b: usize) -> Self {
        Self::from_fn_unchecked(m_a, m_b, |a, b, _, _| if a == 0 && b == 0 { 1.0 } else { 0.0 })
    }

    /// Uniform table: every `P(a,b|i,j) = 1/4`.
    pub fn uniform(m_a: usize, m_b: usize) -> Self {
        Self::from_fn_unchecked(m_a, m_b, |_, _, _, _| 0.25)
    }

    pub fn m_a(&self) -> usize {
        self.m_a
    }

    pub fn m_b(&self) -> usize {
        self.m_b
    }

    #[inline]
    pub fn p(&self, a: usize, b: usize, i: usize, j: usize) -> f64 {
        self.p[((i * self.m_b + j) * 2 + a) * 2 + b]
    }

    /// `P_A(a|i)`, averaged over Bob's settings.
    pub fn alice_marginal(&self, a: usize, i: usize) -> f64 {
        (0..self.m_b)
            .map(|j| self.p(a, 0, i, j) + self.p(a, 1, i, j))
            .sum::<f64>()
            / self.m_b as f64
    }

    /// `P_B(b|j)`, averaged over Alice's settings.
    pub fn bob_marginal(&self, b: usize, j: usize) -> f64 {
        (0..self.m_a)
            .map(|i| self.p(0, b, i, j) + self.p(1, b, i, j))
            .sum::<f64>()
            / self.m_a as f64
    }

    /// Checks range, normalization and no-signaling.
    pub fn validate(&self) -> Result<()> {
        for (k, &v) in self.p.iter().enumerate() {
            if !(-TABLE_TOL..=1.0 + TABLE_TOL).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidTable(format!("entry {k} = {v} outside [0,1]")));
            }
        }
        for i in 0..self.m_a {
            for j in 0..self.m_b {
                let s: f64 = (0..4).map(|ab| self.p(ab / 2, ab % 2, i, j)).sum();
                if (s - 1.0).abs() > TABLE_TOL {
                    return Err(Error::InvalidTable(format!(
                        "block ({}, {}) sums to {s}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        for i in 0..self.m_a {
            for a in 0..2 {
                let first = self.p(a, 0, i, 0) + self.p(a, 1, i, 0);
                for j in 1..self.m_b {
                    let other = self.p(a, 0, i, j) + self.p(a, 1, i, j);
                    if (other - first).abs() > TABLE_TOL {
                        return Err(Error::InvalidTable(format!(
                            "Alice's marginal for setting {} depends on Bob's setting",
                            i + 1
                        )));
                    }
                }
            }
        }
        for j in 0..self.m_b {
            for b in 0..2 {
                let first = self.p(0, b, 0, j) + self.p(1, b, 0, j);
                for i in 1..self.m_a {
                    let other = self.p(0, b, i, j) + self.p(1, b, i, j);
                    if (other - first).abs() > TABLE_TOL {
                        return Err(Error::InvalidTable(format!(
                            "Bob's marginal for setting {} depends on Alice's setting",
                            j + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `λ·self + (1−λ)·other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        if self.m_a != other.m_a || self.m_b != other.m_b {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.m_a, self.m_b),
                got: format!("{}x{}", other.m_a, other.m_b),
            });
        }
        let p = self
            .p
            .iter()
            .zip(&other.p)
            .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
            .collect();
        Ok(Self {
            m_a: self.m_a,
            m_b: self.m_b,
            p,
        })
    }

    /// Largest absolute entrywise difference between two same-shaped tables.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// Identifiers of the built-in catalog, in table order.
pub const CATALOG_NAMES: [&str; 12] = [
    "CHSH", "I3322", "I4322_3", "A6", "AS1", "AS2", "AII2", "I4422_5", "I4422_6", "I4422_13",
    "I4422_15", "I4422_19",
];

struct Entry {
    name: &'static str,
    joint: &'static [&'static [f64]],
    alice: &'static [f64],
    bob: &'static [f64],
}

const CATALOG: [Entry; 12] = [
    Entry {
        name: "CHSH",
        joint: &[&[1., 1.], &[1., -1.]],
        alice: &[-1., 0.],
        bob: &[-1., 0.],
    },
    Entry {
        name: "I3322",
        joint: &[&[1., 1., 1.], &[1., 1., -1.], &[1., -1., 0.]],
        alice: &[-2., -1., 0.],
        bob: &[-1., 0., 0.],
    },
    Entry {
        name: "I4322_3",
        joint: &[&[2., 1., 1.], &[-1., 1., 1.], &[0., 1., -1.], &[1., -1., -1.]],
        alice: &[-2., -1., 0., 0.],
        bob: &[-1., -1., 0.],
    },
    Entry {
        name: "A6",
        joint: &[
            &[1., 1., 0., 1.],
            &[1., 0., 1., -1.],
            &[0., 1., -1., -1.],
            &[1., -1., -1., -1.],
        ],
        alice: &[-1., -1., 0., 0.],
        bob: &[-1., -1., 0., 0.],
    },
    Entry {
        name: "AS1",
        joint: &[
            &[1., 1., 1., 1.],
            &[1., 1., 1., -1.],
            &[1., 1., -2., 0.],
            &[1., -1., 0., 0.],
        ],
        alice: &[-2., -1., 0., 0.],
        bob: &[-2., -1., 0., 0.],
    },
    Entry {
        name: "AS2",
        joint: &[
            &[1., 1., 2., 2.],
            &[1., 2., 1., -2.],
            &[2., 1., -2., 1.],
            &[2., -2., 1., -1.],
        ],
        alice: &[-3., -1., -1., 0.],
        bob: &[-3., -1., -1., 0.],
    },
    Entry {
        name: "AII2",
        joint: &[
            &[2., 1., 1., -1.],
            &[1., 2., -1., 1.],
            &[1., -1., -1., 1.],
            &[1., -1., 0., 0.],
        ],
        alice: &[-1., -1., 0., 0.],
        bob: &[-3., -1., 0., -1.],
    },
    Entry {
        name: "I4422_5",
        joint: &[
            &[1., 0., 1., 0.],
            &[1., 1., -1., 1.],
            &[1., -1., 0., 0.],
            &[1., 1., -1., -1.],
        ],
        alice: &[-1., -1., 0., 0.],
        bob: &[-2., -1., 0., 0.],
    },
    Entry {
        name: "I4422_6",
        joint: &[
            &[1., -1., 1., 1.],
            &[1., 1., -1., 1.],
            &[1., -1., 1., -1.],
            &[1., 1., -1., -1.],
        ],
        alice: &[-1., -1., 0., 0.],
        bob: &[-2., -1., -1., 0.],
    },
    Entry {
        name: "I4422_13",
        joint: &[
            &[0., 1., 1., 1.],
            &[1., -2., 1., 1.],
            &[1., 1., -1., 1.],
            &[1., 1., 1., -1.],
        ],
        alice: &[-2., -1., -1., 0.],
        bob: &[-2., -1., -1., 0.],
    },
    Entry {
        name: "I4422_15",
        joint: &[
            &[2., 1., 1., 1.],
            &[1., -1., -1., 1.],
            &[1., -1., 0., -1.],
            &[1., 1., -1., -1.],
        ],
        alice: &[-2., -1., 0., 0.],
        bob: &[-2., -1., 0., 0.],
    },
    Entry {
        name: "I4422_19",
        joint: &[
            &[2., 2., 1., 2.],
            &[2., -1., 2., -2.],
            &[1., 2., -1., -1.],
            &[2., -2., -1., 0.],
        ],
        alice: &[-3., -2., 0., 0.],
        bob: &[-3., -2., 0., 0.],
    },
];

/// Looks up a built-in inequality by identifier (case-insensitive).
pub fn catalog_get(name: &str) -> Result<BellInequality> {
    let entry = CATALOG
        .iter()
        .find(|e| e.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownInequality {
            name: name.to_string(),
            valid: CATALOG_NAMES.join(", "),
        })?;
    BellInequality::new(
        entry.name,
        entry.joint.iter().map(|row| row.to_vec()).collect(),
        entry.alice.to_vec(),
        entry.bob.to_vec(),
        0.0,
    )
}

/// All built-in inequalities in table order.
pub fn catalog() -> Vec<BellInequality> {
    CATALOG_NAMES
        .iter()
        .map(|n| catalog_get(n).expect("catalog entries are well formed"))
        .collect()
}

/// Resolves a catalog identifier, falling back to a coefficient file path.
pub fn resolve(name_or_path: &str) -> Result<BellInequality> {
    match catalog_get(name_or_path) {
        Ok(ineq) => Ok(ineq),
        Err(e) => {
            let path = Path::new(name_or_path);
            if path.is_file() {
                BellInequality::from_file(path)
            } else {
                Err(e)
            }
        }
    }
}
