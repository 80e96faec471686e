//! Takagi-Sugeno inference core: triangular membership functions, linguistic
//! variables, rule bases and weighted-average defuzzification.
//!
//! Everything here is immutable after construction and side-effect free, so
//! evaluation can run from any number of threads without synchronization.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuzzyError {
    #[error("invalid membership function: {0}")]
    InvalidMf(String),
    #[error("invalid variable `{name}`: {reason}")]
    InvalidVariable { name: String, reason: String },
    #[error("invalid rule base: {0}")]
    InvalidRuleBase(String),
    #[error("expected {expected} inputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("consequent has {got} coefficients, expected 1 (zero-order) or {expected}")]
    CoefficientMismatch { expected: usize, got: usize },
    #[error("no rule fired for inputs {0:?}")]
    ZeroActivation(Vec<f64>),
}

/// Triangular membership function, optionally with a shoulder on either side
/// (membership saturates at 1 beyond the peak).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangularMf {
    left: f64,
    peak: f64,
    right: f64,
    left_shoulder: bool,
    right_shoulder: bool,
}

impl TriangularMf {
    pub fn new(left: f64, peak: f64, right: f64) -> Result<Self, FuzzyError> {
        Self::with_shoulders(left, peak, right, false, false)
    }

    pub fn with_shoulders(
        left: f64,
        peak: f64,
        right: f64,
        left_shoulder: bool,
        right_shoulder: bool,
    ) -> Result<Self, FuzzyError> {
        if !(left.is_finite() && peak.is_finite() && right.is_finite()) {
            return Err(FuzzyError::InvalidMf(format!(
                "non-finite vertices ({left}, {peak}, {right})"
            )));
        }
        if !(left <= peak && peak <= right) {
            return Err(FuzzyError::InvalidMf(format!(
                "vertices not ordered: left={left} peak={peak} right={right}"
            )));
        }
        if left == right {
            return Err(FuzzyError::InvalidMf(format!(
                "degenerate support: left == right == {left}"
            )));
        }
        Ok(Self { left, peak, right, left_shoulder, right_shoulder })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn left_shoulder(&self) -> bool {
        self.left_shoulder
    }

    pub fn right_shoulder(&self) -> bool {
        self.right_shoulder
    }

    /// Membership degree at `x`. With `circular_context = Some(len)` the input
    /// is first reduced modulo `len` to the representative nearest the peak,
    /// so e.g. a midnight term evaluates identically at 0h and 24h.
    pub fn membership(&self, x: f64, circular_context: Option<f64>) -> f64 {
        let x = match circular_context {
            Some(len) => {
                let mut d = (x - self.peak).rem_euclid(len);
                if d > len / 2.0 {
                    d -= len;
                }
                self.peak + d
            }
            None => x,
        };
        if x == self.peak {
            1.0
        } else if x < self.peak {
            if self.left_shoulder {
                1.0
            } else if x <= self.left {
                0.0
            } else {
                (x - self.left) / (self.peak - self.left)
            }
        } else if self.right_shoulder {
            1.0
        } else if x >= self.right {
            0.0
        } else {
            (self.right - x) / (self.right - self.peak)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub name: String,
    pub mf: TriangularMf,
}

/// A named input dimension with an ordered set of terms. When `circular` the
/// domain wraps (time of day); otherwise out-of-domain inputs clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct LinguisticVariable {
    name: String,
    domain_min: f64,
    domain_max: f64,
    circular: bool,
    terms: Vec<Term>,
}

impl LinguisticVariable {
    pub fn new(
        name: &str,
        domain_min: f64,
        domain_max: f64,
        circular: bool,
        terms: Vec<Term>,
    ) -> Result<Self, FuzzyError> {
        let invalid = |reason: String| FuzzyError::InvalidVariable {
            name: name.to_string(),
            reason,
        };
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(invalid("name must be non-empty without whitespace".into()));
        }
        if !(domain_min.is_finite() && domain_max.is_finite() && domain_min < domain_max) {
            return Err(invalid(format!(
                "bad domain [{domain_min}, {domain_max}]"
            )));
        }
        if terms.is_empty() {
            return Err(invalid("no terms".into()));
        }
        let mut prev: Option<f64> = None;
        for t in &terms {
            if t.name.is_empty() || t.name.contains(char::is_whitespace) {
                return Err(invalid(format!("bad term name {:?}", t.name)));
            }
            let p = t.mf.peak();
            if let Some(q) = prev {
                if p <= q {
                    return Err(invalid(format!(
                        "term peaks not strictly increasing at `{}`",
                        t.name
                    )));
                }
            }
            let in_domain = if circular {
                p >= domain_min && p < domain_max
            } else {
                p >= domain_min && p <= domain_max
            };
            if !in_domain {
                return Err(invalid(format!(
                    "peak {p} of `{}` outside domain",
                    t.name
                )));
            }
            prev = Some(p);
        }
        for (a, b) in terms.iter().zip(terms.iter().skip(1)) {
            if a.name == b.name {
                return Err(invalid(format!("duplicate term `{}`", a.name)));
            }
        }
        Ok(Self {
            name: name.to_string(),
            domain_min,
            domain_max,
            circular,
            terms,
        })
    }

    /// Ruspini layout: each term's feet sit on its neighbors' peaks; for
    /// non-circular domains the extreme terms get shoulders, for circular
    /// domains the feet wrap. Memberships then sum to 1 on the interior.
    pub fn ruspini(
        name: &str,
        domain_min: f64,
        domain_max: f64,
        circular: bool,
        peaks: &[(&str, f64)],
    ) -> Result<Self, FuzzyError> {
        if peaks.len() < 2 {
            return Err(FuzzyError::InvalidVariable {
                name: name.to_string(),
                reason: "ruspini layout needs at least two terms".into(),
            });
        }
        let len = domain_max - domain_min;
        let n = peaks.len();
        if circular {
            // The modular reduction picks the representative nearest each
            // peak; a gap wider than half the domain would flip a point onto
            // the far side of its triangle and break the sum-to-one claim.
            for i in 0..n {
                let next = if i == n - 1 { peaks[0].1 + len } else { peaks[i + 1].1 };
                let gap = next - peaks[i].1;
                if gap > len / 2.0 {
                    return Err(FuzzyError::InvalidVariable {
                        name: name.to_string(),
                        reason: format!(
                            "peaks {} and {} are {gap} apart, over half the domain",
                            peaks[i].0,
                            peaks[(i + 1) % n].0
                        ),
                    });
                }
            }
        }
        let mut terms = Vec::with_capacity(n);
        for (i, &(tname, peak)) in peaks.iter().enumerate() {
            let mf = if circular {
                let left = if i == 0 { peaks[n - 1].1 - len } else { peaks[i - 1].1 };
                let right = if i == n - 1 { peaks[0].1 + len } else { peaks[i + 1].1 };
                TriangularMf::new(left, peak, right)?
            } else {
                let left = if i == 0 { domain_min } else { peaks[i - 1].1 };
                let right = if i == n - 1 { domain_max } else { peaks[i + 1].1 };
                TriangularMf::with_shoulders(left, peak, right, i == 0, i == n - 1)?
            };
            terms.push(Term { name: tname.to_string(), mf });
        }
        Self::new(name, domain_min, domain_max, circular, terms)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain_min(&self) -> f64 {
        self.domain_min
    }

    pub fn domain_max(&self) -> f64 {
        self.domain_max
    }

    pub fn circular(&self) -> bool {
        self.circular
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term_index(&self, name: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.name == name)
    }

    fn circular_len(&self) -> Option<f64> {
        self.circular.then_some(self.domain_max - self.domain_min)
    }

    /// Map a raw input onto the domain: clamp for linear domains, wrap
    /// for circular ones.
    pub fn project(&self, x: f64) -> f64 {
        if self.circular {
            self.domain_min + (x - self.domain_min).rem_euclid(self.domain_max - self.domain_min)
        } else {
            x.clamp(self.domain_min, self.domain_max)
        }
    }

    pub fn membership(&self, term: usize, x: f64) -> f64 {
        self.terms[term].mf.membership(self.project(x), self.circular_len())
    }

    /// Membership of every term at `x`, after projection.
    pub fn fuzzify(&self, x: f64) -> Vec<f64> {
        let xp = self.project(x);
        let len = self.circular_len();
        self.terms.iter().map(|t| t.mf.membership(xp, len)).collect()
    }
}

/// Antecedent conjunction operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TNorm {
    #[default]
    Product,
    Min,
}

impl TNorm {
    pub fn combine(&self, degrees: impl IntoIterator<Item = f64>) -> f64 {
        match self {
            TNorm::Product => degrees.into_iter().product(),
            TNorm::Min => degrees.into_iter().fold(1.0, f64::min),
        }
    }
}

/// One implication: a term index per input variable plus linear consequent
/// coefficients. A single coefficient is the zero-order shorthand for
/// a constant output; otherwise exactly n+1 coefficients are required.
#[derive(Debug, Clone, PartialEq)]
pub struct TsRule {
    pub antecedent: Vec<usize>,
    pub coeffs: Vec<f64>,
}

impl TsRule {
    pub fn output(&self, inputs: &[f64]) -> Result<f64, FuzzyError> {
        if self.coeffs.len() == 1 {
            return Ok(self.coeffs[0]);
        }
        if self.coeffs.len() != inputs.len() + 1 {
            return Err(FuzzyError::CoefficientMismatch {
                expected: inputs.len() + 1,
                got: self.coeffs.len(),
            });
        }
        Ok(self.coeffs[0]
            + self.coeffs[1..]
                .iter()
                .zip(inputs)
                .map(|(a, x)| a * x)
                .sum::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub per_rule_weights: Vec<f64>,
    pub output: f64,
}

/// A complete rule base over a fixed variable list. Construction enforces
/// full grid coverage: every combination of one term per variable appears in
/// exactly one rule.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    variables: Vec<LinguisticVariable>,
    rules: Vec<TsRule>,
    tnorm: TNorm,
}

impl RuleBase {
    pub fn new(
        variables: Vec<LinguisticVariable>,
        rules: Vec<TsRule>,
        tnorm: TNorm,
    ) -> Result<Self, FuzzyError> {
        if variables.is_empty() {
            return Err(FuzzyError::InvalidRuleBase("no variables".into()));
        }
        let expected: usize = variables.iter().map(|v| v.terms().len()).product();
        let mut seen = vec![false; expected];
        for rule in &rules {
            if rule.antecedent.len() != variables.len() {
                return Err(FuzzyError::InvalidRuleBase(format!(
                    "rule antecedent has {} entries, expected {}",
                    rule.antecedent.len(),
                    variables.len()
                )));
            }
            let mut cell = 0usize;
            for (vi, &ti) in rule.antecedent.iter().enumerate() {
                let nt = variables[vi].terms().len();
                if ti >= nt {
                    return Err(FuzzyError::InvalidRuleBase(format!(
                        "term index {ti} out of range for variable `{}`",
                        variables[vi].name()
                    )));
                }
                cell = cell * nt + ti;
            }
            if seen[cell] {
                return Err(FuzzyError::InvalidRuleBase(format!(
                    "duplicate rule for cell ({})",
                    Self::cell_names(&variables, &rule.antecedent)
                )));
            }
            seen[cell] = true;
            if rule.coeffs.len() != 1 && rule.coeffs.len() != variables.len() + 1 {
                return Err(FuzzyError::CoefficientMismatch {
                    expected: variables.len() + 1,
                    got: rule.coeffs.len(),
                });
            }
        }
        if rules.len() != expected {
            // Name the first missing combination for the operator.
            let missing = seen.iter().position(|s| !s).unwrap_or(0);
            let mut idxs = vec![0usize; variables.len()];
            let mut rem = missing;
            for vi in (0..variables.len()).rev() {
                let nt = variables[vi].terms().len();
                idxs[vi] = rem % nt;
                rem /= nt;
            }
            return Err(FuzzyError::InvalidRuleBase(format!(
                "incomplete grid: {} of {expected} rules, missing ({})",
                rules.len(),
                Self::cell_names(&variables, &idxs)
            )));
        }
        Ok(Self { variables, rules, tnorm })
    }

    fn cell_names(variables: &[LinguisticVariable], antecedent: &[usize]) -> String {
        antecedent
            .iter()
            .enumerate()
            .map(|(vi, &ti)| variables[vi].terms()[ti].name.clone())
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn variables(&self) -> &[LinguisticVariable] {
        &self.variables
    }

    pub fn rules(&self) -> &[TsRule] {
        &self.rules
    }

    pub fn tnorm(&self) -> TNorm {
        self.tnorm
    }

    /// Replace one variable, revalidating the grid. Used by the tuner to swap
    /// in a displaced intensity variable.
    pub fn with_variable(
        &self,
        index: usize,
        variable: LinguisticVariable,
    ) -> Result<Self, FuzzyError> {
        let mut variables = self.variables.clone();
        if index >= variables.len() {
            return Err(FuzzyError::InvalidRuleBase(format!(
                "variable index {index} out of range"
            )));
        }
        variables[index] = variable;
        Self::new(variables, self.rules.clone(), self.tnorm)
    }

    /// Degree of applicability of one rule's premise for the given inputs.
    pub fn firing_strength(&self, rule: &TsRule, inputs: &[f64]) -> Result<f64, FuzzyError> {
        if inputs.len() != self.variables.len() {
            return Err(FuzzyError::ArityMismatch {
                expected: self.variables.len(),
                got: inputs.len(),
            });
        }
        Ok(self.tnorm.combine(
            rule.antecedent
                .iter()
                .enumerate()
                .map(|(vi, &ti)| self.variables[vi].membership(ti, inputs[vi])),
        ))
    }

    /// Full TS inference: firing strengths per rule, linear consequents and
    /// the weighted-average defuzzification.
    pub fn evaluate(&self, inputs: &[f64]) -> Result<InferenceResult, FuzzyError> {
        if inputs.len() != self.variables.len() {
            return Err(FuzzyError::ArityMismatch {
                expected: self.variables.len(),
                got: inputs.len(),
            });
        }
        let projected: Vec<f64> = self
            .variables
            .iter()
            .zip(inputs)
            .map(|(v, &x)| v.project(x))
            .collect();
        let memberships: Vec<Vec<f64>> = self
            .variables
            .iter()
            .zip(&projected)
            .map(|(v, &x)| v.fuzzify(x))
            .collect();
        let mut weights = Vec::with_capacity(self.rules.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for rule in &self.rules {
            let w = self.tnorm.combine(
                rule.antecedent
                    .iter()
                    .enumerate()
                    .map(|(vi, &ti)| memberships[vi][ti]),
            );
            if w > 0.0 {
                num += w * rule.output(&projected)?;
                den += w;
            }
            weights.push(w);
        }
        if den <= 0.0 {
            return Err(FuzzyError::ZeroActivation(inputs.to_vec()));
        }
        Ok(InferenceResult {
            per_rule_weights: weights,
            output: num / den,
        })
    }
}
