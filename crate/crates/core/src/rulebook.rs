//! Concrete linguistic variables, the initial control-rule table for the four
//! feature modules, the severity-to-action mapping and the rule-base file
//! format.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::fuzzy::{FuzzyError, LinguisticVariable, RuleBase, TNorm, TriangularMf, Term, TsRule};

/// The four feature modules fed into the fuzzifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModuleKind {
    IpCount,
    IpxCount,
    Utilization,
    BytesPerSec,
}

impl ModuleKind {
    pub const ALL: [ModuleKind; 4] = [
        ModuleKind::IpCount,
        ModuleKind::IpxCount,
        ModuleKind::Utilization,
        ModuleKind::BytesPerSec,
    ];

    pub fn index(self) -> usize {
        match self {
            ModuleKind::IpCount => 0,
            ModuleKind::IpxCount => 1,
            ModuleKind::Utilization => 2,
            ModuleKind::BytesPerSec => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModuleKind::IpCount => "ip_count",
            ModuleKind::IpxCount => "ipx_count",
            ModuleKind::Utilization => "utilization",
            ModuleKind::BytesPerSec => "bytes_per_sec",
        }
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModuleKind {
    type Err = RulebookError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModuleKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| RulebookError::UnknownModule(s.to_string()))
    }
}

/// Graded response, total-ordered by escalation severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionLevel {
    Ignore,
    Log,
    Email,
    Sms,
}

impl ActionLevel {
    pub fn code(self) -> u8 {
        match self {
            ActionLevel::Ignore => 0,
            ActionLevel::Log => 1,
            ActionLevel::Email => 2,
            ActionLevel::Sms => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionLevel::Ignore => "IGNORE",
            ActionLevel::Log => "LOG",
            ActionLevel::Email => "EMAIL",
            ActionLevel::Sms => "SMS",
        }
    }

    /// Map a crisp severity back onto the discrete actions. Thresholds sit at
    /// the midpoints between action codes; boundaries escalate.
    pub fn from_severity(y: f64) -> Result<ActionLevel, RulebookError> {
        if !y.is_finite() {
            return Err(RulebookError::NonFiniteSeverity(y));
        }
        Ok(if y < 0.5 {
            ActionLevel::Ignore
        } else if y < 1.5 {
            ActionLevel::Log
        } else if y < 2.5 {
            ActionLevel::Email
        } else {
            ActionLevel::Sms
        })
    }
}

impl fmt::Display for ActionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionLevel {
    type Err = RulebookError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "IGNORE" => Ok(ActionLevel::Ignore),
            "LOG" => Ok(ActionLevel::Log),
            "EMAIL" => Ok(ActionLevel::Email),
            "SMS" => Ok(ActionLevel::Sms),
            other => Err(RulebookError::UnknownAction(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum RulebookError {
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("severity is not finite: {0}")]
    NonFiniteSeverity(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Invalid(#[from] FuzzyError),
}

pub const INTENSITY_TERMS: [&str; 5] = ["ExtremeLow", "Low", "Average", "High", "ExtremeHigh"];
pub const TIME_TERMS: [&str; 7] = [
    "MidNight",
    "AfterMid",
    "EarlyMorning",
    "Morning",
    "Afternoon",
    "Evening",
    "Night",
];

/// Intensity terms over the observed/baseline ratio axis [0, 2]; ratio 1.0 is
/// normal traffic and sits on the Average peak.
pub fn default_intensity_variable() -> LinguisticVariable {
    LinguisticVariable::ruspini(
        "intensity",
        0.0,
        2.0,
        false,
        &[
            (INTENSITY_TERMS[0], 0.0),
            (INTENSITY_TERMS[1], 0.5),
            (INTENSITY_TERMS[2], 1.0),
            (INTENSITY_TERMS[3], 1.5),
            (INTENSITY_TERMS[4], 2.0),
        ],
    )
    .expect("default intensity variable is valid")
}

/// Seven time-of-day terms on the circular 24h domain.
pub fn default_time_variable() -> LinguisticVariable {
    LinguisticVariable::ruspini(
        "time",
        0.0,
        24.0,
        true,
        &[
            (TIME_TERMS[0], 0.0),
            (TIME_TERMS[1], 2.5),
            (TIME_TERMS[2], 6.0),
            (TIME_TERMS[3], 10.0),
            (TIME_TERMS[4], 14.0),
            (TIME_TERMS[5], 18.0),
            (TIME_TERMS[6], 21.0),
        ],
    )
    .expect("default time variable is valid")
}

use ActionLevel::{Email as E, Ignore as I, Log as L, Sms as S};

/// Initial control rules, rows in time-term order (MidNight first), columns
/// in intensity-term order (ExtremeLow first).
pub const INITIAL_RULES: [[ActionLevel; 5]; 7] = [
    [S, I, L, S, S], // MidNight
    [S, I, L, S, S], // AfterMid
    [S, I, L, E, S], // EarlyMorning
    [S, L, I, I, S], // Morning
    [S, I, I, L, S], // Afternoon
    [S, L, I, I, S], // Evening
    [S, I, L, E, S], // Night
];

/// Action for a (intensity term, time term) cell of the initial table.
pub fn initial_action(intensity: usize, time: usize) -> ActionLevel {
    INITIAL_RULES[time][intensity]
}

/// Build the rule base for one module: variables [intensity, time], 35 rules
/// with zero-order consequents carrying the action code. All modules start from the
/// same table; per-module divergence arrives via tuning or file overrides.
pub fn build_rulebase(_kind: ModuleKind) -> RuleBase {
    let intensity = default_intensity_variable();
    let time = default_time_variable();
    let mut rules = Vec::with_capacity(35);
    for ti in 0..TIME_TERMS.len() {
        for ii in 0..INTENSITY_TERMS.len() {
            rules.push(TsRule {
                antecedent: vec![ii, ti],
                coeffs: vec![initial_action(ii, ti).code() as f64],
            });
        }
    }
    RuleBase::new(vec![intensity, time], rules, TNorm::Product)
        .expect("initial rule base is valid")
}

// --- rule-base file format ------------------------------------------------
//
//   rulebase v1
//   tnorm product|min
//   variable <name> <min> <max> [circular]
//   term <name> <left> <peak> <right> [left-shoulder] [right-shoulder]
//   ...
//   rules
//   <term-per-variable...> : <coeff...>
//   end
//
// Blank lines and lines starting with `#` are ignored. Floats print in
// shortest round-trip form, so save -> load is the identity.

pub fn format_rulebase(rb: &RuleBase) -> String {
    let mut out = String::new();
    out.push_str("rulebase v1\n");
    out.push_str(match rb.tnorm() {
        TNorm::Product => "tnorm product\n",
        TNorm::Min => "tnorm min\n",
    });
    for v in rb.variables() {
        out.push_str(&format!(
            "variable {} {} {}{}\n",
            v.name(),
            v.domain_min(),
            v.domain_max(),
            if v.circular() { " circular" } else { "" }
        ));
        for t in v.terms() {
            out.push_str(&format!(
                "term {} {} {} {}{}{}\n",
                t.name,
                t.mf.left(),
                t.mf.peak(),
                t.mf.right(),
                if t.mf.left_shoulder() { " left-shoulder" } else { "" },
                if t.mf.right_shoulder() { " right-shoulder" } else { "" },
            ));
        }
    }
    out.push_str("rules\n");
    for rule in rb.rules() {
        let names: Vec<&str> = rule
            .antecedent
            .iter()
            .enumerate()
            .map(|(vi, &ti)| rb.variables()[vi].terms()[ti].name.as_str())
            .collect();
        let coeffs: Vec<String> = rule.coeffs.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("{} : {}\n", names.join(" "), coeffs.join(" ")));
    }
    out.push_str("end\n");
    out
}

pub fn save_rulebase(rb: &RuleBase, path: &Path) -> Result<(), RulebookError> {
    fs::write(path, format_rulebase(rb))?;
    Ok(())
}

pub fn load_rulebase(path: &Path) -> Result<RuleBase, RulebookError> {
    parse_rulebase(&fs::read_to_string(path)?)
}

pub fn parse_rulebase(text: &str) -> Result<RuleBase, RulebookError> {
    let err = |line: usize, msg: String| RulebookError::Parse { line, msg };
    let parse_f64 = |line: usize, s: &str| -> Result<f64, RulebookError> {
        s.parse::<f64>()
            .map_err(|_| err(line, format!("bad number `{s}`")))
    };

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, header) = lines
        .next()
        .ok_or_else(|| err(0, "empty file".into()))?;
    if header != "rulebase v1" {
        return Err(err(ln, format!("expected `rulebase v1`, got `{header}`")));
    }
    let (ln, tnorm_line) = lines
        .next()
        .ok_or_else(|| err(ln, "missing tnorm line".into()))?;
    let tnorm = match tnorm_line {
        "tnorm product" => TNorm::Product,
        "tnorm min" => TNorm::Min,
        other => return Err(err(ln, format!("expected tnorm line, got `{other}`"))),
    };

    // (line, name, min, max, circular, terms) of the variable being read
    type PendingVariable = (usize, String, f64, f64, bool, Vec<Term>);
    let mut variables: Vec<LinguisticVariable> = Vec::new();
    let mut pending: Option<PendingVariable> = None;
    let mut saw_end = false;
    let mut raw_rules: Vec<(usize, Vec<String>, Vec<f64>)> = Vec::new();
    let mut in_rules = false;

    let finish_variable = |pending: &mut Option<PendingVariable>,
                           variables: &mut Vec<LinguisticVariable>|
     -> Result<(), RulebookError> {
        if let Some((vln, name, min, max, circular, terms)) = pending.take() {
            let var = LinguisticVariable::new(&name, min, max, circular, terms)
                .map_err(|e| err(vln, e.to_string()))?;
            variables.push(var);
        }
        Ok(())
    };

    for (ln, line) in lines {
        if in_rules {
            if line == "end" {
                saw_end = true;
                in_rules = false;
                continue;
            }
            if saw_end {
                return Err(err(ln, format!("content after end marker: `{line}`")));
            }
            let (lhs, rhs) = line
                .split_once(':')
                .ok_or_else(|| err(ln, "rule line missing `:`".into()))?;
            let names: Vec<String> = lhs.split_whitespace().map(str::to_string).collect();
            let coeffs = rhs
                .split_whitespace()
                .map(|s| parse_f64(ln, s))
                .collect::<Result<Vec<f64>, _>>()?;
            if names.is_empty() || coeffs.is_empty() {
                return Err(err(ln, "rule needs terms and coefficients".into()));
            }
            raw_rules.push((ln, names, coeffs));
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "variable" => {
                finish_variable(&mut pending, &mut variables)?;
                if fields.len() < 4 || fields.len() > 5 {
                    return Err(err(ln, "variable line: name min max [circular]".into()));
                }
                let circular = match fields.get(4) {
                    None => false,
                    Some(&"circular") => true,
                    Some(other) => {
                        return Err(err(ln, format!("unexpected token `{other}`")))
                    }
                };
                pending = Some((
                    ln,
                    fields[1].to_string(),
                    parse_f64(ln, fields[2])?,
                    parse_f64(ln, fields[3])?,
                    circular,
                    Vec::new(),
                ));
            }
            "term" => {
                let slot = pending
                    .as_mut()
                    .ok_or_else(|| err(ln, "term outside a variable block".into()))?;
                if fields.len() < 5 || fields.len() > 7 {
                    return Err(err(
                        ln,
                        "term line: name left peak right [left-shoulder] [right-shoulder]".into(),
                    ));
                }
                let mut left_shoulder = false;
                let mut right_shoulder = false;
                for &flag in &fields[5..] {
                    match flag {
                        "left-shoulder" => left_shoulder = true,
                        "right-shoulder" => right_shoulder = true,
                        other => return Err(err(ln, format!("unknown flag `{other}`"))),
                    }
                }
                let mf = TriangularMf::with_shoulders(
                    parse_f64(ln, fields[2])?,
                    parse_f64(ln, fields[3])?,
                    parse_f64(ln, fields[4])?,
                    left_shoulder,
                    right_shoulder,
                )
                .map_err(|e| err(ln, e.to_string()))?;
                slot.5.push(Term { name: fields[1].to_string(), mf });
            }
            "rules" => {
                finish_variable(&mut pending, &mut variables)?;
                in_rules = true;
            }
            other => return Err(err(ln, format!("unexpected line `{other}`"))),
        }
    }
    if !saw_end {
        return Err(err(text.lines().count(), "missing end marker".into()));
    }
    if variables.is_empty() {
        return Err(err(0, "no variables declared".into()));
    }

    let mut rules = Vec::with_capacity(raw_rules.len());
    for (ln, names, coeffs) in raw_rules {
        if names.len() != variables.len() {
            return Err(err(
                ln,
                format!("rule names {} != variable count {}", names.len(), variables.len()),
            ));
        }
        let antecedent = names
            .iter()
            .zip(&variables)
            .map(|(name, var)| {
                var.term_index(name).ok_or_else(|| {
                    err(ln, format!("unknown term `{name}` for variable `{}`", var.name()))
                })
            })
            .collect::<Result<Vec<usize>, _>>()?;
        rules.push(TsRule { antecedent, coeffs });
    }
    Ok(RuleBase::new(variables, rules, tnorm)?)
}
