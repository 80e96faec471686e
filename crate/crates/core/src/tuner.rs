//! Online vertex-displacement tuner for the intensity variable.
//!
//! A deterministic rule keeps the feedback loop auditable: when a sample
//! labeled Normal still produced an alert, the peak of the term firing
//! strongest at that ratio is displaced toward it by eta * (x - peak),
//! clipped so term ordering and a total displacement budget are preserved.

use thiserror::Error;

use crate::fuzzy::{FuzzyError, LinguisticVariable, RuleBase};
use crate::rulebook::ActionLevel;

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("invalid tuner config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunerConfig {
    pub eta: f64,
    pub max_total_disp: f64,
    pub keep_order_margin: f64,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self { eta: 0.05, max_total_disp: 0.25, keep_order_margin: 0.1 }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<(), TunerError> {
        if !(self.eta >= 0.0 && self.eta < 1.0) {
            return Err(TunerError::BadConfig(format!("eta {} not in [0,1)", self.eta)));
        }
        if self.max_total_disp < 0.0 {
            return Err(TunerError::BadConfig("max_total_disp < 0".into()));
        }
        if self.keep_order_margin <= 0.0 {
            return Err(TunerError::BadConfig("keep_order_margin must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleLabel {
    Normal,
    Anomalous,
}

/// Per-term cumulative displacement since tuning started.
#[derive(Debug, Clone, PartialEq)]
pub struct TunerState {
    pub cumulative: Vec<f64>,
}

impl TunerState {
    pub fn for_variable(variable: &LinguisticVariable) -> Self {
        Self { cumulative: vec![0.0; variable.terms().len()] }
    }
}

/// One normalized detection outcome fed to the tuner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneSample {
    pub ratio: f64,
    pub time_of_day: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneReport {
    pub per_term_displacement: Vec<(String, f64)>,
    pub samples_seen: usize,
    pub false_alerts_before: usize,
    pub false_alerts_after: usize,
    pub warning: Option<String>,
}

/// Apply one displacement step in place. No-op unless the sample was Normal
/// and the decision escalated past Ignore.
pub fn online_tune_step(
    variable: &mut LinguisticVariable,
    state: &mut TunerState,
    x: f64,
    decided: ActionLevel,
    label: SampleLabel,
    cfg: &TunerConfig,
) -> Result<(), TunerError> {
    cfg.validate()?;
    if label != SampleLabel::Normal || decided == ActionLevel::Ignore {
        return Ok(());
    }
    let degrees = variable.fuzzify(x);
    let (term, _) = degrees
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("memberships are finite"))
        .expect("variable has terms");
    let x = variable.project(x);
    let peaks: Vec<f64> = variable.terms().iter().map(|t| t.mf.peak()).collect();
    let old_peak = peaks[term];
    let mut target = old_peak + cfg.eta * (x - old_peak);

    // Order margin against the neighbor peaks, then the displacement budget,
    // then the domain itself. Constrained moves clip, never reject.
    if term > 0 {
        target = target.max(peaks[term - 1] + cfg.keep_order_margin);
    }
    if term + 1 < peaks.len() {
        target = target.min(peaks[term + 1] - cfg.keep_order_margin);
    }
    let base = old_peak - state.cumulative[term];
    target = target.clamp(base - cfg.max_total_disp, base + cfg.max_total_disp);
    target = target.clamp(variable.domain_min(), variable.domain_max());
    if target == old_peak {
        return Ok(());
    }
    state.cumulative[term] += target - old_peak;

    let mut new_peaks = peaks;
    new_peaks[term] = target;
    let named: Vec<(&str, f64)> = variable
        .terms()
        .iter()
        .zip(&new_peaks)
        .map(|(t, &p)| (t.name.as_str(), p))
        .collect();
    *variable = LinguisticVariable::ruspini(
        variable.name(),
        variable.domain_min(),
        variable.domain_max(),
        variable.circular(),
        &named,
    )?;
    Ok(())
}

fn count_false_alerts(rb: &RuleBase, samples: &[TuneSample]) -> Result<usize, TunerError> {
    let mut count = 0;
    for s in samples {
        let result = rb.evaluate(&[s.ratio, s.time_of_day])?;
        let action = ActionLevel::from_severity(result.output)
            .map_err(|e| TunerError::BadConfig(e.to_string()))?;
        if action > ActionLevel::Ignore {
            count += 1;
        }
    }
    Ok(count)
}

/// Offline wrapper over the online steps: replays Normal-labeled samples
/// through the rule base, displacing the intensity variable, and measures
/// false alerts on the held-out set before and after.
pub fn batch_tune(
    rb: &RuleBase,
    intensity_index: usize,
    samples: &[TuneSample],
    holdout: &[TuneSample],
    cfg: &TunerConfig,
) -> Result<(RuleBase, TuneReport), TunerError> {
    cfg.validate()?;
    let before = count_false_alerts(rb, holdout)?;
    let mut variable = rb.variables()[intensity_index].clone();
    let mut state = TunerState::for_variable(&variable);
    let mut current = rb.clone();
    for s in samples {
        let result = current.evaluate(&[s.ratio, s.time_of_day])?;
        let decided = ActionLevel::from_severity(result.output)
            .map_err(|e| TunerError::BadConfig(e.to_string()))?;
        let old = variable.clone();
        online_tune_step(&mut variable, &mut state, s.ratio, decided, SampleLabel::Normal, cfg)?;
        if variable != old {
            current = current.with_variable(intensity_index, variable.clone())?;
        }
    }
    let after = count_false_alerts(&current, holdout)?;
    let report = TuneReport {
        per_term_displacement: variable
            .terms()
            .iter()
            .zip(&state.cumulative)
            .map(|(t, &d)| (t.name.clone(), d))
            .collect(),
        samples_seen: samples.len(),
        false_alerts_before: before,
        false_alerts_after: after,
        warning: samples.is_empty().then(|| "empty sample list, tuning skipped".to_string()),
    };
    Ok((current, report))
}
