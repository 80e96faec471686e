//! The wiring between modules: survey, detect and tune runs over a record
//! stream. The CLI subcommands are thin shells around these functions, and
//! the acceptance suite drives them in-process.

use std::io::Write;

use thiserror::Error;

use crate::alerting::{decide, AlertError, Dispatcher, Gate, SuppressionState};
use crate::baseline::{BaselineError, ProfileSet};
use crate::config::Config;
use crate::fuzzy::{FuzzyError, RuleBase};
use crate::ingest::{features, time_of_day, Bucket, Bucketizer, FlowRecord, IngestError};
use crate::rulebook::{build_rulebase, load_rulebase, ActionLevel, ModuleKind, RulebookError};
use crate::tuner::{batch_tune, TuneReport, TuneSample, TunerError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Rulebook(#[from] RulebookError),
    #[error(transparent)]
    Alert(#[from] AlertError),
    #[error(transparent)]
    Tuner(#[from] TunerError),
}

/// One rule base per feature module.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleRuleBases([RuleBase; 4]);

impl ModuleRuleBases {
    pub fn defaults() -> Self {
        Self(ModuleKind::ALL.map(build_rulebase))
    }

    /// Defaults, with per-module overrides loaded from the configured files.
    pub fn from_config(cfg: &Config) -> Result<Self, PipelineError> {
        let mut rbs = Self::defaults();
        for kind in ModuleKind::ALL {
            if let Some(path) = cfg.rulebase_path(kind) {
                rbs.0[kind.index()] = load_rulebase(path)?;
            }
        }
        Ok(rbs)
    }

    pub fn get(&self, kind: ModuleKind) -> &RuleBase {
        &self.0[kind.index()]
    }

    pub fn set(&mut self, kind: ModuleKind, rb: RuleBase) {
        self.0[kind.index()] = rb;
    }
}

fn drain_buckets(
    records: impl Iterator<Item = Result<FlowRecord, IngestError>>,
    window_len: f64,
    parse_errors: &mut u64,
    mut on_bucket: impl FnMut(&Bucket) -> Result<(), PipelineError>,
) -> Result<u64, PipelineError> {
    let mut bucketizer = Bucketizer::new(window_len, 0.0)?;
    for record in records {
        match record {
            Ok(r) => {
                for bucket in bucketizer.push(&r) {
                    on_bucket(&bucket)?;
                }
            }
            Err(IngestError::Io(e)) => return Err(IngestError::Io(e).into()),
            Err(_) => *parse_errors += 1,
        }
    }
    let rejected = bucketizer.rejected;
    if let Some(bucket) = bucketizer.finish() {
        on_bucket(&bucket)?;
    }
    Ok(rejected)
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct SurveySummary {
    pub windows: u64,
    pub rejected: u64,
    pub parse_errors: u64,
    pub uncovered_slots: usize,
    pub total_slots: usize,
}

/// Survey mode: learn the baseline profile from a record stream.
pub fn run_survey(
    records: impl Iterator<Item = Result<FlowRecord, IngestError>>,
    cfg: &Config,
    profiles: &mut ProfileSet,
) -> Result<SurveySummary, PipelineError> {
    let mut summary = SurveySummary::default();
    summary.rejected = drain_buckets(records, cfg.window_len, &mut summary.parse_errors, |bucket| {
        summary.windows += 1;
        for sample in features(bucket, cfg.link_capacity_bps)? {
            profiles.get_mut(sample.module).survey_update(&sample, cfg.utc_offset)?;
        }
        Ok(())
    })?;
    summary.uncovered_slots = profiles.uncovered_slots();
    summary.total_slots = profiles.total_slots();
    Ok(summary)
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct DetectSummary {
    /// Decisions per action level (Ignore, Log, Email, Sms), before
    /// suppression.
    pub decisions: [u64; 4],
    /// Same, broken out per module (module index x action code).
    pub decisions_by_module: [[u64; 4]; 4],
    /// Dispatches per action level after rate limiting.
    pub dispatched: [u64; 4],
    pub suppressed: u64,
    pub cold_start_skips: u64,
    pub windows: u64,
    pub rejected: u64,
    pub parse_errors: u64,
    pub delivery_failures: u64,
}

/// Ready-to-Alert mode: stream records through bucketing, normalization,
/// fuzzy evaluation, decision, rate limiting and dispatch.
pub fn run_detect<W: Write>(
    records: impl Iterator<Item = Result<FlowRecord, IngestError>>,
    cfg: &Config,
    profiles: &ProfileSet,
    rulebases: &ModuleRuleBases,
    dispatcher: &mut Dispatcher<W>,
) -> Result<DetectSummary, PipelineError> {
    let mut summary = DetectSummary::default();
    let mut suppression = SuppressionState::new(cfg.cooldown);
    summary.rejected = drain_buckets(records, cfg.window_len, &mut summary.parse_errors, |bucket| {
        summary.windows += 1;
        let tod = time_of_day(bucket.window_start, cfg.utc_offset);
        for sample in features(bucket, cfg.link_capacity_bps)? {
            let normalized = match profiles.get(sample.module).normalize(&sample, cfg.utc_offset) {
                Ok(n) => n,
                Err(BaselineError::ColdStart { .. }) => {
                    summary.cold_start_skips += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let result = rulebases.get(sample.module).evaluate(&[normalized.ratio, tod])?;
            let action = ActionLevel::from_severity(result.output)?;
            summary.decisions[action.code() as usize] += 1;
            summary.decisions_by_module[sample.module.index()][action.code() as usize] += 1;
            if let Some(event) =
                decide(sample.module, bucket.window_start, result.output, normalized.ratio, tod)?
            {
                match suppression.rate_limit(&event) {
                    Gate::Dispatch(e) => {
                        dispatcher.dispatch(&e);
                        summary.dispatched[e.action.code() as usize] += 1;
                    }
                    Gate::Suppress => summary.suppressed += 1,
                }
            }
        }
        Ok(())
    })?;
    summary.delivery_failures = dispatcher.delivery_failures;
    Ok(summary)
}

#[derive(Debug)]
pub struct TuneOutcome {
    pub rulebases: ModuleRuleBases,
    pub reports: Vec<(ModuleKind, TuneReport)>,
}

/// Tune mode: treat the stream as Normal traffic, derive per-module
/// (ratio, time-of-day) samples, and displace each intensity variable.
/// The last fifth of each module's samples is held out for the before/after
/// false-alert measurement.
pub fn run_tune(
    records: impl Iterator<Item = Result<FlowRecord, IngestError>>,
    cfg: &Config,
    profiles: &ProfileSet,
    rulebases: &ModuleRuleBases,
) -> Result<TuneOutcome, PipelineError> {
    let mut samples: [Vec<TuneSample>; 4] = Default::default();
    let mut parse_errors = 0;
    drain_buckets(records, cfg.window_len, &mut parse_errors, |bucket| {
        let tod = time_of_day(bucket.window_start, cfg.utc_offset);
        for sample in features(bucket, cfg.link_capacity_bps)? {
            match profiles.get(sample.module).normalize(&sample, cfg.utc_offset) {
                Ok(n) => samples[sample.module.index()]
                    .push(TuneSample { ratio: n.ratio, time_of_day: tod }),
                Err(BaselineError::ColdStart { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(())
    })?;

    let mut tuned = rulebases.clone();
    let mut reports = Vec::new();
    for kind in ModuleKind::ALL {
        let module_samples = &samples[kind.index()];
        let split = module_samples.len() - module_samples.len() / 5;
        let (train, holdout) = module_samples.split_at(split);
        let (rb, report) =
            batch_tune(rulebases.get(kind), 0, train, holdout, &cfg.tuner_config())?;
        tuned.set(kind, rb);
        reports.push((kind, report));
    }
    Ok(TuneOutcome { rulebases: tuned, reports })
}
