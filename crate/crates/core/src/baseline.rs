//! Survey mode: per-module, per-time-slot traffic profiles and the
//! normalization of live samples into the intensity ratio.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::ingest::{time_of_day, FeatureSample};
use crate::rulebook::ModuleKind;

pub const SECONDS_PER_DAY: u32 = 86_400;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("slot_len {0} does not divide 86400")]
    BadSlotLen(u32),
    #[error("sample module {sample} does not match profile module {profile}")]
    ModuleMismatch { sample: ModuleKind, profile: ModuleKind },
    #[error("cold start: slot {slot} of {module} has no survey data")]
    ColdStart { module: ModuleKind, slot: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("profile file corrupt at line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
}

/// Running one-pass statistics for a slot (Welford accumulator).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlotStat {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl SlotStat {
    pub fn update(&mut self, value: f64) {
        self.n += 1;
        let delta = value - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.n >= 2 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }
}

/// Normalized intensity input for the fuzzy engine. `low_confidence` flags
/// slots with a single survey sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedInput {
    pub ratio: f64,
    pub zscore: f64,
    pub low_confidence: bool,
}

/// Learned traffic curve for one module: time-of-day slots, optionally
/// stratified by day of week.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineProfile {
    module: ModuleKind,
    slot_len: u32,
    weekly: bool,
    epsilon: f64,
    slots: Vec<SlotStat>,
}

impl BaselineProfile {
    pub fn new(
        module: ModuleKind,
        slot_len: u32,
        weekly: bool,
        epsilon: f64,
    ) -> Result<Self, BaselineError> {
        if slot_len == 0 || !SECONDS_PER_DAY.is_multiple_of(slot_len) {
            return Err(BaselineError::BadSlotLen(slot_len));
        }
        let per_day = (SECONDS_PER_DAY / slot_len) as usize;
        let count = if weekly { per_day * 7 } else { per_day };
        Ok(Self {
            module,
            slot_len,
            weekly,
            epsilon,
            slots: vec![SlotStat::default(); count],
        })
    }

    pub fn module(&self) -> ModuleKind {
        self.module
    }

    pub fn slot_len(&self) -> u32 {
        self.slot_len
    }

    pub fn slots(&self) -> &[SlotStat] {
        &self.slots
    }

    pub fn slot_of(&self, ts: f64, utc_offset: f64) -> usize {
        let tod = time_of_day(ts, utc_offset);
        let per_day = (SECONDS_PER_DAY / self.slot_len) as usize;
        let slot = ((tod * 3600.0) / self.slot_len as f64) as usize % per_day;
        if self.weekly {
            let day = ((ts + utc_offset * 3600.0) / SECONDS_PER_DAY as f64).floor() as i64;
            let dow = day.rem_euclid(7) as usize;
            dow * per_day + slot
        } else {
            slot
        }
    }

    pub fn survey_update(
        &mut self,
        sample: &FeatureSample,
        utc_offset: f64,
    ) -> Result<(), BaselineError> {
        if sample.module != self.module {
            return Err(BaselineError::ModuleMismatch {
                sample: sample.module,
                profile: self.module,
            });
        }
        let slot = self.slot_of(sample.ts, utc_offset);
        self.slots[slot].update(sample.value);
        Ok(())
    }

    pub fn normalize(
        &self,
        sample: &FeatureSample,
        utc_offset: f64,
    ) -> Result<NormalizedInput, BaselineError> {
        if sample.module != self.module {
            return Err(BaselineError::ModuleMismatch {
                sample: sample.module,
                profile: self.module,
            });
        }
        let slot = self.slot_of(sample.ts, utc_offset);
        let stat = &self.slots[slot];
        if stat.n == 0 {
            return Err(BaselineError::ColdStart { module: self.module, slot });
        }
        Ok(NormalizedInput {
            ratio: sample.value / stat.mean.max(self.epsilon),
            zscore: (sample.value - stat.mean) / stat.std_dev().max(self.epsilon),
            low_confidence: stat.n == 1,
        })
    }

    /// Slots that never saw a survey sample.
    pub fn uncovered_slots(&self) -> usize {
        self.slots.iter().filter(|s| s.n == 0).count()
    }
}

/// All four module profiles, persisted together.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub slot_len: u32,
    pub weekly: bool,
    pub epsilon: f64,
    profiles: Vec<BaselineProfile>,
}

impl ProfileSet {
    pub fn new(slot_len: u32, weekly: bool, epsilon: f64) -> Result<Self, BaselineError> {
        let profiles = ModuleKind::ALL
            .into_iter()
            .map(|kind| BaselineProfile::new(kind, slot_len, weekly, epsilon))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { slot_len, weekly, epsilon, profiles })
    }

    pub fn get(&self, kind: ModuleKind) -> &BaselineProfile {
        &self.profiles[kind.index()]
    }

    pub fn get_mut(&mut self, kind: ModuleKind) -> &mut BaselineProfile {
        &mut self.profiles[kind.index()]
    }

    pub fn uncovered_slots(&self) -> usize {
        self.profiles.iter().map(|p| p.uncovered_slots()).sum()
    }

    pub fn total_slots(&self) -> usize {
        self.profiles.iter().map(|p| p.slots.len()).sum()
    }

    // File format: versioned header, then one line per (module, slot) with
    // n/mean/M2, closed by an `end` marker so truncation is detectable.
    pub fn format(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "profile v1 slot_len={} weekly={} epsilon={}\n",
            self.slot_len,
            if self.weekly { 1 } else { 0 },
            self.epsilon
        ));
        for p in &self.profiles {
            for (i, s) in p.slots.iter().enumerate() {
                out.push_str(&format!(
                    "slot {} {} {} {} {}\n",
                    p.module, i, s.n, s.mean, s.m2
                ));
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), BaselineError> {
        fs::write(path, self.format())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, BaselineError> {
        let corrupt = |line: usize, msg: String| BaselineError::Corrupt { line, msg };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (ln, header) = lines
            .next()
            .ok_or_else(|| corrupt(0, "empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "profile" || fields[1] != "v1" {
            return Err(corrupt(ln, format!("bad header `{header}`")));
        }
        let get = |line: usize, field: &str, prefix: &str| -> Result<String, BaselineError> {
            field
                .strip_prefix(prefix)
                .map(str::to_string)
                .ok_or_else(|| corrupt(line, format!("expected `{prefix}...`, got `{field}`")))
        };
        let slot_len: u32 = get(ln, fields[2], "slot_len=")?
            .parse()
            .map_err(|_| corrupt(ln, "bad slot_len".into()))?;
        let weekly = get(ln, fields[3], "weekly=")? == "1";
        let epsilon: f64 = get(ln, fields[4], "epsilon=")?
            .parse()
            .map_err(|_| corrupt(ln, "bad epsilon".into()))?;
        let mut set = ProfileSet::new(slot_len, weekly, epsilon)?;
        let mut filled = 0usize;
        let mut saw_end = false;
        for (ln, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "end" {
                saw_end = true;
                continue;
            }
            if saw_end {
                return Err(corrupt(ln, "content after end marker".into()));
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 || f[0] != "slot" {
                return Err(corrupt(ln, format!("bad slot line `{line}`")));
            }
            let module: ModuleKind =
                f[1].parse().map_err(|_| corrupt(ln, format!("bad module `{}`", f[1])))?;
            let idx: usize = f[2].parse().map_err(|_| corrupt(ln, "bad slot index".into()))?;
            let profile = set.get_mut(module);
            if idx >= profile.slots.len() {
                return Err(corrupt(ln, format!("slot index {idx} out of range")));
            }
            profile.slots[idx] = SlotStat {
                n: f[3].parse().map_err(|_| corrupt(ln, "bad n".into()))?,
                mean: f[4].parse().map_err(|_| corrupt(ln, "bad mean".into()))?,
                m2: f[5].parse().map_err(|_| corrupt(ln, "bad m2".into()))?,
            };
            filled += 1;
        }
        if !saw_end {
            return Err(corrupt(text.lines().count(), "missing end marker".into()));
        }
        let expected = set.total_slots();
        if filled != expected {
            return Err(corrupt(0, format!("expected {expected} slot lines, got {filled}")));
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(module: ModuleKind, ts: f64, value: f64) -> FeatureSample {
        FeatureSample { module, ts, value }
    }

    #[test]
    fn two_point_mean() {
        let mut p = BaselineProfile::new(ModuleKind::IpCount, 1800, false, 1.0).unwrap();
        p.survey_update(&sample(ModuleKind::IpCount, 100.0, 10.0), 0.0).unwrap();
        p.survey_update(&sample(ModuleKind::IpCount, 200.0, 20.0), 0.0).unwrap();
        let s = p.slots()[0];
        assert_eq!(s.n, 2);
        assert!((s.mean - 15.0).abs() < 1e-12);
    }

    #[test]
    fn single_sample_variance_zero_flagged() {
        let mut p = BaselineProfile::new(ModuleKind::IpCount, 1800, false, 1.0).unwrap();
        p.survey_update(&sample(ModuleKind::IpCount, 0.0, 10.0), 0.0).unwrap();
        assert_eq!(p.slots()[0].variance(), 0.0);
        let n = p.normalize(&sample(ModuleKind::IpCount, 0.0, 10.0), 0.0).unwrap();
        assert!(n.low_confidence);
    }

    #[test]
    fn matches_two_pass_oracle() {
        // deterministic but irregular values
        let values: Vec<f64> = (0..1000)
            .map(|i| 100.0 + 37.0 * ((i * 7919 % 101) as f64 / 101.0) - 12.5)
            .collect();
        let mut stat = SlotStat::default();
        for &v in &values {
            stat.update(v);
        }
        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        let var: f64 =
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
        assert!((stat.mean - mean).abs() < 1e-9);
        assert!((stat.variance() - var).abs() < 1e-9);
    }

    #[test]
    fn normalize_ratio_and_cold_start() {
        let mut p = BaselineProfile::new(ModuleKind::IpCount, 1800, false, 1.0).unwrap();
        p.survey_update(&sample(ModuleKind::IpCount, 0.0, 100.0), 0.0).unwrap();
        p.survey_update(&sample(ModuleKind::IpCount, 60.0, 100.0), 0.0).unwrap();
        let n = p.normalize(&sample(ModuleKind::IpCount, 10.0, 150.0), 0.0).unwrap();
        assert!((n.ratio - 1.5).abs() < 1e-12);
        let n = p.normalize(&sample(ModuleKind::IpCount, 10.0, 0.0), 0.0).unwrap();
        assert_eq!(n.ratio, 0.0);
        // a slot in the afternoon never surveyed
        let e = p.normalize(&sample(ModuleKind::IpCount, 50_000.0, 1.0), 0.0).unwrap_err();
        assert!(matches!(e, BaselineError::ColdStart { .. }));
    }

    #[test]
    fn epsilon_floors_zero_mean() {
        let mut p = BaselineProfile::new(ModuleKind::IpCount, 1800, false, 1.0).unwrap();
        p.survey_update(&sample(ModuleKind::IpCount, 0.0, 0.0), 0.0).unwrap();
        let n = p.normalize(&sample(ModuleKind::IpCount, 0.0, 100.0), 0.0).unwrap();
        assert_eq!(n.ratio, 100.0);
    }

    #[test]
    fn module_mismatch_rejected() {
        let mut p = BaselineProfile::new(ModuleKind::IpCount, 1800, false, 1.0).unwrap();
        let e = p.survey_update(&sample(ModuleKind::IpxCount, 0.0, 1.0), 0.0).unwrap_err();
        assert!(matches!(e, BaselineError::ModuleMismatch { .. }));
    }

    #[test]
    fn bad_slot_len_rejected() {
        assert!(BaselineProfile::new(ModuleKind::IpCount, 7000, false, 1.0).is_err());
        assert!(ProfileSet::new(0, false, 1.0).is_err());
    }

    #[test]
    fn profile_round_trip() {
        let mut set = ProfileSet::new(1800, false, 1.0).unwrap();
        for i in 0..200 {
            let ts = i as f64 * 600.0;
            set.get_mut(ModuleKind::IpCount)
                .survey_update(&sample(ModuleKind::IpCount, ts, 50.0 + i as f64), 0.0)
                .unwrap();
            set.get_mut(ModuleKind::BytesPerSec)
                .survey_update(&sample(ModuleKind::BytesPerSec, ts, 1000.0 + i as f64), 0.0)
                .unwrap();
        }
        let back = ProfileSet::parse(&set.format()).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let set = ProfileSet::new(1800, false, 1.0).unwrap();
        let text = set.format();
        let cut = &text[..text.len() / 2];
        assert!(matches!(
            ProfileSet::parse(cut),
            Err(BaselineError::Corrupt { .. })
        ));
    }

    #[test]
    fn header_slot_len_validated() {
        let text = "profile v1 slot_len=7000 weekly=0 epsilon=1\nend\n";
        assert!(matches!(
            ProfileSet::parse(text),
            Err(BaselineError::BadSlotLen(7000))
        ));
    }

    #[test]
    fn weekly_stratification_separates_days() {
        let p = BaselineProfile::new(ModuleKind::IpCount, 1800, true, 1.0).unwrap();
        let same_tod_next_day = 86_400.0 + 3600.0;
        assert_ne!(p.slot_of(3600.0, 0.0), p.slot_of(same_tod_next_day, 0.0));
        let flat = BaselineProfile::new(ModuleKind::IpCount, 1800, false, 1.0).unwrap();
        assert_eq!(flat.slot_of(3600.0, 0.0), flat.slot_of(same_tod_next_day, 0.0));
    }
}
