//! Alert-log summarization: per-module counts by action, top anomalous
//! windows and plain columnar data files for external plotting.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::rulebook::{ActionLevel, ModuleKind};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedAlert {
    pub ts: f64,
    pub module: ModuleKind,
    pub action: ActionLevel,
    pub severity: f64,
    pub ratio: f64,
    pub time_of_day: f64,
    pub suppressed: u64,
    pub downgraded: bool,
}

/// Parse one alert-log line. Returns None for anything malformed.
pub fn parse_log_line(line: &str) -> Option<ParsedAlert> {
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for part in line.split_whitespace() {
        let (k, v) = part.split_once('=')?;
        fields.insert(k, v);
    }
    Some(ParsedAlert {
        ts: fields.get("ts")?.parse().ok()?,
        module: fields.get("module")?.parse().ok()?,
        action: fields.get("action")?.parse().ok()?,
        severity: fields.get("severity")?.parse().ok()?,
        ratio: fields.get("ratio")?.parse().ok()?,
        time_of_day: fields.get("tod")?.parse().ok()?,
        suppressed: fields.get("suppressed")?.parse().ok()?,
        downgraded: match *fields.get("downgraded")? {
            "0" => false,
            "1" => true,
            _ => return None,
        },
    })
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct ReportSummary {
    pub alerts: Vec<ParsedAlert>,
    pub counts: BTreeMap<(ModuleKind, ActionLevel), u64>,
    pub suppressed_total: u64,
    pub downgraded_total: u64,
    pub skipped: u64,
}

pub fn summarize(lines: impl Iterator<Item = String>) -> ReportSummary {
    let mut summary = ReportSummary::default();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        match parse_log_line(&line) {
            Some(alert) => {
                *summary.counts.entry((alert.module, alert.action)).or_default() += 1;
                summary.suppressed_total += alert.suppressed;
                if alert.downgraded {
                    summary.downgraded_total += 1;
                }
                summary.alerts.push(alert);
            }
            None => summary.skipped += 1,
        }
    }
    summary
}

impl ReportSummary {
    /// The highest-severity alerts, worst first.
    pub fn top_windows(&self, limit: usize) -> Vec<&ParsedAlert> {
        let mut sorted: Vec<&ParsedAlert> = self.alerts.iter().collect();
        sorted.sort_by(|a, b| b.severity.partial_cmp(&a.severity).expect("finite severities"));
        sorted.truncate(limit);
        sorted
    }

    pub fn render(&self) -> String {
        if self.alerts.is_empty() {
            return format!("no alerts (skipped={})\n", self.skipped);
        }
        let mut out = String::new();
        out.push_str("alerts by module and action:\n");
        for kind in ModuleKind::ALL {
            let row: Vec<String> = [ActionLevel::Log, ActionLevel::Email, ActionLevel::Sms]
                .into_iter()
                .map(|a| {
                    format!("{}={}", a, self.counts.get(&(kind, a)).copied().unwrap_or(0))
                })
                .collect();
            out.push_str(&format!("  {:14} {}\n", kind.to_string(), row.join(" ")));
        }
        out.push_str(&format!(
            "suppressed={} downgraded={} skipped={}\n",
            self.suppressed_total, self.downgraded_total, self.skipped
        ));
        out.push_str("top windows by severity:\n");
        for a in self.top_windows(10) {
            out.push_str(&format!(
                "  ts={:.0} {} {} severity={:.4} ratio={:.4}\n",
                a.ts, a.module, a.action, a.severity, a.ratio
            ));
        }
        out
    }

    /// One whitespace-columnar file per module: `ts severity ratio action`.
    pub fn write_plot_data(&self, dir: &Path) -> Result<(), ReportError> {
        fs::create_dir_all(dir)?;
        for kind in ModuleKind::ALL {
            let mut data = String::from("# ts severity ratio action\n");
            for a in self.alerts.iter().filter(|a| a.module == kind) {
                data.push_str(&format!(
                    "{:.3} {:.4} {:.4} {}\n",
                    a.ts,
                    a.severity,
                    a.ratio,
                    a.action.code()
                ));
            }
            fs::write(dir.join(format!("{kind}.dat")), data)?;
        }
        Ok(())
    }
}
