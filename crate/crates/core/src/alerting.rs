//! Alert decisions, counter-based suppression and sink dispatch.
//!
//! Severities become graded events; repeats of the same (module, action) key
//! within the cooldown are counted instead of delivered, and the counter
//! rides along on the next dispatch. Email/SMS transports are abstract
//! descriptors; sink failures are recorded and never reach the detection
//! path.

use std::collections::HashMap;
use std::io::Write;
use std::net::TcpStream;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use thiserror::Error;

use crate::rulebook::{ActionLevel, ModuleKind, RulebookError};

#[derive(Debug, Error)]
pub enum AlertError {
    #[error(transparent)]
    Rulebook(#[from] RulebookError),
    #[error("bad sink descriptor `{0}`: expected cmd:<command> or http://<host>/<path>")]
    BadDescriptor(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub const LOG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct AlertEvent {
    pub module: ModuleKind,
    pub ts: f64,
    pub severity: f64,
    pub action: ActionLevel,
    pub suppressed_count: u64,
    pub ratio: f64,
    pub time_of_day: f64,
}

/// Non-Ignore severities become events; Ignore stays silent.
pub fn decide(
    module: ModuleKind,
    ts: f64,
    severity: f64,
    ratio: f64,
    time_of_day: f64,
) -> Result<Option<AlertEvent>, AlertError> {
    let action = ActionLevel::from_severity(severity)?;
    if action == ActionLevel::Ignore {
        return Ok(None);
    }
    Ok(Some(AlertEvent {
        module,
        ts,
        severity,
        action,
        suppressed_count: 0,
        ratio,
        time_of_day,
    }))
}

#[derive(Debug, Clone, Copy, Default)]
struct KeyState {
    last_dispatch: Option<f64>,
    counter: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Dispatch(AlertEvent),
    Suppress,
}

/// Simple counter suppression keyed by (module, action).
#[derive(Debug)]
pub struct SuppressionState {
    cooldown: f64,
    keys: HashMap<(ModuleKind, ActionLevel), KeyState>,
}

impl SuppressionState {
    pub fn new(cooldown: f64) -> Self {
        Self { cooldown, keys: HashMap::new() }
    }

    pub fn rate_limit(&mut self, event: &AlertEvent) -> Gate {
        let state = self.keys.entry((event.module, event.action)).or_default();
        let due = match state.last_dispatch {
            None => true,
            Some(last) => event.ts - last >= self.cooldown,
        };
        if due {
            let mut out = event.clone();
            out.suppressed_count = state.counter;
            state.counter = 0;
            state.last_dispatch = Some(event.ts);
            Gate::Dispatch(out)
        } else {
            state.counter += 1;
            Gate::Suppress
        }
    }

    /// Counters not yet carried out by a dispatch, per key.
    pub fn pending(&self) -> HashMap<(ModuleKind, ActionLevel), u64> {
        self.keys
            .iter()
            .filter(|(_, s)| s.counter > 0)
            .map(|(&k, s)| (k, s.counter))
            .collect()
    }
}

/// Versioned, bit-exact alert log line.
pub fn format_log_line(event: &AlertEvent, downgraded: bool) -> String {
    format!(
        "ts={:.3} module={} action={} severity={:.4} ratio={:.4} tod={:.2} suppressed={} downgraded={}",
        event.ts,
        event.module,
        event.action,
        event.severity,
        event.ratio,
        event.time_of_day,
        event.suppressed_count,
        if downgraded { 1 } else { 0 }
    )
}

/// Outbound transport for Email/SMS actions.
#[derive(Debug, Clone, PartialEq)]
pub enum Transport {
    /// Shell command receiving the serialized event on stdin.
    Command(String),
    /// Plain-HTTP POST of the serialized event (no TLS; put a local relay in
    /// front for anything that needs it).
    Http(String),
}

impl Transport {
    pub fn parse(descriptor: &str) -> Result<Transport, AlertError> {
        if let Some(cmd) = descriptor.strip_prefix("cmd:") {
            if cmd.trim().is_empty() {
                return Err(AlertError::BadDescriptor(descriptor.to_string()));
            }
            Ok(Transport::Command(cmd.to_string()))
        } else if descriptor.starts_with("http://") {
            Ok(Transport::Http(descriptor.to_string()))
        } else {
            Err(AlertError::BadDescriptor(descriptor.to_string()))
        }
    }

    fn deliver(&self, payload: &str) -> Result<(), String> {
        match self {
            Transport::Command(cmd) => {
                let mut child = Command::new("sh")
                    .arg("-c")
                    .arg(cmd)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::null())
                    .stderr(Stdio::null())
                    .spawn()
                    .map_err(|e| e.to_string())?;
                child
                    .stdin
                    .as_mut()
                    .expect("stdin piped")
                    .write_all(payload.as_bytes())
                    .map_err(|e| e.to_string())?;
                let status = child.wait().map_err(|e| e.to_string())?;
                if status.success() {
                    Ok(())
                } else {
                    Err(format!("command exited with {status}"))
                }
            }
            Transport::Http(url) => {
                let rest = url.strip_prefix("http://").expect("validated prefix");
                let (host, path) = match rest.split_once('/') {
                    Some((h, p)) => (h.to_string(), format!("/{p}")),
                    None => (rest.to_string(), "/".to_string()),
                };
                let addr = if host.contains(':') { host.clone() } else { format!("{host}:80") };
                let mut stream = TcpStream::connect(&addr).map_err(|e| e.to_string())?;
                let req = format!(
                    "POST {path} HTTP/1.1\r\nHost: {host}\r\nContent-Type: text/plain\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                stream.write_all(req.as_bytes()).map_err(|e| e.to_string())?;
                Ok(())
            }
        }
    }
}

/// Sink wiring: the log sink is always on; Email/SMS degrade to a marked log
/// line when their transport is not configured.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkConfig {
    pub log_path: PathBuf,
    pub email: Option<Transport>,
    pub sms: Option<Transport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryRecord {
    pub line: String,
    pub downgraded: bool,
    pub external_error: Option<String>,
}

pub struct Dispatcher<W: Write> {
    log: W,
    email: Option<Transport>,
    sms: Option<Transport>,
    pub dispatched: u64,
    pub delivery_failures: u64,
}

impl<W: Write> Dispatcher<W> {
    pub fn new(log: W, email: Option<Transport>, sms: Option<Transport>) -> Self {
        Self { log, email, sms, dispatched: 0, delivery_failures: 0 }
    }

    pub fn dispatch(&mut self, event: &AlertEvent) -> DeliveryRecord {
        let transport = match event.action {
            ActionLevel::Email => self.email.as_ref(),
            ActionLevel::Sms => self.sms.as_ref(),
            _ => None,
        };
        let downgraded = matches!(event.action, ActionLevel::Email | ActionLevel::Sms)
            && transport.is_none();
        let line = format_log_line(event, downgraded);
        let mut external_error = None;
        if writeln!(self.log, "{line}").and_then(|_| self.log.flush()).is_err() {
            self.delivery_failures += 1;
        }
        if let Some(t) = transport {
            if let Err(e) = t.deliver(&line) {
                self.delivery_failures += 1;
                external_error = Some(e);
            }
        }
        self.dispatched += 1;
        DeliveryRecord { line, downgraded, external_error }
    }
}
