//! Log channels and their sinks.
//!
//! Each channel can be routed to stderr, stdout, a file, an in-memory buffer,
//! or nowhere. The `EXPOKIT_LOG` environment variable takes a comma separated
//! list of `channel=target` pairs, for example
//! `EXPOKIT_LOG=stepLog=file:/tmp/steps.log,status=stdout,all=stderr`.
//! Targets are `stderr`, `stdout`, `null` and `file:PATH`. Naming a channel
//! there also switches it on.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

pub const LOG_ENV: &str = "EXPOKIT_LOG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Verbose,
    Status,
    Statistics,
    JacLog,
    StepLog,
    MatFunLog,
    Warning,
    Error,
}

impl Channel {
    pub const ALL: [Channel; 8] = [
        Channel::Verbose,
        Channel::Status,
        Channel::Statistics,
        Channel::JacLog,
        Channel::StepLog,
        Channel::MatFunLog,
        Channel::Warning,
        Channel::Error,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Verbose => "verbose",
            Channel::Status => "status",
            Channel::Statistics => "statistics",
            Channel::JacLog => "jacLog",
            Channel::StepLog => "stepLog",
            Channel::MatFunLog => "matFunLog",
            Channel::Warning => "warning",
            Channel::Error => "error",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown log channel '{s}'"))
    }
}

/// Where the lines of a channel go.
#[derive(Clone, Default)]
pub enum Sink {
    #[default]
    Stderr,
    Stdout,
    Null,
    File(Arc<Mutex<File>>),
    Buffer(Arc<Mutex<Vec<String>>>),
}

impl fmt::Debug for Sink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sink::Stderr => f.write_str("Stderr"),
            Sink::Stdout => f.write_str("Stdout"),
            Sink::Null => f.write_str("Null"),
            Sink::File(_) => f.write_str("File"),
            Sink::Buffer(_) => f.write_str("Buffer"),
        }
    }
}

impl Sink {
    pub fn file(path: &str) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Sink::File(Arc::new(Mutex::new(file))))
    }

    fn write_line(&self, line: &str) {
        match self {
            Sink::Stderr => eprintln!("{line}"),
            Sink::Stdout => println!("{line}"),
            Sink::Null => {}
            Sink::File(f) => {
                if let Ok(mut f) = f.lock() {
                    let _ = writeln!(f, "{line}");
                }
            }
            Sink::Buffer(b) => {
                if let Ok(mut b) = b.lock() {
                    b.push(line.to_string());
                }
            }
        }
    }
}

/// Explicit channel routes; unrouted channels go to stderr when enabled.
#[derive(Debug, Clone, Default)]
pub struct LogConfig {
    routes: [Option<Sink>; 8],
    forced: [bool; 8],
}

impl LogConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn route(mut self, channel: Channel, sink: Sink) -> Self {
        self.routes[channel.index()] = Some(sink);
        self
    }

    /// Routes every channel to one sink.
    pub fn route_all(mut self, sink: Sink) -> Self {
        for r in &mut self.routes {
            *r = Some(sink.clone());
        }
        self
    }

    /// Everything into a shared buffer, handy for tests.
    pub fn buffer() -> (Self, Arc<Mutex<Vec<String>>>) {
        let buf = Arc::new(Mutex::new(Vec::new()));
        (Self::new().route_all(Sink::Buffer(buf.clone())), buf)
    }

    /// Everything discarded.
    pub fn silent() -> Self {
        Self::new().route_all(Sink::Null)
    }

    /// Parses a `channel=target[,channel=target]` list.
    pub fn parse(spec: &str) -> Result<Self, String> {
        let mut cfg = Self::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (ch, target) = item
                .split_once('=')
                .ok_or_else(|| format!("expected channel=target, found '{item}'"))?;
            let sink = match target.trim() {
                "stderr" => Sink::Stderr,
                "stdout" => Sink::Stdout,
                "null" | "off" => Sink::Null,
                t => match t.strip_prefix("file:") {
                    Some(path) => Sink::file(path).map_err(|e| format!("cannot open log file '{path}': {e}"))?,
                    None => return Err(format!("unknown log target '{t}'")),
                },
            };
            let on = !matches!(sink, Sink::Null);
            if ch.trim().eq_ignore_ascii_case("all") {
                cfg = cfg.route_all(sink);
                cfg.forced = [on; 8];
            } else {
                let ch: Channel = ch.parse()?;
                cfg = cfg.route(ch, sink);
                cfg.forced[ch.index()] = on;
            }
        }
        Ok(cfg)
    }

    /// Reads `EXPOKIT_LOG`; unset means no explicit routes.
    pub fn from_env() -> Result<Self, String> {
        match std::env::var(LOG_ENV) {
            Ok(spec) => Self::parse(&spec),
            Err(_) => Ok(Self::new()),
        }
    }

    fn sink(&self, channel: Channel) -> Option<&Sink> {
        self.routes[channel.index()].as_ref()
    }
}

static NEXT_RUN: AtomicU64 = AtomicU64::new(1);

/// Per-run logger. Lines carry the run id so concurrent runs can share sinks.
#[derive(Debug, Clone)]
pub struct Logger {
    run_id: u64,
    sinks: [Sink; 8],
    enabled: [bool; 8],
}

impl Logger {
    /// `enabled` lists the channels switched on by options. Warnings and
    /// errors are always on; a `Null` route switches a channel off.
    pub fn new(config: &LogConfig, enabled: &[Channel]) -> Self {
        let mut on = [false; 8];
        let mut sinks: [Sink; 8] = Default::default();
        for ch in Channel::ALL {
            let i = ch.index();
            on[i] = enabled.contains(&ch) || matches!(ch, Channel::Warning | Channel::Error);
            if let Some(s) = config.sink(ch) {
                sinks[i] = s.clone();
                on[i] = (on[i] || config.forced[i]) && !matches!(s, Sink::Null);
            }
        }
        Self {
            run_id: NEXT_RUN.fetch_add(1, Ordering::Relaxed),
            sinks,
            enabled: on,
        }
    }

    /// A logger that discards everything.
    pub fn silent() -> Self {
        Self::new(&LogConfig::silent(), &[])
    }

    pub fn run_id(&self) -> u64 {
        self.run_id
    }

    pub fn enabled(&self, channel: Channel) -> bool {
        self.enabled[channel.index()]
    }

    /// Writes the line produced by `msg` if the channel is on.
    pub fn log(&self, channel: Channel, msg: impl FnOnce() -> String) {
        if !self.enabled(channel) {
            return;
        }
        let text = msg();
        for line in text.lines() {
            self.sinks[channel.index()].write_line(&format!("[run {}] {line}", self.run_id));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_routes() {
        let cfg = LogConfig::parse("stepLog=stdout, all=null").unwrap();
        assert!(matches!(cfg.sink(Channel::StepLog), Some(Sink::Null)));
        assert!(LogConfig::parse("nochannel=stderr").is_err());
        assert!(LogConfig::parse("status=printer").is_err());
    }

    #[test]
    fn lines_are_prefixed_and_filtered() {
        let (cfg, buf) = LogConfig::buffer();
        let log = Logger::new(&cfg, &[Channel::Status]);
        log.log(Channel::Status, || "hello".into());
        let lines = buf.lock().unwrap().clone();
        assert_eq!(lines, vec![format!("[run {}] hello", log.run_id())]);

        let quiet = Logger::new(&LogConfig::new(), &[]);
        assert!(!quiet.enabled(Channel::StepLog));
        assert!(quiet.enabled(Channel::Warning));
    }
}
