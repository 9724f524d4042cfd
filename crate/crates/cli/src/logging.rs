use std::sync::Mutex;

use log::{Level, LevelFilter, Log, Metadata, Record};

pub const LOG_ENV: &str = "VRF_SENTINEL_LOG";

static WARNINGS: Mutex<Vec<String>> = Mutex::new(Vec::new());

/// Forwards to env_logger and keeps every warning for the run manifest.
struct Recorder {
    inner: env_logger::Logger,
}

impl Log for Recorder {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= Level::Warn || self.inner.enabled(metadata)
    }

    fn log(&self, record: &Record) {
        if record.level() <= Level::Warn {
            WARNINGS.lock().unwrap().push(record.args().to_string());
        }
        if self.inner.enabled(record.metadata()) {
            self.inner.log(record);
        }
    }

    fn flush(&self) {
        self.inner.flush();
    }
}

pub fn init() {
    let inner = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn"))
        .format_timestamp(None)
        .build();
    let level = inner.filter().max(LevelFilter::Warn);
    if log::set_boxed_logger(Box::new(Recorder { inner })).is_ok() {
        log::set_max_level(level);
    }
}

pub fn level() -> String {
    std::env::var(LOG_ENV).unwrap_or_else(|_| "warn".into())
}

/// Warnings logged since the last call.
pub fn take_warnings() -> Vec<String> {
    std::mem::take(&mut *WARNINGS.lock().unwrap())
}
