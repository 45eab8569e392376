//! Per-thread record of files opened by the loaders.
//!
//! Used to check that training never touches target-domain data.

use std::cell::RefCell;
use std::path::{Path, PathBuf};

thread_local! {
    static LOG: RefCell<Option<Vec<PathBuf>>> = const { RefCell::new(None) };
}

/// Start recording reads on the current thread, discarding any earlier log.
pub fn start() {
    LOG.with(|log| *log.borrow_mut() = Some(Vec::new()));
}

/// Stop recording and return every path read since [`start`].
pub fn finish() -> Vec<PathBuf> {
    LOG.with(|log| log.borrow_mut().take().unwrap_or_default())
}

pub(crate) fn record_read(path: &Path) {
    LOG.with(|log| {
        if let Some(entries) = log.borrow_mut().as_mut() {
            entries.push(path.to_path_buf());
        }
    });
}
