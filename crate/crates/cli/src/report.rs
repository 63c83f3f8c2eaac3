//! Key/value text reports.

use std::fmt::{Display, Write as _};

pub struct Report {
    text: String,
}

impl Report {
    pub fn new(manifest: &[String]) -> Self {
        let mut text = String::new();
        for m in manifest {
            let _ = writeln!(text, "# {m}");
        }
        Self { text }
    }

    pub fn section(&mut self, name: &str) {
        let _ = writeln!(self.text, "\n[{name}]");
    }

    pub fn kv(&mut self, key: &str, value: impl Display) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    pub fn finish(self) -> String {
        self.text
    }
}
