use std::fmt;

/// Source position attached to a warning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub file: String,
    pub line: usize,
}

/// A non-fatal problem found while processing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub location: Option<Location>,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Some(loc) => write!(f, "warning: {}:{}: {}", loc.file, loc.line, self.message),
            None => write!(f, "warning: {}", self.message),
        }
    }
}

/// Collects warnings from every stage; the CLI prints them to stderr.
#[derive(Debug, Default, Clone)]
pub struct Diagnostics {
    warnings: Vec<Warning>,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(Warning {
            location: None,
            message: message.into(),
        });
    }

    pub fn warn_at(&mut self, file: impl Into<String>, line: usize, message: impl Into<String>) {
        self.warnings.push(Warning {
            location: Some(Location {
                file: file.into(),
                line,
            }),
            message: message.into(),
        });
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.warnings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.warnings.is_empty()
    }

    /// Number of warnings whose message contains `needle`.
    pub fn count_matching(&self, needle: &str) -> usize {
        self.warnings
            .iter()
            .filter(|w| w.message.contains(needle))
            .count()
    }
}
