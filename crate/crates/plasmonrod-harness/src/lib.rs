//! Scenario runner behind the `plasmonrod` command line.

pub mod config;
pub mod run;

pub use config::{Mode, Resolution, ScenarioFile};
pub use run::{run, RunOptions, RunReport, Session};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(plasmonrod::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(_) => 3,
        }
    }
}

impl From<plasmonrod::Error> for HarnessError {
    fn from(e: plasmonrod::Error) -> Self {
        match e {
            plasmonrod::Error::InvalidCurve(_) | plasmonrod::Error::InvalidSpec(_) => HarnessError::Config(e.to_string()),
            e => HarnessError::Numerical(e),
        }
    }
}
