use thiserror::Error;

use crate::dsl::{CommandParseError, ParseError};
use crate::model::ModelError;
use crate::sched::ScheduleError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("recipe parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("command parse error: {0}")]
    Command(#[from] CommandParseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("no bundled recipe named {0}")]
    UnknownFixture(String),
    #[error("instance file: {0}")]
    Interchange(String),
    #[error("{0}")]
    Argument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
