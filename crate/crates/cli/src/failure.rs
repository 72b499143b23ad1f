use std::fmt;
use std::path::PathBuf;

use oiscore::{Error, ErrorClass};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_PARSE: u8 = 4;
pub const EXIT_DIMENSION: u8 = 5;
pub const EXIT_SCHEMA: u8 = 6;
pub const EXIT_RANGE: u8 = 7;
pub const EXIT_DATA: u8 = 8;

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Usage(String),
    Io(PathBuf, std::io::Error),
    Json(String, serde_json::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) => match e.class() {
                ErrorClass::Io => EXIT_IO,
                ErrorClass::Parse => EXIT_PARSE,
                ErrorClass::Dimension => EXIT_DIMENSION,
                ErrorClass::Schema => EXIT_SCHEMA,
                ErrorClass::Range => EXIT_RANGE,
                ErrorClass::Data => EXIT_DATA,
            },
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Io(..) => EXIT_IO,
            Failure::Json(..) => EXIT_PARSE,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Io(p, e) => write!(f, "{}: {e}", p.display()),
            Failure::Json(what, e) => write!(f, "{what}: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;
