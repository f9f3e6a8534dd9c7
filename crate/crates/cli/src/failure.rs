use std::fmt;

use zk3col_core::error::{AgentError, AttackError, GraphError, LabError, ProtocolError};
use zk3col_core::store::StoreError;

/// Command failure, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or agent specs (exit 1).
    Usage(String),
    /// Unreadable, unwritable or malformed data (exit 2).
    Data(String),
    /// Logs that parse but fail verification (exit 3).
    Integrity(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Integrity(_) => 3,
        }
    }
}

impl Failure {
    /// Prefixes the message with the file it concerns.
    pub fn context(self, path: &std::path::Path) -> Self {
        let p = path.display();
        match self {
            Failure::Usage(m) => Failure::Usage(format!("{p}: {m}")),
            Failure::Data(m) => Failure::Data(format!("{p}: {m}")),
            Failure::Integrity(m) => Failure::Integrity(format!("{p}: {m}")),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Integrity(m) => f.write_str(m),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        if e.is_integrity() {
            Failure::Integrity(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

impl From<AgentError> for Failure {
    fn from(e: AgentError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Agent(a) => a.into(),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<AttackError> for Failure {
    fn from(e: AttackError) -> Self {
        Failure::Data(e.to_string())
    }
}

/// I/O failure on `path`.
pub fn io(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}
