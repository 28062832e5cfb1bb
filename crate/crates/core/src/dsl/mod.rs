//! Textual diagram format (`.gsr`).
//!
//! Nesting in the graphical language becomes block nesting here; connections
//! (starters, state derivations, event effects) become statements naming
//! their endpoints.
//!
//! ```text
//! diagram ProgressTrigger {
//!     starter s0 -> trans;
//!     transaction trans {
//!         runtime ptpCmd {
//!             actuator lwr: LWR;
//!             action ptp: PTP(start = @lwr.getHomePosition(), duration = 100);
//!             state at30: ProgressAtLeast(30) on ptp;
//!         }
//!         runtime close {
//!             actuator gripper: DigitalOutput;
//!             action set: SetDigitalValue(channel = "gripperClose", value = true);
//!         }
//!         start ptpCmd;
//!         handler on at30 first_entered start close;
//!     }
//! }
//! ```

use std::fmt;

use serde::Serialize;

use crate::model::Pos;

mod lexer;
mod parser;
pub(crate) mod printer;

pub use parser::parse;
pub use printer::print;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceSpan {
    pub file: String,
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl SourceSpan {
    pub fn new(file: &str, pos: Pos) -> SourceSpan {
        SourceSpan {
            file: file.to_string(),
            line: pos.line,
            column: pos.column,
            length: pos.length.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub span: SourceSpan,
}

impl Diagnostic {
    pub fn error(code: &str, message: impl Into<String>, span: SourceSpan) -> Diagnostic {
        Diagnostic { severity: Severity::Error, code: code.to_string(), message: message.into(), span }
    }

    pub fn warning(code: &str, message: impl Into<String>, span: SourceSpan) -> Diagnostic {
        Diagnostic { severity: Severity::Warning, code: code.to_string(), message: message.into(), span }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// `code:file:line:col message`
impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{} {}",
            self.code, self.span.file, self.span.line, self.span.column, self.message
        )
    }
}
