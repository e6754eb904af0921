//! Non-fatal diagnostics reported alongside results.

use serde::{Deserialize, Serialize};

use crate::planning::CutLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    MarginBelowSafety,
    Intralesional,
    PlaneMissesBone,
    MarginMismatch,
    DuplicateLabel,
    UndefinedAngle,
    SingleSample,
    ReflectionCorrected,
    PatternPointMissed,
    VoidCut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<CutLabel>,
    pub message: String,
}

impl Finding {
    pub fn new(kind: FindingKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            label: None,
            message: message.into(),
        }
    }

    pub fn for_cut(kind: FindingKind, label: CutLabel, message: impl Into<String>) -> Self {
        Self {
            kind,
            label: Some(label),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.label {
            Some(l) => write!(f, "{l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}
