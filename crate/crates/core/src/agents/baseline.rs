use crate::dynamics::GoalAction;
use crate::env::{Frame, Policy};
use crate::error::{Error, Result};

/// Suggests the same goal every epoch regardless of history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPolicy {
    action: GoalAction,
}

impl FixedPolicy {
    pub fn action(&self) -> GoalAction {
        self.action
    }
}

impl Policy for FixedPolicy {
    fn name(&self) -> String {
        if self.action.is_service() {
            format!("fixed_{}", self.action)
        } else {
            "no_service".to_string()
        }
    }

    fn select_action(&mut self, _history: &[Frame]) -> Result<GoalAction> {
        Ok(self.action)
    }
}

/// Fixed-level strategy; `level` must be a service level on the 0.1 grid.
pub fn fixed_policy(level: f64) -> Result<FixedPolicy> {
    let action = GoalAction::from_level(level)?;
    if !action.is_service() {
        return Err(Error::domain("a fixed strategy needs a level of at least 0.1; use no_service_policy"));
    }
    Ok(FixedPolicy { action })
}

/// The without-service baseline: never issues a goal.
pub fn no_service_policy() -> FixedPolicy {
    FixedPolicy {
        action: GoalAction::NO_SERVICE,
    }
}
