//! The experience manager: decides what the agent does next and gates
//! human-initiated activations.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::comms::{activate, Activation, CommError, Communication, Registry};
use crate::model::SessionState;
use crate::model::{CommunicationDescriptor, DEFAULT_INTERACTION_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManagerConfig {
    pub interrupt_threshold: f64,
    pub interaction_budget: u32,
}

impl Default for ManagerConfig {
    fn default() -> Self {
        Self { interrupt_threshold: 0.5, interaction_budget: DEFAULT_INTERACTION_BUDGET }
    }
}

impl ManagerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.interrupt_threshold) {
            return Err(format!("interrupt threshold {} is outside [0, 1]", self.interrupt_threshold));
        }
        if self.interaction_budget == 0 {
            return Err("interaction budget must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ManagerDecision {
    OfferMenu(Vec<CommunicationDescriptor>),
    StartInterrupt(String),
    RouteToDialogue,
    AnnounceBudgetExhausted,
    AnnounceSessionEnd,
}

/// What the agent should do after a completed user turn.
pub fn activate_preferred(session: &SessionState, registry: &Registry, config: &ManagerConfig) -> ManagerDecision {
    if session.ended {
        return ManagerDecision::AnnounceSessionEnd;
    }
    if session.active_dialogue.is_some() {
        return ManagerDecision::RouteToDialogue;
    }
    if session.budget_exhausted() && !session.budget_exhausted_announced {
        return ManagerDecision::AnnounceBudgetExhausted;
    }

    // First-registered wins among equal confidences.
    let best = registry.iter().fold(None::<(f64, &Arc<dyn Communication>)>, |best, comm| {
        let c = comm.confidence_to_interrupt(session);
        match best {
            Some((b, _)) if b >= c => best,
            _ => Some((c, comm)),
        }
    });
    if let Some((confidence, comm)) = best {
        if confidence > 0.0 && confidence >= config.interrupt_threshold {
            return ManagerDecision::StartInterrupt(comm.id().to_string());
        }
    }

    ManagerDecision::OfferMenu(menu(session, registry))
}

/// Communications the designer may pick right now.
pub fn menu(session: &SessionState, registry: &Registry) -> Vec<CommunicationDescriptor> {
    let exhausted = session.budget_exhausted();
    registry
        .iter()
        .filter(|c| c.confidence_to_activate(session) > 0.0)
        .filter(|c| !(exhausted && c.descriptor().counts_against_budget))
        .map(|c| c.descriptor().clone())
        .collect()
}

/// Start a designer-chosen communication. Communications outside the
/// session's registry are reported as unknown.
pub fn interrupt_activate(session: &SessionState, registry: &Registry, comm_id: &str) -> Result<Activation, CommError> {
    let comm = registry.get(comm_id).ok_or_else(|| CommError::UnknownCommunication(comm_id.to_string()))?;
    activate(comm.as_ref(), session)
}
