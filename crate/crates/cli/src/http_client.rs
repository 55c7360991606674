//! [`Transport`] over the server's HTTP endpoints, for running scenarios
//! against a live `cw-serve`.

use std::time::Duration;

use cocreate::scenario::{Transport, TransportError};
use cocreate::{ClientMessage, ServerMessage, SessionEvent, SessionState};
use serde::de::DeserializeOwned;

pub struct HttpTransport {
    base: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    /// `timeout` bounds each request, including generator calls made by the
    /// server while handling it.
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().new_agent();
        Self { base: base_url.trim_end_matches('/').to_string(), agent }
    }

    fn read<T: DeserializeOwned>(
        &self,
        what: &str,
        result: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<T, TransportError> {
        let mut response = result.map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError(format!("{what}: timed out")),
            e => TransportError(format!("{what}: {e}")),
        })?;
        let status = response.status();
        // 400 still carries a JSON error message list.
        if !status.is_success() && status.as_u16() != 400 {
            return Err(TransportError(format!("{what}: HTTP {status}")));
        }
        response.body_mut().read_json().map_err(|e| TransportError(format!("{what}: {e}")))
    }
}

impl Transport for HttpTransport {
    fn send(&mut self, session_id: Option<&str>, msg: &ClientMessage) -> Result<Vec<ServerMessage>, TransportError> {
        let url = match (msg, session_id) {
            (ClientMessage::SessionCreate { .. }, _) | (_, None) => format!("{}/session", self.base),
            (_, Some(id)) => format!("{}/session/{id}/message", self.base),
        };
        self.read(msg.type_name(), self.agent.post(&url).send_json(msg))
    }

    fn events(&mut self, session_id: &str) -> Result<Vec<SessionEvent>, TransportError> {
        self.read("events", self.agent.get(&format!("{}/session/{session_id}/events", self.base)).call())
    }

    fn state(&mut self, session_id: &str) -> Result<SessionState, TransportError> {
        self.read("state", self.agent.get(&format!("{}/session/{session_id}/state", self.base)).call())
    }
}
