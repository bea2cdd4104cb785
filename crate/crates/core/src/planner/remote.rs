// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::{Planner, PlannerError, PlannerRequest, PlannerResponse};
use crate::plan::{PlanId, PlanKind};

/// HTTP planner: `POST {endpoint}/plan` with a JSON request, expecting
/// `{"plan": "...", "target": n}` back. Failures of any kind map to
/// [`PlannerError::OracleUnavailable`].
pub struct RemotePlanner {
    url: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct Answer {
    plan: String,
    #[serde(default)]
    target: Option<u32>,
    #[serde(default)]
    tokens_in: Option<u32>,
    #[serde(default)]
    tokens_out: Option<u32>,
}

fn unavailable(msg: impl Into<String>) -> PlannerError {
    PlannerError::OracleUnavailable(msg.into())
}

impl RemotePlanner {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/plan") { base.to_string() } else { format!("{base}/plan") };
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        RemotePlanner { url, agent }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// The JSON body sent for `req`.
    pub fn body(req: &PlannerRequest) -> Value {
        let state: Map<String, Value> = req.state.fields().map(|(k, v)| (k.to_string(), json!(v))).collect();
        let v = &req.observation;
        let mut observation: Vec<Value> = v
            .known
            .iter()
            .map(|k| json!({"id": k.id, "kind": k.kind, "pos": [k.pos.x, k.pos.y], "room": k.room, "held": false}))
            .collect();
        observation.extend(
            v.hands.iter().map(|h| json!({"id": h.id, "kind": h.kind, "held": true, "contents": h.contents})),
        );
        json!({
            "agent_id": req.agent_id,
            "tick": v.tick,
            "state": state,
            "observation": observation,
            "history": req.history.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "goal": {"finished": v.finished, "total": v.total_targets},
        })
    }
}

/// Reads a planner answer. `target` may be given separately or inline.
fn parse_answer(a: &Answer) -> Result<PlanId, PlannerError> {
    let line = a.plan.lines().next().unwrap_or("").trim();
    let parsed: PlanId = match a.target {
        Some(t) => {
            let kind: PlanKind = line.parse().map_err(|e| unavailable(format!("unparseable plan: {e}")))?;
            PlanId::new(kind, Some(t)).map_err(|e| unavailable(format!("unparseable plan: {e}")))?
        }
        None => line.parse().map_err(|e| unavailable(format!("unparseable plan: {e}")))?,
    };
    Ok(parsed)
}

impl Planner for RemotePlanner {
    fn plan(&mut self, req: &PlannerRequest) -> Result<PlannerResponse, PlannerError> {
        let body = Self::body(req);
        let sent = body.to_string().len() as u32;
        let resp = self.agent.post(&self.url).send_json(body).map_err(|e| unavailable(e.to_string()))?;
        if resp.status() != 200 {
            return Err(unavailable(format!("status {}", resp.status())));
        }
        let answer: Answer = resp.into_json().map_err(|e| unavailable(format!("bad response body: {e}")))?;
        let plan = parse_answer(&answer)?;
        Ok(PlannerResponse {
            plan,
            tokens_in: answer.tokens_in.unwrap_or(sent / 4),
            tokens_out: answer.tokens_out.unwrap_or((answer.plan.len() as u32 / 4).max(1)),
            latency_ticks: 0,
            corrupted: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{MetadataExtractor, Scenario, World};
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::thread;

    fn request() -> PlannerRequest {
        let s = Scenario::from_json(
            r#"{"schema": "scenario v1", "name": "t", "layout": ["00.11"], "goal": [[0, 0]],
                "agents": [{"id": 0, "pos": [0, 0]}], "objects": [{"id": 1, "kind": "target", "pos": [1, 0]}],
                "budget": 50}"#,
        )
        .unwrap();
        let w = World::new(&s, 0).unwrap();
        let ex = MetadataExtractor::for_scenario(&s).unwrap();
        let v = w.view(0);
        PlannerRequest::new(v.clone(), ex.extract(&v), vec![PlanId::wait()], None)
    }

    /// Serves one connection with `status` and `body`, after `delay`.
    fn serve_once(status: &'static str, body: &'static str, delay: Duration) -> String {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = l.local_addr().unwrap();
        thread::spawn(move || {
            if let Ok((mut s, _)) = l.accept() {
                let mut buf = [0u8; 8192];
                let _ = s.read(&mut buf);
                thread::sleep(delay);
                let msg = format!(
                    "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = s.write_all(msg.as_bytes());
            }
        });
        format!("http://{addr}")
    }

    #[test]
    fn parses_plan_answers() {
        let url = serve_once("200 OK", r#"{"plan":"Transport"}"#, Duration::ZERO);
        let mut p = RemotePlanner::new(&url, Duration::from_secs(5));
        assert_eq!(p.plan(&request()).unwrap().plan, PlanId::transport());
        let url = serve_once("200 OK", r#"{"plan":"GoGrasp","target":1}"#, Duration::ZERO);
        let mut p = RemotePlanner::new(&url, Duration::from_secs(5));
        assert_eq!(p.plan(&request()).unwrap().plan, PlanId::with_target(PlanKind::GoGrasp, 1));
    }

    #[test]
    fn failures_are_unavailable() {
        let url = serve_once("200 OK", r#"{"plan":"Fly(3)"}"#, Duration::ZERO);
        let e = RemotePlanner::new(&url, Duration::from_secs(5)).plan(&request()).unwrap_err();
        assert!(e.to_string().contains("unparseable"), "{e}");
        let url = serve_once("500 Internal Server Error", "{}", Duration::ZERO);
        assert!(RemotePlanner::new(&url, Duration::from_secs(5)).plan(&request()).is_err());
        let url = serve_once("200 OK", r#"{"plan":"Wait"}"#, Duration::from_millis(1500));
        let e = RemotePlanner::new(&url, Duration::from_millis(200)).plan(&request()).unwrap_err();
        assert!(matches!(e, PlannerError::OracleUnavailable(_)));
    }

    #[test]
    fn body_carries_state_and_history() {
        let b = RemotePlanner::body(&request());
        assert_eq!(b["agent_id"], 0);
        assert_eq!(b["state"]["visited_rooms"], 1);
        assert_eq!(b["history"][0], "Wait");
        assert_eq!(b["observation"][0]["id"], 1);
    }
}
