//! Error against ground truth, per-frame averaging and report rendering.

mod synth;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use synth::{
    generate_synthetic, FlowSpec, RectSpec, ScriptedEvent, SynthParams, SyntheticScenario,
};

use crate::forecast::{AgentForecast, EventKind, EventSpec, Provenance};
use crate::geometry::Point2;
use crate::ingestion::{AgentId, AgentTrack, Frame};
use crate::world::has_extension;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("target frame must exceed cut frame")]
    InvalidWindow,
    #[error("no agent present at the cut frame has ground truth at frame {0}")]
    NoEvaluableAgents(Frame),
    #[error("spawn region too small for {count} agents at {min_separation_cm} cm separation")]
    SpawnRegionTooSmall {
        count: usize,
        min_separation_cm: f64,
    },
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    World(#[from] crate::world::WorldError),
    #[error(transparent)]
    Ingest(#[from] crate::ingestion::IngestError),
}

/// Euclidean distance between forecast and truth, in centimeters.
pub fn position_error(predicted: Point2, truth: Point2) -> f64 {
    predicted.distance(truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub event_info: Vec<String>,
    pub cut_frame: Frame,
    pub target_frame: Frame,
    pub frames_advanced: Frame,
    /// Errors at the target frame for agents present at the cut frame.
    pub per_agent_error_cm: BTreeMap<AgentId, f64>,
    pub avg_error_cm: f64,
    pub avg_error_cm_per_frame: f64,
    /// Event-provenance agents, left out of the averages.
    pub excluded_agents: Vec<AgentId>,
    /// Errors of excluded agents that do have ground truth.
    pub event_agent_error_cm: BTreeMap<AgentId, f64>,
    /// Original agents without ground truth at the target frame.
    pub missing_agents: Vec<AgentId>,
    pub warnings: usize,
}

/// Scores final forecast positions against ground truth at `t_e`.
///
/// The headline mean covers original agents only; the per-frame figure is
/// that mean divided by `t_e - t`. `avg_error_cm` is stored as
/// `avg_error_cm_per_frame * frames_advanced` so the identity between the
/// two fields holds bit-for-bit (it differs from the raw mean by at most
/// one rounding step).
pub fn evaluate(
    forecasts: &[AgentForecast],
    truth_tracks: &[AgentTrack],
    t: Frame,
    t_e: Frame,
) -> Result<ForecastReport, EvalError> {
    if t_e <= t {
        return Err(EvalError::InvalidWindow);
    }
    let truth: BTreeMap<AgentId, &AgentTrack> =
        truth_tracks.iter().map(|tr| (tr.agent_id(), tr)).collect();

    let mut per_agent = BTreeMap::new();
    let mut event_errors = BTreeMap::new();
    let mut excluded = Vec::new();
    let mut missing = Vec::new();
    for f in forecasts {
        let truth_pos = truth.get(&f.agent_id).and_then(|tr| tr.position_at(t_e));
        match (f.provenance, truth_pos) {
            (Provenance::Original, Some(x)) => {
                per_agent.insert(f.agent_id, position_error(f.final_position, x));
            }
            (Provenance::Original, None) => missing.push(f.agent_id),
            (Provenance::Event(_), x) => {
                excluded.push(f.agent_id);
                if let Some(x) = x {
                    event_errors.insert(f.agent_id, position_error(f.final_position, x));
                }
            }
        }
    }
    if per_agent.is_empty() {
        return Err(EvalError::NoEvaluableAgents(t_e));
    }
    excluded.sort_unstable();
    missing.sort_unstable();

    let frames = t_e - t;
    let mean = per_agent.values().sum::<f64>() / per_agent.len() as f64;
    let per_frame = mean / frames as f64;
    Ok(ForecastReport {
        scenario: None,
        event_info: Vec::new(),
        cut_frame: t,
        target_frame: t_e,
        frames_advanced: frames,
        per_agent_error_cm: per_agent,
        avg_error_cm: per_frame * frames as f64,
        avg_error_cm_per_frame: per_frame,
        excluded_agents: excluded,
        event_agent_error_cm: event_errors,
        warnings: missing.len(),
        missing_agents: missing,
    })
}

/// Table-style event summary: a count line followed by one line per event.
pub fn describe_events(events: &[EventSpec]) -> Vec<String> {
    if events.is_empty() {
        return vec!["No event".to_string()];
    }
    let kinds: Vec<String> = {
        let mut k: Vec<u8> = events.iter().map(|e| u8::from(e.kind)).collect();
        k.dedup();
        k.iter().map(|k| format!("tau={k}")).collect()
    };
    let noun = if events.len() == 1 { "Event" } else { "Events" };
    let mut lines = vec![format!("{} {noun} {}", events.len(), kinds.join(","))];
    for (i, e) in events.iter().enumerate() {
        let n = i + 1;
        let payload = match e.kind {
            EventKind::Obstacle => format!("o{n}={}", e.obstacles.len()),
            EventKind::Population => format!("a{n}={}", e.agents.len()),
            EventKind::Both => format!("o{n}={}, a{n}={}", e.obstacles.len(), e.agents.len()),
        };
        lines.push(format!("t{n}={}, {payload}", e.start));
    }
    lines
}

/// Renders reports as a table: scenario window, event information and the
/// average error in cm/frame.
pub fn render_table(reports: &[ForecastReport]) -> String {
    let rows: Vec<(Vec<String>, Vec<String>, String)> = reports
        .iter()
        .map(|r| {
            let id = format!(
                "{} [{},{}]",
                r.scenario.as_deref().unwrap_or("-"),
                r.cut_frame,
                r.target_frame
            );
            let info = if r.event_info.is_empty() {
                vec!["No event".to_string()]
            } else {
                r.event_info.clone()
            };
            (vec![id], info, format!("{:.4}", r.avg_error_cm_per_frame))
        })
        .collect();

    let headers = [
        "Scenario [t,t_e]",
        "Event information",
        "Avg Dist Error (cm/frame)",
    ];
    let mut widths = headers.map(str::len);
    for (id, info, err) in &rows {
        widths[0] = widths[0].max(id.iter().map(String::len).max().unwrap_or(0));
        widths[1] = widths[1].max(info.iter().map(String::len).max().unwrap_or(0));
        widths[2] = widths[2].max(err.len());
    }
    let rule = format!(
        "+{}+{}+{}+\n",
        "-".repeat(widths[0] + 2),
        "-".repeat(widths[1] + 2),
        "-".repeat(widths[2] + 2)
    );

    let mut out = rule.clone();
    let _ = writeln!(
        out,
        "| {:<w0$} | {:<w1$} | {:<w2$} |",
        headers[0],
        headers[1],
        headers[2],
        w0 = widths[0],
        w1 = widths[1],
        w2 = widths[2]
    );
    out.push_str(&rule);
    for (id, info, err) in &rows {
        let height = info.len().max(1);
        for line in 0..height {
            let c0 = if line == 0 { id[0].as_str() } else { "" };
            // error sits on the last line of the row, as in the printed table
            let c2 = if line + 1 == height { err.as_str() } else { "" };
            let c1 = info.get(line).map_or("", String::as_str);
            let _ = writeln!(
                out,
                "| {:<w0$} | {:<w1$} | {:>w2$} |",
                c0,
                c1,
                c2,
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2]
            );
        }
        out.push_str(&rule);
    }
    out
}

impl ForecastReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-agent errors; missing agents carry `MISSING`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["agent_id", "provenance", "error_cm"])
            .expect("in-memory write");
        let mut rows: Vec<(AgentId, &str, String)> = Vec::new();
        for (id, e) in &self.per_agent_error_cm {
            rows.push((*id, "original", e.to_string()));
        }
        for id in &self.missing_agents {
            rows.push((*id, "original", "MISSING".into()));
        }
        for id in &self.excluded_agents {
            let e = self
                .event_agent_error_cm
                .get(id)
                .map_or("MISSING".to_string(), f64::to_string);
            rows.push((*id, "event", e));
        }
        rows.sort_by_key(|r| r.0);
        for (id, p, e) in rows {
            w.write_record([id.to_string(), p.to_string(), e])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    /// JSON by default; `.csv` writes per-agent errors, `.txt` the table.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = if has_extension(path, "csv") {
            self.to_csv()
        } else if has_extension(path, "txt") {
            render_table(std::slice::from_ref(self))
        } else {
            self.to_json()
        };
        std::fs::write(path, text)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}
