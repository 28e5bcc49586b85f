//! Timed scene changes: obstacle insertion, population injection, or both.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ForecastError;
use crate::geometry::Point2;
use crate::ingestion::{AgentId, Frame};
use crate::world::{Calibration, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum EventKind {
    Obstacle = 1,
    Population = 2,
    Both = 3,
}

impl EventKind {
    pub fn has_obstacles(self) -> bool {
        matches!(self, EventKind::Obstacle | EventKind::Both)
    }

    pub fn has_agents(self) -> bool {
        matches!(self, EventKind::Population | EventKind::Both)
    }
}

impl TryFrom<u8> for EventKind {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(EventKind::Obstacle),
            2 => Ok(EventKind::Population),
            3 => Ok(EventKind::Both),
            other => Err(format!("event type must be 1, 2 or 3, got {other}")),
        }
    }
}

impl From<EventKind> for u8 {
    fn from(k: EventKind) -> u8 {
        k as u8
    }
}

/// A person entering the scene with an event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventAgent {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<AgentId>,
    pub x: f64,
    pub y: f64,
    /// Motion vector, cm/frame.
    pub vx: f64,
    pub vy: f64,
}

impl EventAgent {
    pub fn new(position: Point2, motion: Point2) -> Self {
        Self {
            id: None,
            x: position.x,
            y: position.y,
            vx: motion.x,
            vy: motion.y,
        }
    }

    pub fn with_id(mut self, id: AgentId) -> Self {
        self.id = Some(id);
        self
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn motion(&self) -> Point2 {
        Point2::new(self.vx, self.vy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    #[serde(rename = "t_k")]
    pub start: Frame,
    /// `None` when the duration is unknown: active through the target frame.
    #[serde(rename = "dt_k")]
    pub duration: Option<Frame>,
    #[serde(rename = "type")]
    pub kind: EventKind,
    #[serde(default)]
    pub obstacles: Vec<Vec<Point2>>,
    #[serde(default)]
    pub agents: Vec<EventAgent>,
}

impl EventSpec {
    pub fn obstacle(start: Frame, duration: Option<Frame>, polygons: Vec<Vec<Point2>>) -> Self {
        Self {
            start,
            duration,
            kind: EventKind::Obstacle,
            obstacles: polygons,
            agents: Vec::new(),
        }
    }

    pub fn population(start: Frame, duration: Option<Frame>, agents: Vec<EventAgent>) -> Self {
        Self {
            start,
            duration,
            kind: EventKind::Population,
            obstacles: Vec::new(),
            agents,
        }
    }

    /// First frame at which the event is no longer active, if known.
    pub fn end(&self) -> Option<Frame> {
        self.duration.map(|d| self.start + d)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.start < 0 {
            return Err(format!("start frame must be >= 0, got {}", self.start));
        }
        if let Some(d) = self.duration {
            if d < 1 {
                return Err(format!("duration must be >= 1 frame, got {d}"));
            }
        }
        let (o, a) = (self.obstacles.len(), self.agents.len());
        match self.kind {
            EventKind::Obstacle if o == 0 || a != 0 => {
                return Err(format!(
                    "obstacle event needs obstacles and no agents (o={o}, a={a})"
                ))
            }
            EventKind::Population if a == 0 || o != 0 => {
                return Err(format!(
                    "population event needs agents and no obstacles (o={o}, a={a})"
                ))
            }
            EventKind::Both if a == 0 || o == 0 => {
                return Err(format!(
                    "combined event needs obstacles and agents (o={o}, a={a})"
                ))
            }
            _ => {}
        }
        if self.obstacles.iter().flatten().any(|p| !p.is_finite())
            || self
                .agents
                .iter()
                .any(|g| !(g.position().is_finite() && g.motion().is_finite()))
        {
            return Err("non-finite coordinate".into());
        }
        Ok(())
    }

    fn scaled(mut self, k: f64) -> Self {
        for p in self.obstacles.iter_mut().flatten() {
            *p = *p * k;
        }
        for g in &mut self.agents {
            g.x *= k;
            g.y *= k;
            g.vx *= k;
            g.vy *= k;
        }
        self
    }
}

/// Reads a JSON list of events, converting to centimeters.
pub fn load_events(
    path: &Path,
    unit: Unit,
    calibration: &Calibration,
) -> Result<Vec<EventSpec>, ForecastError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ForecastError::Io {
        path: display.clone(),
        message: e.to_string(),
    })?;
    let events: Vec<EventSpec> = serde_json::from_str(&text).map_err(|e| ForecastError::Parse {
        path: display,
        message: e.to_string(),
    })?;
    let k = calibration.to_cm_factor(unit);
    events
        .into_iter()
        .enumerate()
        .map(|(index, e)| {
            e.validate()
                .map_err(|message| ForecastError::InvalidEvent { index, message })?;
            Ok(e.scaled(k))
        })
        .collect()
}

pub fn save_events(path: &Path, events: &[EventSpec]) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(events).map_err(std::io::Error::other)?;
    std::fs::write(path, text)
}
