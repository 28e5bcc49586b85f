//! Splits the forecast window at event boundaries.

use serde::{Deserialize, Serialize};

use super::{EventSpec, ForecastError};
use crate::ingestion::Frame;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Frame,
    pub end: Frame,
    /// Indices of events active over the whole segment.
    pub active: Vec<usize>,
}

impl Segment {
    pub fn frames(&self) -> Frame {
        self.end - self.start
    }
}

/// Checks that events are sorted and fall inside `(t, t_e]`.
pub fn validate_window(t: Frame, t_e: Frame, events: &[EventSpec]) -> Result<(), ForecastError> {
    if t_e <= t {
        return Err(ForecastError::InvalidRequest(
            "target frame must exceed cut frame".into(),
        ));
    }
    for (index, e) in events.iter().enumerate() {
        e.validate()
            .map_err(|message| ForecastError::InvalidEvent { index, message })?;
        if e.start <= t || e.start > t_e {
            return Err(ForecastError::InvalidEvent {
                index,
                message: format!(
                    "start frame {} outside forecast window ({t}, {t_e}]",
                    e.start
                ),
            });
        }
    }
    if events.windows(2).any(|w| w[1].start < w[0].start) {
        return Err(ForecastError::InvalidRequest(
            "events must be sorted by start frame".into(),
        ));
    }
    Ok(())
}

/// Event `e` is active over `[start, end)` iff it has started by `start`
/// and has not ended before `end`.
pub(crate) fn is_active(e: &EventSpec, start: Frame, end: Frame) -> bool {
    e.start <= start && e.end().is_none_or(|stop| stop >= end)
}

/// Segment boundaries are `{t} ∪ {t_k} ∪ {t_k + dt_k < t_e} ∪ {t_e}`.
pub fn segment_timeline(
    t: Frame,
    t_e: Frame,
    events: &[EventSpec],
) -> Result<Vec<Segment>, ForecastError> {
    validate_window(t, t_e, events)?;
    let mut cuts = vec![t, t_e];
    for e in events {
        cuts.push(e.start);
        if let Some(stop) = e.end() {
            if stop < t_e {
                cuts.push(stop);
            }
        }
    }
    cuts.sort_unstable();
    cuts.dedup();

    Ok(cuts
        .windows(2)
        .map(|w| Segment {
            start: w[0],
            end: w[1],
            active: events
                .iter()
                .enumerate()
                .filter(|(_, e)| is_active(e, w[0], w[1]))
                .map(|(i, _)| i)
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::EventAgent;
    use crate::geometry::Point2;

    fn pop(start: Frame, duration: Option<Frame>) -> EventSpec {
        EventSpec::population(
            start,
            duration,
            vec![EventAgent::new(Point2::ZERO, Point2::ZERO)],
        )
    }

    fn seg(start: Frame, end: Frame, active: &[usize]) -> Segment {
        Segment {
            start,
            end,
            active: active.to_vec(),
        }
    }

    #[test]
    fn no_events_single_segment() {
        assert_eq!(
            segment_timeline(60, 130, &[]).unwrap(),
            vec![seg(60, 130, &[])]
        );
    }

    #[test]
    fn two_open_ended_events() {
        let events = [pop(70, None), pop(90, None)];
        assert_eq!(
            segment_timeline(60, 130, &events).unwrap(),
            vec![seg(60, 70, &[]), seg(70, 90, &[0]), seg(90, 130, &[0, 1])]
        );
    }

    #[test]
    fn bounded_event_expires() {
        let events = [pop(70, Some(20))];
        assert_eq!(
            segment_timeline(60, 130, &events).unwrap(),
            vec![seg(60, 70, &[]), seg(70, 90, &[0]), seg(90, 130, &[])]
        );
    }

    #[test]
    fn event_running_past_target() {
        let events = [pop(100, Some(50))];
        assert_eq!(
            segment_timeline(60, 130, &events).unwrap(),
            vec![seg(60, 100, &[]), seg(100, 130, &[0])]
        );
    }

    #[test]
    fn event_at_target_adds_no_segment() {
        let events = [pop(130, None)];
        assert_eq!(
            segment_timeline(60, 130, &events).unwrap(),
            vec![seg(60, 130, &[])]
        );
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(matches!(
            segment_timeline(60, 60, &[]),
            Err(ForecastError::InvalidRequest(_))
        ));
        assert!(segment_timeline(60, 130, &[pop(60, None)]).is_err());
        assert!(segment_timeline(60, 130, &[pop(131, None)]).is_err());
        assert!(segment_timeline(60, 130, &[pop(90, None), pop(70, None)]).is_err());
    }
}
