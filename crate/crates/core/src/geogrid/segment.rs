use std::collections::BTreeMap;

use chrono::TimeDelta;

use crate::error::{Error, Result};

use super::{IngestReport, PatrolTrack, Waypoint};

/// Thresholds beyond which consecutive waypoints are not joined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRules {
    pub max_time_gap: TimeDelta,
    /// Metres.
    pub max_dist_gap: f64,
}

impl Default for GapRules {
    fn default() -> Self {
        Self {
            max_time_gap: TimeDelta::minutes(30),
            max_dist_gap: 5000.0,
        }
    }
}

impl GapRules {
    pub fn new(max_time_gap_minutes: i64, max_dist_gap: f64) -> Result<Self> {
        if max_time_gap_minutes <= 0 || !(max_dist_gap.is_finite() && max_dist_gap > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gap rules must be positive, got {max_time_gap_minutes} min and {max_dist_gap} m"
            )));
        }
        let max_time_gap = TimeDelta::try_minutes(max_time_gap_minutes)
            .ok_or_else(|| Error::InvalidConfig(format!("time gap of {max_time_gap_minutes} min is out of range")))?;
        Ok(Self {
            max_time_gap,
            max_dist_gap,
        })
    }

    fn joins(&self, a: &Waypoint, b: &Waypoint) -> bool {
        b.timestamp - a.timestamp <= self.max_time_gap && a.point().distance(&b.point()) <= self.max_dist_gap
    }
}

/// Groups waypoints by patrol, orders them in time and splits wherever a gap
/// rule is violated.
///
/// Waypoints with non-finite coordinates are rejected into `report`. Runs of a
/// single waypoint carry no segments and are reported as isolated rather than
/// emitted. Output order is canonical (patrol id, then time), independent of
/// input order.
pub fn segment_tracks(waypoints: Vec<Waypoint>, rules: &GapRules, report: &mut IngestReport) -> Vec<PatrolTrack> {
    let mut by_patrol: BTreeMap<String, Vec<Waypoint>> = BTreeMap::new();
    for wp in waypoints {
        if !(wp.x.is_finite() && wp.y.is_finite()) {
            report.drop_record("waypoints", "non-finite coordinate");
            continue;
        }
        by_patrol.entry(wp.patrol_id.clone()).or_default().push(wp);
    }

    let mut tracks = Vec::new();
    for (patrol_id, mut points) in by_patrol {
        points.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then(a.x.total_cmp(&b.x))
                .then(a.y.total_cmp(&b.y))
        });

        let mut current: Vec<Waypoint> = Vec::new();
        for wp in points {
            if let Some(last) = current.last() {
                if !rules.joins(last, &wp) {
                    flush(&patrol_id, &mut current, &mut tracks, report);
                }
            }
            current.push(wp);
        }
        flush(&patrol_id, &mut current, &mut tracks, report);
    }
    tracks
}

fn flush(patrol_id: &str, current: &mut Vec<Waypoint>, tracks: &mut Vec<PatrolTrack>, report: &mut IngestReport) {
    match current.len() {
        0 => {}
        1 => {
            report.drop_record("waypoints", "isolated waypoint");
            current.clear();
        }
        n => {
            report.keep_n("waypoints", n);
            report.keep("tracks");
            tracks.push(PatrolTrack {
                patrol_id: patrol_id.to_string(),
                waypoints: std::mem::take(current),
            });
        }
    }
}
