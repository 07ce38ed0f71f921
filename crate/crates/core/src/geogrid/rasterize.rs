use super::{
    clip_segment_to_cells, EffortRaster, GridSpec, IngestReport, ObservationRaster, ObservationRecord, PatrolTrack,
    TimeBinning,
};

/// Accumulates kilometres patrolled per (cell, bin).
///
/// Each consecutive waypoint pair contributes its clipped per-cell lengths to
/// the bin of its start timestamp; segments are never split across bins.
/// Accumulation follows track order, so canonical input (as produced by
/// [`super::segment_tracks`]) gives bit-identical output.
pub fn rasterize_effort(
    tracks: &[PatrolTrack],
    grid: &GridSpec,
    binning: &TimeBinning,
    report: &mut IngestReport,
) -> EffortRaster {
    let mut raster = EffortRaster::zeros(*grid, *binning);
    for track in tracks {
        for pair in track.waypoints.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let Some(bin) = binning.bin_of(a.timestamp) else {
                report.drop_record("segments", "outside time range");
                continue;
            };
            let pieces = clip_segment_to_cells(a.point(), b.point(), grid);
            if pieces.is_empty() {
                let reason = if a.point() == b.point() {
                    "zero length"
                } else {
                    "outside grid"
                };
                report.drop_record("segments", reason);
                continue;
            }
            report.keep("segments");
            for (cell, metres) in pieces {
                *raster.get_mut(grid.linear(cell), bin) += metres / 1000.0;
            }
        }
    }
    raster
}

/// Counts observations per (cell, bin); out-of-grid or out-of-range records
/// are reported, never silently lost.
pub fn bin_observations(
    observations: &[ObservationRecord],
    grid: &GridSpec,
    binning: &TimeBinning,
    report: &mut IngestReport,
) -> ObservationRaster {
    let mut raster = ObservationRaster::zeros(*grid, *binning);
    for obs in observations {
        if !(obs.x.is_finite() && obs.y.is_finite()) {
            report.drop_record("observations", "non-finite coordinate");
            continue;
        }
        let Some(cell) = grid.cell_of(obs.x, obs.y) else {
            report.drop_record("observations", "outside grid");
            continue;
        };
        let Some(bin) = binning.bin_of(obs.timestamp) else {
            report.drop_record("observations", "outside time range");
            continue;
        };
        report.keep("observations");
        *raster.get_mut(grid.linear(cell), bin) += 1;
    }
    raster
}

#[cfg(test)]
mod tests {
    use super::super::{segment_tracks, BinLength, CellIndex, GapRules, ObservationCategory, Point, Waypoint};
    use super::*;
    use chrono::{DateTime, TimeDelta, TimeZone, Utc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn epoch() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2012, 1, 1, 0, 0, 0).unwrap()
    }

    fn binning(n: usize) -> TimeBinning {
        TimeBinning::new(epoch(), BinLength::Month, n).unwrap()
    }

    fn wp(id: &str, minutes: i64, x: f64, y: f64) -> Waypoint {
        Waypoint {
            patrol_id: id.into(),
            timestamp: epoch() + TimeDelta::minutes(minutes),
            x,
            y,
        }
    }

    fn obs(days: i64, x: f64, y: f64) -> ObservationRecord {
        ObservationRecord {
            timestamp: epoch() + TimeDelta::days(days),
            x,
            y,
            category: ObservationCategory::Snare,
        }
    }

    #[test]
    fn single_segment_in_one_cell() {
        let grid = GridSpec::km_cells(3, 3).unwrap();
        let track = PatrolTrack {
            patrol_id: "p".into(),
            waypoints: vec![wp("p", 0, 1200.0, 1500.0), wp("p", 5, 1700.0, 1500.0)],
        };
        let r = rasterize_effort(&[track], &grid, &binning(1), &mut IngestReport::new());
        for cell in 0..grid.n_cells() {
            let expected = if cell == grid.linear(CellIndex::new(1, 1)) {
                0.5
            } else {
                0.0
            };
            assert_eq!(r.get(cell, 0), expected);
        }
    }

    #[test]
    fn empty_tracks_give_zero_raster() {
        let grid = GridSpec::km_cells(4, 4).unwrap();
        let r = rasterize_effort(&[], &grid, &binning(5), &mut IngestReport::new());
        assert!(r.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn segments_outside_time_range_are_reported() {
        let grid = GridSpec::km_cells(2, 2).unwrap();
        let early = PatrolTrack {
            patrol_id: "p".into(),
            waypoints: vec![wp("p", -10, 100.0, 100.0), wp("p", -5, 200.0, 100.0)],
        };
        let mut report = IngestReport::new();
        let r = rasterize_effort(&[early], &grid, &binning(1), &mut report);
        assert_eq!(r.total(), 0.0);
        assert_eq!(report.dropped_for("segments", "outside time range"), 1);
    }

    #[test]
    fn segment_uses_start_bin() {
        let grid = GridSpec::km_cells(2, 2).unwrap();
        let start = 30 * 24 * 60 - 1;
        let track = PatrolTrack {
            patrol_id: "p".into(),
            waypoints: vec![wp("p", start, 100.0, 100.0), wp("p", start + 2, 300.0, 100.0)],
        };
        let r = rasterize_effort(&[track], &grid, &binning(2), &mut IngestReport::new());
        assert!((r.get(0, 0) - 0.2).abs() < 1e-12);
        assert_eq!(r.get(0, 1), 0.0);
    }

    fn random_tracks(rng: &mut ChaCha8Rng, n: usize) -> Vec<PatrolTrack> {
        (0..n)
            .map(|i| {
                let mut x = rng.random_range(-1000.0..6000.0);
                let mut y = rng.random_range(-1000.0..6000.0);
                let mut minute = rng.random_range(-2000..100_000);
                let pts = (0..rng.random_range(2..12))
                    .map(|_| {
                        let p = wp(&format!("t{i}"), minute, x, y);
                        x += rng.random_range(-1500.0..1500.0);
                        y += rng.random_range(-1500.0..1500.0);
                        minute += rng.random_range(1..20);
                        p
                    })
                    .collect();
                PatrolTrack {
                    patrol_id: format!("t{i}"),
                    waypoints: pts,
                }
            })
            .collect()
    }

    // Naive oracle: slab-intersect each segment with the extent and sum chord lengths.
    fn naive_in_grid_km(tracks: &[PatrolTrack], grid: &GridSpec, binning: &TimeBinning) -> f64 {
        let mut total = 0.0;
        for t in tracks {
            for w in t.waypoints.windows(2) {
                if binning.bin_of(w[0].timestamp).is_none() {
                    continue;
                }
                total += exact_chord(w[0].point(), w[1].point(), grid).unwrap_or(0.0);
            }
        }
        total / 1000.0
    }

    fn exact_chord(a: Point, b: Point, grid: &GridSpec) -> Option<f64> {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for (p0, d, min, max) in [
            (a.x, b.x - a.x, grid.origin_x, grid.origin_x + grid.width()),
            (a.y, b.y - a.y, grid.origin_y, grid.origin_y + grid.height()),
        ] {
            if d == 0.0 {
                if p0 < min || p0 >= max {
                    return None;
                }
            } else {
                let (t1, t2) = ((min - p0) / d, (max - p0) / d);
                lo = lo.max(t1.min(t2));
                hi = hi.min(t1.max(t2));
            }
        }
        (hi > lo).then(|| (hi - lo) * a.distance(&b))
    }

    #[test]
    fn effort_is_conserved_against_naive_loop() {
        let grid = GridSpec::km_cells(5, 5).unwrap();
        let b = binning(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let tracks = random_tracks(&mut rng, 50);
            let r = rasterize_effort(&tracks, &grid, &b, &mut IngestReport::new());
            let expected = naive_in_grid_km(&tracks, &grid, &b);
            assert!(r.values().iter().all(|&v| v >= 0.0));
            assert!(((r.total() - expected) / expected).abs() < 1e-9);
        }
    }

    #[test]
    fn translation_gives_identical_raster() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tracks = random_tracks(&mut rng, 20);
        // Quantize to quarter metres so translated coordinates stay exact.
        let quantize = |v: f64| (v * 4.0).round() / 4.0;
        let base: Vec<PatrolTrack> = tracks
            .into_iter()
            .map(|mut t| {
                for w in &mut t.waypoints {
                    w.x = quantize(w.x);
                    w.y = quantize(w.y);
                }
                t
            })
            .collect();
        let (ox, oy) = (512_000.0, 9_871_250.0);
        let moved: Vec<PatrolTrack> = base
            .iter()
            .cloned()
            .map(|mut t| {
                for w in &mut t.waypoints {
                    w.x += ox;
                    w.y += oy;
                }
                t
            })
            .collect();
        let g0 = GridSpec::km_cells(5, 5).unwrap();
        let g1 = GridSpec::new(ox, oy, 1000.0, 5, 5).unwrap();
        let b = binning(3);
        let r0 = rasterize_effort(&base, &g0, &b, &mut IngestReport::new());
        let r1 = rasterize_effort(&moved, &g1, &b, &mut IngestReport::new());
        assert_eq!(r0.values(), r1.values());
    }

    #[test]
    fn input_order_does_not_matter_after_segmentation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tracks = random_tracks(&mut rng, 15);
        let mut flat: Vec<Waypoint> = tracks.into_iter().flat_map(|t| t.waypoints).collect();
        let grid = GridSpec::km_cells(5, 5).unwrap();
        let b = binning(3);
        let rules = GapRules::default();
        let run = |pts: Vec<Waypoint>| {
            let mut rep = IngestReport::new();
            let tr = segment_tracks(pts, &rules, &mut rep);
            rasterize_effort(&tr, &grid, &b, &mut rep)
        };
        let r0 = run(flat.clone());
        flat.reverse();
        let r1 = run(flat.clone());
        flat.swap(0, 7);
        let r2 = run(flat);
        assert_eq!(r0.values(), r1.values());
        assert_eq!(r0.values(), r2.values());
    }

    #[test]
    fn observation_at_cell_centre() {
        let grid = GridSpec::km_cells(3, 3).unwrap();
        let c = grid.center(CellIndex::new(2, 1));
        let r = bin_observations(&[obs(3, c.x, c.y)], &grid, &binning(2), &mut IngestReport::new());
        assert_eq!(r.get(grid.linear(CellIndex::new(2, 1)), 0), 1);
        assert_eq!(r.total(), 1.0);
    }

    #[test]
    fn observation_on_shared_edge_goes_to_upper_cell() {
        let grid = GridSpec::km_cells(3, 3).unwrap();
        let r = bin_observations(&[obs(0, 1000.0, 2000.0)], &grid, &binning(1), &mut IngestReport::new());
        assert_eq!(r.get(grid.linear(CellIndex::new(1, 2)), 0), 1);
    }

    #[test]
    fn random_observations_match_double_loop_and_conserve_counts() {
        let grid = GridSpec::new(-250.0, 100.0, 500.0, 6, 4).unwrap();
        let b = binning(4);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let records: Vec<ObservationRecord> = (0..1000)
            .map(|_| {
                obs(
                    rng.random_range(-10..130),
                    rng.random_range(-600.0..3200.0),
                    rng.random_range(-200.0..2400.0),
                )
            })
            .collect();
        let mut report = IngestReport::new();
        let r = bin_observations(&records, &grid, &b, &mut report);

        let mut expected = vec![0u32; grid.n_cells() * b.n_bins];
        for rec in &records {
            for bin in 0..b.n_bins {
                let (start, end) = (b.bin_start(bin), b.bin_start(bin + 1));
                if rec.timestamp < start || rec.timestamp >= end {
                    continue;
                }
                for row in 0..grid.n_rows {
                    for col in 0..grid.n_cols {
                        let x0 = grid.origin_x + col as f64 * grid.cell_size;
                        let y0 = grid.origin_y + row as f64 * grid.cell_size;
                        if rec.x >= x0 && rec.x < x0 + grid.cell_size && rec.y >= y0 && rec.y < y0 + grid.cell_size {
                            expected[bin * grid.n_cells() + row * grid.n_cols + col] += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(r.values(), expected.as_slice());
        assert_eq!(r.total() as usize + report.dropped("observations"), records.len());
    }
}
