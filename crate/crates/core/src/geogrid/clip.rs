use super::{CellIndex, GridSpec, Point};

/// Splits the segment `p0 → p1` into the per-cell lengths (metres) of its
/// intersection with the grid, in traversal order.
///
/// The segment is parameterised as `p0 + t·(p1 − p0)`, clipped to the grid
/// extent, and cut at every crossing of an interior cell boundary. Each piece
/// is assigned to the cell containing its midpoint, which resolves pieces
/// running along a boundary by the half-open convention.
pub fn clip_segment_to_cells(p0: Point, p1: Point, grid: &GridSpec) -> Vec<(CellIndex, f64)> {
    let x0 = p0.x - grid.origin_x;
    let y0 = p0.y - grid.origin_y;
    let dx = p1.x - p0.x;
    let dy = p1.y - p0.y;
    let length = dx.hypot(dy);
    if !(length > 0.0) || !length.is_finite() {
        return Vec::new();
    }

    let Some((t_in, t_out)) = clip_to_box(x0, y0, dx, dy, grid.width(), grid.height()) else {
        return Vec::new();
    };

    let s = grid.cell_size;
    let mut cuts = vec![t_in, t_out];
    push_crossings(&mut cuts, x0, dx, t_in, t_out, s, grid.n_cols);
    push_crossings(&mut cuts, y0, dy, t_in, t_out, s, grid.n_rows);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut pieces: Vec<(CellIndex, f64)> = Vec::with_capacity(cuts.len());
    for w in cuts.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        if tb <= ta {
            continue;
        }
        let tm = 0.5 * (ta + tb);
        let Some(cell) = grid.local_cell_of(x0 + tm * dx, y0 + tm * dy) else {
            continue;
        };
        let len = (tb - ta) * length;
        match pieces.last_mut() {
            Some((last, acc)) if *last == cell => *acc += len,
            _ => pieces.push((cell, len)),
        }
    }
    pieces
}

/// Liang–Barsky clip of the parametric segment against `[0, w] × [0, h]`.
fn clip_to_box(x0: f64, y0: f64, dx: f64, dy: f64, w: f64, h: f64) -> Option<(f64, f64)> {
    let mut t_in = 0.0_f64;
    let mut t_out = 1.0_f64;
    for (p, q) in [(-dx, x0), (dx, w - x0), (-dy, y0), (dy, h - y0)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t_in = t_in.max(r);
            } else {
                t_out = t_out.min(r);
            }
        }
    }
    (t_in < t_out).then_some((t_in, t_out))
}

/// Parameters at which the segment crosses interior grid lines `k·s`, `0 < k < n`.
fn push_crossings(cuts: &mut Vec<f64>, start: f64, delta: f64, t_in: f64, t_out: f64, s: f64, n: usize) {
    if delta == 0.0 {
        return;
    }
    let a = start + t_in * delta;
    let b = start + t_out * delta;
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let first = ((lo / s).floor() as i64 + 1).max(1);
    let last = ((hi / s).ceil() as i64 - 1).min(n as i64 - 1);
    for k in first..=last {
        let t = (k as f64 * s - start) / delta;
        if t > t_in && t < t_out {
            cuts.push(t);
        }
    }
}
