use nalgebra::DMatrix;

use crate::error::{Error, Result};

const DEGREE: usize = 3;

/// Clamped cubic B-spline basis for one feature.
///
/// Interior knots sit at the `j/(K+1)` sample quantiles of the training
/// values; the boundary knots are the sample minimum and maximum, each
/// repeated four times. With `K` distinct interior knots there are `K + 4`
/// basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    pub feature: String,
    knots: Vec<f64>,
}

impl SplineBasis {
    pub fn new(feature: &str, values: &[f64], n_knots: usize) -> Result<Self> {
        let mut sorted: Vec<f64> = values.to_vec();
        if sorted.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("feature `{feature}` has a non-finite value")));
        }
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = match (sorted.first(), sorted.last()) {
            (Some(&lo), Some(&hi)) if hi - lo > 1e-12 * lo.abs().max(hi.abs()).max(1.0) => (lo, hi),
            _ => return Err(Error::DegenerateFeature(feature.to_string())),
        };
        let mut interior: Vec<f64> = (1..=n_knots)
            .map(|j| quantile(&sorted, j as f64 / (n_knots + 1) as f64))
            .filter(|&q| q > lo && q < hi)
            .collect();
        interior.dedup();
        let mut knots = vec![lo; DEGREE + 1];
        knots.extend(interior);
        knots.extend(std::iter::repeat_n(hi, DEGREE + 1));
        Ok(Self {
            feature: feature.to_string(),
            knots,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - DEGREE - 1
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Greville abscissae: the mean of each basis function's three inner knots.
    pub fn greville(&self) -> Vec<f64> {
        (0..self.n_basis())
            .map(|j| self.knots[j + 1..=j + DEGREE].iter().sum::<f64>() / DEGREE as f64)
            .collect()
    }

    /// All basis values at `x`, clamped to the knot range.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_basis()];
        let (first, values) = self.nonzero(x);
        out[first..first + DEGREE + 1].copy_from_slice(&values);
        out
    }

    /// The four possibly nonzero basis values at `x` and the index of the first.
    pub fn nonzero(&self, x: f64) -> (usize, [f64; DEGREE + 1]) {
        let t = &self.knots;
        let (lo, hi) = self.range();
        let x = x.clamp(lo, hi);
        let n = self.n_basis();
        // span i with t[i] <= x < t[i+1]; the right end belongs to the last span
        let span = if x >= hi {
            n - 1
        } else {
            t.partition_point(|&k| k <= x) - 1
        };
        let mut left = [0.0; DEGREE + 1];
        let mut right = [0.0; DEGREE + 1];
        let mut b = [0.0; DEGREE + 1];
        b[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = b[r] / (right[r + 1] + left[j - r]);
                b[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            b[j] = saved;
        }
        (span - DEGREE, b)
    }

    /// `DᵀD`, where row `j` of `D` is the second divided difference of the
    /// coefficients over Greville abscissae `j..j+2`, scaled by the mean
    /// abscissa spacing so that evenly spaced abscissae give plain second
    /// differences. Coefficients sampled from any linear function
    /// have zero penalty.
    pub fn penalty(&self) -> DMatrix<f64> {
        let g = self.greville();
        let n = g.len();
        let h = (g[n - 1] - g[0]) / (n - 1) as f64;
        let mut d = DMatrix::zeros(n - 2, n);
        for j in 0..n - 2 {
            let (h0, h1) = (g[j + 1] - g[j], g[j + 2] - g[j + 1]);
            d[(j, j)] = h / h0;
            d[(j, j + 1)] = -h * (1.0 / h0 + 1.0 / h1);
            d[(j, j + 2)] = h / h1;
        }
        d.transpose() * d
    }
}

/// Linear-interpolation sample quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-3.0f64..5.0).powi(3) / 10.0).collect()
    }

    /// Cox–de Boor recursion straight from the definition.
    fn naive(t: &[f64], i: usize, k: usize, x: f64, last: bool) -> f64 {
        if k == 0 {
            let inside = t[i] <= x && x < t[i + 1];
            let right_end = last && x == t[i + 1] && t[i] < t[i + 1] && t[i + 1] == *t.last().unwrap();
            return if inside || right_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        if t[i + k] > t[i] {
            v += (x - t[i]) / (t[i + k] - t[i]) * naive(t, i, k - 1, x, last);
        }
        if t[i + k + 1] > t[i + 1] {
            v += (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * naive(t, i + 1, k - 1, x, last);
        }
        v
    }

    #[test]
    fn fourteen_functions_for_ten_knots() {
        let b = SplineBasis::new("x", &sample(1, 500), 10).unwrap();
        assert_eq!(b.n_basis(), 14);
        assert_eq!(b.knots().len(), 18);
    }

    #[test]
    fn matches_recursive_definition() {
        let data = sample(2, 300);
        let b = SplineBasis::new("x", &data, 10).unwrap();
        let (lo, hi) = b.range();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut xs: Vec<f64> = (0..200).map(|_| rng.random_range(lo..hi)).collect();
        xs.extend([lo, hi]);
        xs.extend(b.knots().iter().copied());
        for x in xs {
            let fast = b.eval(x);
            for (i, v) in fast.iter().enumerate() {
                let slow = naive(b.knots(), i, 3, x, true);
                assert!((v - slow).abs() < 1e-12, "x={x} i={i}: {v} vs {slow}");
            }
        }
    }

    #[test]
    fn partition_of_unity_and_linear_reproduction() {
        let b = SplineBasis::new("x", &sample(4, 1000), 10).unwrap();
        let g = b.greville();
        let (lo, hi) = b.range();
        for i in 0..=1000 {
            let x = lo + (hi - lo) * i as f64 / 1000.0;
            let v = b.eval(x);
            assert!(v.iter().all(|&bv| bv >= -1e-15));
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let lin: f64 = v.iter().zip(&g).map(|(bv, gj)| bv * gj).sum();
            assert!((lin - x).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn penalty_null_space_is_linear() {
        let b = SplineBasis::new("x", &sample(5, 400), 10).unwrap();
        let p = b.penalty();
        let g = nalgebra::DVector::from_vec(b.greville());
        let ones = nalgebra::DVector::from_element(14, 1.0);
        assert!((&p * &ones).amax() < 1e-9);
        assert!((&p * &g).amax() < 1e-9 * g.amax());
        let eig = p.symmetric_eigen().eigenvalues;
        let mut ev: Vec<f64> = eig.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-9 && ev[1].abs() < 1e-9);
        assert!(ev[2] > 1e-6, "{ev:?}");
        assert!(ev.iter().all(|&e| e > -1e-9));
    }

    #[test]
    fn ties_and_constants() {
        assert!(matches!(
            SplineBasis::new("c", &[2.0; 10], 10),
            Err(Error::DegenerateFeature(_))
        ));
        let b = SplineBasis::new("d", &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0], 10).unwrap();
        assert!(b.knots().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(b.n_basis(), b.greville().len());
        let v = b.eval(1.5);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
