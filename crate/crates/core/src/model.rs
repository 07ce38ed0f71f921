//! Nested logistic deterrence models.
//!
//! Each target `i` has its own attractiveness `a_i` on the logit scale. The
//! probability of detecting illegal activity at a (cell, bin) row is
//!
//! ```text
//! past effort:            logistic(a_i + β·curr_effort + γ·past_effort)
//! past illegal:           logistic(a_i + β·curr_effort + ρ·past_illegal)
//! past illegal + nbrs:    logistic(a_i + β·curr_effort + ρ·past_illegal + η·past_neighbors)
//! ```
//!
//! Fitting minimizes the mean Bernoulli negative log-likelihood plus a weak
//! ridge on the deviations of `a` from its mean, which keeps never-detected
//! cells finite without pulling the overall level.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{minimize_objective, AdamConfig, Objective};
use crate::panel::{Panel, PanelRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    PastEffort,
    PastIllegal,
    PastIllegalNeighbors,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 3] = [
        ModelVariant::PastEffort,
        ModelVariant::PastIllegal,
        ModelVariant::PastIllegalNeighbors,
    ];

    /// Number of shared coefficients besides the attractiveness vector.
    pub fn n_coefficients(self) -> usize {
        match self {
            ModelVariant::PastEffort | ModelVariant::PastIllegal => 2,
            ModelVariant::PastIllegalNeighbors => 3,
        }
    }

    /// Coefficient names in table column order.
    pub fn coefficient_names(self) -> &'static [&'static str] {
        match self {
            ModelVariant::PastEffort => &["beta", "gamma"],
            ModelVariant::PastIllegal => &["beta", "rho"],
            ModelVariant::PastIllegalNeighbors => &["beta", "rho", "eta"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::PastEffort => "past_effort",
            ModelVariant::PastIllegal => "past_illegal",
            ModelVariant::PastIllegalNeighbors => "past_illegal_neighbors",
        }
    }

    pub fn needs_neighbors(self) -> bool {
        self == ModelVariant::PastIllegalNeighbors
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "past_effort" | "effort" | "eq1" => Ok(ModelVariant::PastEffort),
            "past_illegal" | "illegal" | "eq2" => Ok(ModelVariant::PastIllegal),
            "past_illegal_neighbors" | "neighbors" | "eq3" => Ok(ModelVariant::PastIllegalNeighbors),
            other => Err(Error::InvalidConfig(format!("unknown model variant `{other}`"))),
        }
    }
}

/// Attractiveness vector and shared coefficients. Coefficients a variant does
/// not use are held at zero and ignored by the predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub variant: ModelVariant,
    pub a: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub eta: f64,
}

impl ModelParams {
    pub fn zeros(variant: ModelVariant, n_cells: usize) -> Self {
        Self {
            variant,
            a: vec![0.0; n_cells],
            beta: 0.0,
            gamma: 0.0,
            rho: 0.0,
            eta: 0.0,
        }
    }

    /// N + 2 for the first two variants, N + 3 with neighbours.
    pub fn n_active(&self) -> usize {
        self.a.len() + self.variant.n_coefficients()
    }

    /// Active coefficients in table order (β, then γ or ρ, then η).
    pub fn coefficients(&self) -> Vec<f64> {
        match self.variant {
            ModelVariant::PastEffort => vec![self.beta, self.gamma],
            ModelVariant::PastIllegal => vec![self.beta, self.rho],
            ModelVariant::PastIllegalNeighbors => vec![self.beta, self.rho, self.eta],
        }
    }

    /// Flat layout `[a_0 … a_{N−1}, coefficients…]` used by the optimizer.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = self.a.clone();
        v.extend(self.coefficients());
        v
    }

    pub fn from_vector(variant: ModelVariant, n_cells: usize, v: &[f64]) -> Result<Self> {
        let expected = n_cells + variant.n_coefficients();
        if v.len() != expected {
            return Err(Error::LengthMismatch { expected, got: v.len() });
        }
        let mut p = Self::zeros(variant, n_cells);
        p.a.copy_from_slice(&v[..n_cells]);
        let c = &v[n_cells..];
        p.beta = c[0];
        match variant {
            ModelVariant::PastEffort => p.gamma = c[1],
            ModelVariant::PastIllegal => p.rho = c[1],
            ModelVariant::PastIllegalNeighbors => {
                p.rho = c[1];
                p.eta = c[2];
            }
        }
        Ok(p)
    }
}

/// Overflow-safe logistic function.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn linear_predictor(params: &ModelParams, row: &PanelRow) -> f64 {
    let base = params.a[row.cell] + params.beta * row.curr_effort;
    match params.variant {
        ModelVariant::PastEffort => base + params.gamma * row.past_effort,
        ModelVariant::PastIllegal => base + params.rho * row.past_illegal,
        ModelVariant::PastIllegalNeighbors => base + params.rho * row.past_illegal + params.eta * row.past_neighbors,
    }
}

pub fn predict_prob(params: &ModelParams, row: &PanelRow) -> f64 {
    logistic(linear_predictor(params, row))
}

/// Column-major copy of the rows a variant needs.
struct Design {
    n_cells: usize,
    cell: Vec<usize>,
    y: Vec<f64>,
    /// One column per shared coefficient, in coefficient order.
    columns: Vec<Vec<f64>>,
}

impl Design {
    fn new(panel: &Panel, variant: ModelVariant) -> Result<Self> {
        if panel.is_empty() {
            return Err(Error::EmptyPanel);
        }
        if variant.needs_neighbors() && !panel.has_neighbors {
            return Err(Error::MissingColumn("past_neighbors"));
        }
        let col = |f: fn(&PanelRow) -> f64| panel.rows.iter().map(f).collect::<Vec<_>>();
        let mut columns = vec![col(|r| r.curr_effort)];
        match variant {
            ModelVariant::PastEffort => columns.push(col(|r| r.past_effort)),
            ModelVariant::PastIllegal => columns.push(col(|r| r.past_illegal)),
            ModelVariant::PastIllegalNeighbors => {
                columns.push(col(|r| r.past_illegal));
                columns.push(col(|r| r.past_neighbors));
            }
        }
        Ok(Self {
            n_cells: panel.n_cells,
            cell: panel.rows.iter().map(|r| r.cell).collect(),
            y: panel.rows.iter().map(|r| r.y as f64).collect(),
            columns,
        })
    }

    fn predictors(&self, x: &[f64]) -> Vec<f64> {
        let (a, coef) = x.split_at(self.n_cells);
        let mut z: Vec<f64> = self.cell.iter().map(|&c| a[c]).collect();
        for (col, &b) in self.columns.iter().zip(coef) {
            for (zi, &xi) in z.iter_mut().zip(col) {
                *zi += b * xi;
            }
        }
        z
    }

    /// Penalized mean NLL at flat parameters `x`; fills `grad` when given.
    fn evaluate(&self, x: &[f64], l2: f64, grad: Option<&mut [f64]>) -> f64 {
        let z = self.predictors(x);
        let n = self.y.len() as f64;
        let mut loss = 0.0;
        let mut resid = Vec::with_capacity(if grad.is_some() { z.len() } else { 0 });
        for (&zi, &yi) in z.iter().zip(&self.y) {
            let e = (-zi.abs()).exp();
            // softplus(z) - y·z == −[y log p + (1−y) log(1−p)]
            loss += zi.max(0.0) + e.ln_1p() - yi * zi;
            if grad.is_some() {
                let p = if zi >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
                resid.push((p - yi) / n);
            }
        }
        let a = &x[..self.n_cells];
        let mean_a = a.iter().sum::<f64>() / self.n_cells as f64;
        let penalty: f64 = a.iter().map(|v| (v - mean_a).powi(2)).sum();

        if let Some(g) = grad {
            g.fill(0.0);
            let (ga, gc) = g.split_at_mut(self.n_cells);
            for (&c, &r) in self.cell.iter().zip(&resid) {
                ga[c] += r;
            }
            for (gi, &ai) in ga.iter_mut().zip(a) {
                *gi += 2.0 * l2 * (ai - mean_a);
            }
            for (gk, col) in gc.iter_mut().zip(&self.columns) {
                *gk = resid.iter().zip(col).map(|(r, x)| r * x).sum();
            }
        }
        loss / n + l2 * penalty
    }
}

struct PenalizedNll {
    design: Design,
    l2: f64,
}

impl Objective for PenalizedNll {
    fn value(&self, x: &[f64]) -> f64 {
        self.design.evaluate(x, self.l2, None)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.design.evaluate(x, self.l2, Some(out));
    }

    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.design.evaluate(x, self.l2, Some(out))
    }
}

fn check_params(params: &ModelParams, panel: &Panel) -> Result<()> {
    if params.a.len() != panel.n_cells {
        return Err(Error::LengthMismatch {
            expected: panel.n_cells,
            got: params.a.len(),
        });
    }
    Ok(())
}

/// Mean Bernoulli negative log-likelihood plus `l2·‖a − mean(a)‖²`.
pub fn nll(params: &ModelParams, panel: &Panel, l2: f64) -> Result<f64> {
    check_params(params, panel)?;
    Ok(Design::new(panel, params.variant)?.evaluate(&params.to_vector(), l2, None))
}

/// Gradient of [`nll`] over the active parameters, in [`ModelParams::to_vector`] layout.
pub fn nll_grad(params: &ModelParams, panel: &Panel, l2: f64) -> Result<Vec<f64>> {
    check_params(params, panel)?;
    let x = params.to_vector();
    let mut g = vec![0.0; x.len()];
    Design::new(panel, params.variant)?.evaluate(&x, l2, Some(&mut g));
    Ok(g)
}

/// Prior standard deviation of `a_i` around its mean implied by the default
/// penalty weight.
pub const ATTRACTIVENESS_PRIOR_SD: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitConfig {
    pub adam: AdamConfig,
    /// Weight on `‖a − mean(a)‖²` in the mean-NLL objective. `None` uses
    /// `1 / (2 · rows · ATTRACTIVENESS_PRIOR_SD²)`, which keeps the penalty's
    /// pull on each `a_i` independent of panel size.
    pub l2_attractiveness: Option<f64>,
    /// Recorded for provenance; full-batch fitting draws no random numbers.
    pub seed: u64,
}

impl FitConfig {
    pub fn l2_for(&self, n_rows: usize) -> f64 {
        self.l2_attractiveness
            .unwrap_or_else(|| 1.0 / (2.0 * n_rows.max(1) as f64 * ATTRACTIVENESS_PRIOR_SD.powi(2)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub mean_a: f64,
    pub std_a: f64,
    /// Penalized objective at the returned parameters.
    pub final_nll: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_rows: usize,
    pub detection_rate: f64,
    /// Penalty weight actually used.
    pub l2_attractiveness: f64,
    pub config: FitConfig,
    pub loss_trace: Vec<f64>,
}

/// Starting point: every `a_i` at the logit of the overall detection rate,
/// clamped to [−12, −1]; all coefficients zero.
pub fn initial_params(panel: &Panel, variant: ModelVariant) -> ModelParams {
    let a0 = logit(panel.detection_rate()).clamp(-12.0, -1.0);
    ModelParams {
        a: vec![a0; panel.n_cells],
        ..ModelParams::zeros(variant, panel.n_cells)
    }
}

pub fn fit(panel: &Panel, variant: ModelVariant, config: &FitConfig) -> Result<FitResult> {
    let l2 = config.l2_for(panel.len());
    if !(l2 >= 0.0) || !l2.is_finite() {
        return Err(Error::InvalidConfig(
            "l2_attractiveness must be finite and nonnegative".into(),
        ));
    }
    let objective = PenalizedNll {
        design: Design::new(panel, variant)?,
        l2,
    };
    let x0 = initial_params(panel, variant).to_vector();
    let min = minimize_objective(&objective, x0, &config.adam)?;
    let params = ModelParams::from_vector(variant, panel.n_cells, &min.x)?;
    let (mean_a, std_a) = mean_std(&params.a);
    log::debug!(
        "{variant} fit: {} iterations, converged={}, loss={:.6e}",
        min.iterations,
        min.converged,
        min.final_loss()
    );
    Ok(FitResult {
        mean_a,
        std_a,
        final_nll: min.final_loss(),
        iterations: min.iterations,
        converged: min.converged,
        n_rows: panel.len(),
        detection_rate: panel.detection_rate(),
        l2_attractiveness: l2,
        config: config.clone(),
        loss_trace: min.loss_trace,
        params,
    })
}

/// Mean and sample (n − 1) standard deviation.
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(cell: usize, y: u8, c: [f64; 4]) -> PanelRow {
        PanelRow {
            cell,
            bin: 0,
            y,
            curr_effort: c[0],
            past_effort: c[1],
            past_illegal: c[2],
            past_neighbors: c[3],
        }
    }

    fn random_panel(rng: &mut ChaCha8Rng, n_cells: usize, n_rows: usize) -> Panel {
        let rows = (0..n_rows)
            .map(|_| {
                row(
                    rng.random_range(0..n_cells),
                    u8::from(rng.random_bool(0.3)),
                    std::array::from_fn(|_| rng.random_range(-2.0..2.0)),
                )
            })
            .collect();
        Panel::new(n_cells, true, rows).unwrap()
    }

    fn random_params(rng: &mut ChaCha8Rng, variant: ModelVariant, n_cells: usize) -> ModelParams {
        let mut p = ModelParams::zeros(variant, n_cells);
        p.a.iter_mut().for_each(|a| *a = rng.random_range(-2.0..1.0));
        let v: Vec<f64> = (0..variant.n_coefficients())
            .map(|_| rng.random_range(-0.7..0.7))
            .collect();
        let mut full = p.a.clone();
        full.extend(v);
        ModelParams::from_vector(variant, n_cells, &full).unwrap()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(ModelParams::zeros(ModelVariant::PastEffort, 10).n_active(), 12);
        assert_eq!(ModelParams::zeros(ModelVariant::PastIllegal, 10).n_active(), 12);
        assert_eq!(
            ModelParams::zeros(ModelVariant::PastIllegalNeighbors, 10).n_active(),
            13
        );
    }

    #[test]
    fn predictor_at_average_conditions_is_attractiveness() {
        let mut p = ModelParams::zeros(ModelVariant::PastIllegalNeighbors, 3);
        p.a = vec![-1.0, -2.5, 0.3];
        p.beta = 0.7;
        p.rho = -0.2;
        p.eta = 0.4;
        assert_eq!(linear_predictor(&p, &row(1, 0, [0.0; 4])), -2.5);
    }

    #[test]
    fn predictor_with_table_values() {
        // ā = −9.284, β = 1.076, γ = −0.162
        let mut p = ModelParams::zeros(ModelVariant::PastEffort, 1);
        p.a[0] = -9.284;
        p.beta = 1.076;
        p.gamma = -0.162;
        let z = linear_predictor(&p, &row(0, 0, [1.0, 1.0, 5.0, 5.0]));
        assert!((z - (-8.370)).abs() < 1e-12);
        assert!((logistic(z) - 1.0 / (1.0 + 8.370f64.exp())).abs() < 1e-18);
        // 2.3166e-4; the three-figure value 2.31e-4 is a truncation
        assert_eq!((logistic(z) * 1e6).floor(), 231.0);
    }

    #[test]
    fn predictor_matches_naive_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for variant in ModelVariant::ALL {
            let panel = random_panel(&mut rng, 5, 30);
            let p = random_params(&mut rng, variant, 5);
            for r in &panel.rows {
                let mut naive = p.a[r.cell] + p.beta * r.curr_effort;
                match variant {
                    ModelVariant::PastEffort => naive += p.gamma * r.past_effort,
                    ModelVariant::PastIllegal => naive += p.rho * r.past_illegal,
                    ModelVariant::PastIllegalNeighbors => {
                        naive += p.rho * r.past_illegal;
                        naive += p.eta * r.past_neighbors;
                    }
                }
                assert_eq!(linear_predictor(&p, r), naive);
            }
        }
    }

    #[test]
    fn logistic_edges() {
        assert_eq!(logistic(0.0), 0.5);
        assert_eq!(logistic(800.0), 1.0);
        assert!(logistic(-800.0) >= 0.0 && logistic(-800.0) < 1e-300);
        assert!(!logistic(-1e308).is_nan());
    }

    #[test]
    fn single_row_nll_is_ln2() {
        let panel = Panel::new(1, false, vec![row(0, 1, [0.0; 4])]).unwrap();
        let p = ModelParams::zeros(ModelVariant::PastEffort, 1);
        assert!((nll(&p, &panel, 0.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn separation_limit_drives_nll_to_zero() {
        let panel = Panel::new(1, false, vec![row(0, 1, [0.0; 4])]).unwrap();
        let mut p = ModelParams::zeros(ModelVariant::PastEffort, 1);
        let mut last = f64::INFINITY;
        for a in [1.0, 5.0, 20.0, 50.0] {
            p.a[0] = a;
            let v = nll(&p, &panel, 0.0).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-20);
        // The residual vanishes too, leaving the penalty as the only gradient.
        let g = nll_grad(&p, &panel, 0.0).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn zero_covariates_give_zero_coefficient_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows = (0..20)
            .map(|i| row(i % 4, u8::from(rng.random_bool(0.5)), [0.0; 4]))
            .collect();
        let panel = Panel::new(4, true, rows).unwrap();
        let p = random_params(&mut rng, ModelVariant::PastIllegalNeighbors, 4);
        let g = nll_grad(&p, &panel, 0.1).unwrap();
        assert_eq!(g.len(), 7);
        assert!(g[4..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vectorized_nll_matches_per_row_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n_cells = rng.random_range(1..5);
            let n_rows = rng.random_range(1..=8);
            let panel = random_panel(&mut rng, n_cells, n_rows);
            let variant = ModelVariant::ALL[rng.random_range(0..3)];
            let p = random_params(&mut rng, variant, n_cells);
            let l2 = rng.random_range(0.0..0.5);
            let mut naive = 0.0;
            for r in &panel.rows {
                let pr = 1.0 / (1.0 + (-linear_predictor(&p, r)).exp());
                let y = r.y as f64;
                naive -= y * pr.ln() + (1.0 - y) * (1.0 - pr).ln();
            }
            naive /= panel.len() as f64;
            let mean_a = p.a.iter().sum::<f64>() / n_cells as f64;
            naive += l2 * p.a.iter().map(|a| (a - mean_a).powi(2)).sum::<f64>();
            assert!((nll(&p, &panel, l2).unwrap() - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-5;
        for _ in 0..30 {
            let n_cells = rng.random_range(1..=25);
            let n_rows = rng.random_range(1..=200);
            let panel = random_panel(&mut rng, n_cells, n_rows);
            let variant = ModelVariant::ALL[rng.random_range(0..3)];
            let p = random_params(&mut rng, variant, n_cells);
            let l2 = rng.random_range(0.0..0.1);
            let g = nll_grad(&p, &panel, l2).unwrap();
            let x = p.to_vector();
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fp = nll(&ModelParams::from_vector(variant, n_cells, &xp).unwrap(), &panel, l2).unwrap();
                let fm = nll(&ModelParams::from_vector(variant, n_cells, &xm).unwrap(), &panel, l2).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let err = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-4);
                assert!(err < 1e-5, "coord {i}: analytic {} vs fd {fd}", g[i]);
            }
        }
    }

    #[test]
    fn nested_losses_coincide_when_extra_coefficient_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let panel = random_panel(&mut rng, 6, 40);
            let mut eq1 = random_params(&mut rng, ModelVariant::PastEffort, 6);
            eq1.gamma = 0.0;
            let eq2 = ModelParams {
                variant: ModelVariant::PastIllegal,
                rho: 0.0,
                ..eq1.clone()
            };
            let mut eq2b = random_params(&mut rng, ModelVariant::PastIllegal, 6);
            let eq3 = ModelParams {
                variant: ModelVariant::PastIllegalNeighbors,
                eta: 0.0,
                ..eq2b.clone()
            };
            eq2b.eta = 0.0;
            assert_eq!(nll(&eq1, &panel, 0.01).unwrap(), nll(&eq2, &panel, 0.01).unwrap());
            assert_eq!(nll(&eq2b, &panel, 0.01).unwrap(), nll(&eq3, &panel, 0.01).unwrap());
        }
    }

    #[test]
    fn neighbor_variant_requires_column() {
        let panel = Panel::new(1, false, vec![row(0, 1, [0.0; 4])]).unwrap();
        let p = ModelParams::zeros(ModelVariant::PastIllegalNeighbors, 1);
        assert!(matches!(
            nll(&p, &panel, 0.0),
            Err(Error::MissingColumn("past_neighbors"))
        ));
        let empty = Panel::new(1, true, vec![]).unwrap();
        assert!(matches!(nll(&p, &empty, 0.0), Err(Error::EmptyPanel)));
    }

    #[test]
    fn all_negative_panel_keeps_coefficients_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut panel = random_panel(&mut rng, 8, 400);
        panel.rows.iter_mut().for_each(|r| r.y = 0);
        let config = FitConfig::default();
        let result = fit(&panel, ModelVariant::PastEffort, &config).unwrap();
        assert!(
            result.params.beta.abs() < 0.05 && result.params.gamma.abs() < 0.05,
            "{:?}",
            result.params
        );

        let mut prev = initial_params(&panel, ModelVariant::PastEffort).a;
        for steps in 1..=10 {
            let cfg = FitConfig {
                adam: AdamConfig {
                    max_iterations: steps,
                    ..config.adam
                },
                ..config.clone()
            };
            let a = fit(&panel, ModelVariant::PastEffort, &cfg).unwrap().params.a;
            assert!(a.iter().zip(&prev).all(|(now, before)| now < before), "step {steps}");
            prev = a;
        }
    }

    #[test]
    fn initialization_is_clamped_logit_rate() {
        let rows = (0..10).map(|i| row(0, u8::from(i < 3), [0.0; 4])).collect();
        let panel = Panel::new(2, false, rows).unwrap();
        let p = initial_params(&panel, ModelVariant::PastIllegal);
        assert!((p.a[0] - logit(0.3).clamp(-12.0, -1.0)).abs() < 1e-15);
        assert_eq!(p.a[0], -1.0);
        let none = Panel::new(1, false, vec![row(0, 0, [0.0; 4])]).unwrap();
        assert_eq!(initial_params(&none, ModelVariant::PastEffort).a[0], -12.0);
    }

    #[test]
    fn negative_l2_is_rejected() {
        let panel = Panel::new(1, false, vec![row(0, 1, [0.0; 4])]).unwrap();
        let cfg = FitConfig {
            l2_attractiveness: Some(-1.0),
            ..FitConfig::default()
        };
        assert!(fit(&panel, ModelVariant::PastEffort, &cfg).is_err());
    }

    fn recovery_fixture() -> (Panel, FitResult) {
        use crate::panel::assemble_panel;
        use crate::simulator::{simulate, SimConfig};
        let cfg = SimConfig {
            n_cols: 40,
            n_rows: 40,
            n_bins: 48,
            seed: 42,
            ..SimConfig::default()
        };
        let out = simulate(&cfg).unwrap();
        let (panel, _) = assemble_panel(&out.effort, &out.observations, &cfg.lags, None).unwrap();
        let result = fit(&panel, ModelVariant::PastEffort, &FitConfig::default()).unwrap();
        (panel, result)
    }

    #[test]
    fn recovery_fixture_behaviour() {
        let (panel, result) = recovery_fixture();
        assert!((result.params.beta - 1.0).abs() <= 0.05, "beta {}", result.params.beta);
        assert!(
            (result.params.gamma + 0.2).abs() <= 0.05,
            "gamma {}",
            result.params.gamma
        );

        let trace = &result.loss_trace;
        assert!(trace.iter().all(|v| v.is_finite()));
        let tail = &trace[trace.len() - trace.len() / 10..];
        assert!(tail.windows(2).all(|w| w[1] <= w[0]), "loss rose in the last 10%");

        let l2 = result.l2_attractiveness;
        let base = nll(&result.params, &panel, l2).unwrap();
        for c in [-0.1, -0.01, 0.01, 0.1] {
            let mut shifted = result.params.clone();
            shifted.a.iter_mut().for_each(|a| *a += c);
            assert!(nll(&shifted, &panel, l2).unwrap() > base, "shift {c}");
        }
        let again = fit(&panel, ModelVariant::PastEffort, &FitConfig::default()).unwrap();
        assert_eq!(again, result);
    }

    #[test]
    fn fit_result_json_round_trip() {
        let rows = (0..40)
            .map(|i| {
                row(
                    i % 4,
                    u8::from(i % 7 == 0),
                    [(i % 5) as f64 - 2.0, (i % 3) as f64 - 1.0, 0.0, 0.0],
                )
            })
            .collect();
        let panel = Panel::new(4, false, rows).unwrap();
        let cfg = FitConfig {
            adam: AdamConfig {
                max_iterations: 200,
                ..AdamConfig::default()
            },
            ..FitConfig::default()
        };
        let r = fit(&panel, ModelVariant::PastEffort, &cfg).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<FitResult>(&json).unwrap(), r);
    }

    proptest! {
        #[test]
        fn logistic_is_symmetric(z in -700.0f64..700.0) {
            prop_assert!((logistic(z) + logistic(-z) - 1.0).abs() < 1e-15);
        }

        #[test]
        fn more_past_effort_deters_when_gamma_negative(
            a in -12.0f64..2.0, beta in -2.0f64..2.0, gamma in -3.0f64..-0.01,
            curr in -3.0f64..3.0, past in -3.0f64..3.0, bump in 0.01f64..3.0,
        ) {
            let mut p = ModelParams::zeros(ModelVariant::PastEffort, 1);
            p.a[0] = a;
            p.beta = beta;
            p.gamma = gamma;
            let lo = predict_prob(&p, &row(0, 0, [curr, past, 0.0, 0.0]));
            let hi = predict_prob(&p, &row(0, 0, [curr, past + bump, 0.0, 0.0]));
            prop_assert!(hi < lo);
        }
    }
}
