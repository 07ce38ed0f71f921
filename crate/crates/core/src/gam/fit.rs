use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{FeatureTable, SplineBasis};
use crate::error::{Error, Result};
use crate::model::logit;
use crate::optimizer::{minimize_objective, AdamConfig, Objective};
use crate::panel::Panel;

/// Feature columns and a binary target, one entry per training row.
#[derive(Debug, Clone, PartialEq)]
pub struct GamData {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl GamData {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, y: Vec<u8>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch {
                expected: names.len(),
                got: columns.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::EmptyPanel);
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != y.len() {
                return Err(Error::LengthMismatch {
                    expected: y.len(),
                    got: col.len(),
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("feature `{name}` has a non-finite value")));
            }
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::Parse("target must be 0 or 1".into()));
        }
        Ok(Self {
            names,
            columns,
            y: y.into_iter().map(f64::from).collect(),
        })
    }

    /// Joins each panel row with its cell's static features. With
    /// `with_effort`, the standardized `curr_effort` and `past_effort`
    /// columns are appended as two more smooth terms.
    pub fn from_panel(panel: &Panel, features: &FeatureTable, with_effort: bool) -> Result<Self> {
        if features.n_cells() != panel.n_cells {
            return Err(Error::LengthMismatch {
                expected: panel.n_cells,
                got: features.n_cells(),
            });
        }
        let mut names: Vec<String> = features.names().to_vec();
        let mut columns: Vec<Vec<f64>> = names
            .iter()
            .map(|n| {
                let col = features.column(n).expect("listed feature");
                panel.rows.iter().map(|r| col[r.cell]).collect()
            })
            .collect();
        if with_effort {
            names.push("curr_effort".into());
            columns.push(panel.rows.iter().map(|r| r.curr_effort).collect());
            names.push("past_effort".into());
            columns.push(panel.rows.iter().map(|r| r.past_effort).collect());
        }
        Self::new(names, columns, panel.rows.iter().map(|r| r.y).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn without(&self, feature: &str) -> Result<Self> {
        let i = self
            .names
            .iter()
            .position(|n| n == feature)
            .ok_or_else(|| Error::UnknownFeature(feature.to_string()))?;
        let mut out = self.clone();
        out.names.remove(i);
        out.columns.remove(i);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamSpec {
    pub default_lambda: f64,
    /// Per-feature overrides of `default_lambda`.
    pub lambdas: BTreeMap<String, f64>,
    pub n_knots: usize,
    pub adam: AdamConfig,
}

impl Default for GamSpec {
    fn default() -> Self {
        Self {
            default_lambda: 1.0,
            lambdas: BTreeMap::new(),
            n_knots: 10,
            adam: AdamConfig {
                tolerance: 1e-12,
                ..AdamConfig::default()
            },
        }
    }
}

impl GamSpec {
    pub fn lambda_for(&self, feature: &str) -> f64 {
        self.lambdas.get(feature).copied().unwrap_or(self.default_lambda)
    }
}

/// One fitted smooth. Its coefficients live in the full B-spline basis; the
/// centering constraint has already been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct GamTerm {
    pub feature: String,
    pub basis: SplineBasis,
    pub lambda: f64,
    pub coefficients: Vec<f64>,
    pub edf: f64,
    /// Constrained-to-basis map, `n_basis × (n_basis − 1)`.
    z: DMatrix<f64>,
    offset: usize,
    shift: f64,
    train_x: Vec<f64>,
}

impl GamTerm {
    pub fn value(&self, x: f64) -> f64 {
        let (first, b) = self.basis.nonzero(x);
        b.iter()
            .zip(&self.coefficients[first..])
            .map(|(bv, c)| bv * c)
            .sum::<f64>()
            - self.shift
    }

    fn constrained_row(&self, x: f64) -> DVector<f64> {
        let (first, b) = self.basis.nonzero(x);
        let mut row = DVector::zeros(self.z.ncols());
        for (k, bv) in b.iter().enumerate() {
            row += self.z.row(first + k).transpose() * *bv;
        }
        row
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GamFit {
    pub intercept: f64,
    pub terms: Vec<GamTerm>,
    pub loglik: f64,
    /// Log-likelihood minus `Σ λ_f θ_fᵀ P_f θ_f`.
    pub penalized_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_rows: usize,
    /// `[intercept, constrained block per term…]`
    beta: Vec<f64>,
    /// Inverse penalized negative Hessian over `beta`.
    covariance: DMatrix<f64>,
}

impl GamFit {
    pub fn term(&self, feature: &str) -> Result<&GamTerm> {
        self.terms
            .iter()
            .find(|t| t.feature == feature)
            .ok_or_else(|| Error::UnknownFeature(feature.to_string()))
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Centered component values at the training rows.
    pub fn in_sample(&self, feature: &str) -> Result<Vec<f64>> {
        let t = self.term(feature)?;
        Ok(t.train_x.iter().map(|&x| t.value(x)).collect())
    }

    pub fn component_se(&self, feature: &str, x: f64) -> Result<f64> {
        let t = self.term(feature)?;
        let m = t.z.ncols();
        let row = t.constrained_row(x);
        let v = self.covariance.view((t.offset, t.offset), (m, m));
        Ok((row.transpose() * v * &row)[(0, 0)].max(0.0).sqrt())
    }

    /// Least-squares slope of the in-sample component against the feature.
    pub fn linear_slope(&self, feature: &str) -> Result<f64> {
        let t = self.term(feature)?;
        let ys = self.in_sample(feature)?;
        let n = ys.len() as f64;
        let mx = t.train_x.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = t.train_x.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = t.train_x.iter().map(|x| (x - mx).powi(2)).sum();
        Ok(sxy / sxx)
    }

    /// Fitted detection probability for one row of feature values, in term order.
    pub fn predict(&self, values: &[f64]) -> f64 {
        let eta = self.intercept + self.terms.iter().zip(values).map(|(t, &x)| t.value(x)).sum::<f64>();
        crate::model::logistic(eta)
    }
}

struct TermSetup {
    feature: String,
    basis: SplineBasis,
    lambda: f64,
    z: DMatrix<f64>,
    offset: usize,
}

struct Design {
    terms: Vec<TermSetup>,
    x: DMatrix<f64>,
    y: DVector<f64>,
    /// Block-diagonal `λ_f Z_fᵀ P_f Z_f`; the penalty is `βᵀ·pen·β`.
    pen: DMatrix<f64>,
}

/// Null-space basis of `cᵀ` from a Householder reflection: the last
/// `n − 1` columns of `I − 2vvᵀ/vᵀv` with `v = c + sign(c₀)‖c‖e₀`.
fn sum_to_zero_basis(c: &DVector<f64>) -> DMatrix<f64> {
    let n = c.len();
    let mut v = c.clone();
    v[0] += c[0].signum() * c.norm();
    let h = DMatrix::identity(n, n) - &v * v.transpose() * (2.0 / v.norm_squared());
    h.columns(1, n - 1).into_owned()
}

impl Design {
    fn build(data: &GamData, spec: &GamSpec) -> Result<Self> {
        let n = data.n_rows();
        let mut terms = Vec::with_capacity(data.names.len());
        let mut offset = 1;
        for (name, col) in data.names.iter().zip(&data.columns) {
            let basis = SplineBasis::new(name, col, spec.n_knots)?;
            let mut c = DVector::zeros(basis.n_basis());
            for &x in col {
                let (first, b) = basis.nonzero(x);
                for (k, bv) in b.iter().enumerate() {
                    c[first + k] += bv;
                }
            }
            let z = sum_to_zero_basis(&c);
            let lambda = spec.lambda_for(name);
            if !(lambda >= 0.0) || !lambda.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "smoothing for `{name}` must be finite and >= 0"
                )));
            }
            let m = z.ncols();
            terms.push(TermSetup {
                feature: name.clone(),
                basis,
                lambda,
                z,
                offset,
            });
            offset += m;
        }
        let p = offset;
        let mut x = DMatrix::zeros(n, p);
        x.column_mut(0).fill(1.0);
        let mut pen = DMatrix::zeros(p, p);
        for (t, col) in terms.iter().zip(&data.columns) {
            let m = t.z.ncols();
            for (r, &v) in col.iter().enumerate() {
                let (first, b) = t.basis.nonzero(v);
                for (k, bv) in b.iter().enumerate() {
                    for j in 0..m {
                        x[(r, t.offset + j)] += bv * t.z[(first + k, j)];
                    }
                }
            }
            let s = t.z.transpose() * t.basis.penalty() * &t.z * t.lambda;
            pen.view_mut((t.offset, t.offset), (m, m)).copy_from(&s);
        }
        Ok(Self {
            terms,
            x,
            y: DVector::from_column_slice(&data.y),
            pen,
        })
    }

    fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Negative Bernoulli log-likelihood summed over rows.
    fn nll(&self, eta: &DVector<f64>) -> f64 {
        eta.iter()
            .zip(self.y.iter())
            .map(|(&z, &y)| z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z)
            .sum()
    }

    fn penalized_loglik(&self, beta: &DVector<f64>) -> (f64, f64) {
        let ll = -self.nll(&(&self.x * beta));
        (ll, ll - beta.dot(&(&self.pen * beta)))
    }

    /// Damped Newton ascent on the (concave) penalized log-likelihood from
    /// `beta`. Never returns a point worse than its start.
    fn newton_polish(&self, beta: &DVector<f64>, max_steps: usize) -> DVector<f64> {
        let mut beta = beta.clone();
        let mut current = self.penalized_loglik(&beta).1;
        for _ in 0..max_steps {
            let eta = &self.x * &beta;
            let mut xw = self.x.clone();
            let mut resid = DVector::zeros(eta.len());
            for (r, &z) in eta.iter().enumerate() {
                let p = crate::model::logistic(z);
                resid[r] = self.y[r] - p;
                xw.row_mut(r).scale_mut((p * (1.0 - p)).sqrt());
            }
            let grad = self.x.tr_mul(&resid) - &self.pen * &beta * 2.0;
            let hessian = xw.tr_mul(&xw) + &self.pen * 2.0;
            let Some(chol) = Cholesky::new(hessian) else {
                break;
            };
            let step = chol.solve(&grad);
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let candidate = &beta + &step * scale;
                let value = self.penalized_loglik(&candidate).1;
                if value.is_finite() && value >= current {
                    accepted = Some((candidate, value));
                    break;
                }
                scale *= 0.5;
            }
            let Some((next, value)) = accepted else {
                break;
            };
            let gain = value - current;
            beta = next;
            current = value;
            if gain <= 1e-12 * (1.0 + current.abs()) {
                break;
            }
        }
        beta
    }
}

/// Objective over `u = Lᵀβ`, where `LLᵀ` approximates the penalized
/// Hessian per row at the intercept-only start.
struct Whitened {
    xt: DMatrix<f64>,
    y: DVector<f64>,
    pen: DMatrix<f64>,
    n: f64,
}

impl Whitened {
    fn eval(&self, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let u = DVector::from_column_slice(u);
        let eta = &self.xt * &u;
        let pen_u = &self.pen * &u;
        let mut loss = u.dot(&pen_u);
        let mut resid = DVector::zeros(eta.len());
        for (i, (&z, &y)) in eta.iter().zip(self.y.iter()).enumerate() {
            let e = (-z.abs()).exp();
            loss += z.max(0.0) + e.ln_1p() - y * z;
            let p = if z >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
            resid[i] = p - y;
        }
        if let Some(g) = grad {
            let gv = (self.xt.tr_mul(&resid) + pen_u * 2.0) / self.n;
            g.copy_from_slice(gv.as_slice());
        }
        loss / self.n
    }
}

impl Objective for Whitened {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.eval(x, Some(out));
    }

    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.eval(x, Some(out))
    }
}

struct Solved {
    beta: DVector<f64>,
    iterations: usize,
    converged: bool,
}

fn solve(design: &Design, adam: &AdamConfig, start: Option<&DVector<f64>>) -> Result<Solved> {
    let n = design.y.len() as f64;
    let p = design.p();
    let ybar = (design.y.sum() / n).clamp(1e-6, 1.0 - 1e-6);
    let w0 = ybar * (1.0 - ybar);
    let mut a = (design.x.tr_mul(&design.x) * w0 + &design.pen * 2.0) / n;
    let ridge = 1e-10 * a.trace() / p as f64;
    for i in 0..p {
        a[(i, i)] += ridge;
    }
    let chol = Cholesky::new(a).ok_or_else(|| Error::Numerical("preconditioner is not positive definite".into()))?;
    let l = chol.l();
    let xt = l
        .solve_lower_triangular(&design.x.transpose())
        .ok_or_else(|| Error::Numerical("singular preconditioner".into()))?
        .transpose();
    let linv_pen = l
        .solve_lower_triangular(&design.pen)
        .ok_or_else(|| Error::Numerical("singular preconditioner".into()))?;
    let pen = l
        .solve_lower_triangular(&linv_pen.transpose())
        .ok_or_else(|| Error::Numerical("singular preconditioner".into()))?;
    let objective = Whitened {
        xt,
        y: design.y.clone(),
        pen,
        n,
    };
    let beta0 = match start {
        Some(b) => b.clone(),
        None => {
            let mut b = DVector::zeros(p);
            b[0] = logit(ybar);
            b
        }
    };
    let u0 = l.transpose() * beta0;
    let min = minimize_objective(&objective, u0.as_slice().to_vec(), adam)?;
    let beta = l
        .transpose()
        .solve_upper_triangular(&DVector::from_vec(min.x))
        .ok_or_else(|| Error::Numerical("singular preconditioner".into()))?;
    Ok(Solved {
        beta,
        iterations: min.iterations,
        converged: min.converged,
    })
}

/// Fits `logit P(y = 1) = c + Σ_f s_f(x_f)` with one centered cubic
/// P-spline per feature and no interactions.
pub fn fit_gam(data: &GamData, spec: &GamSpec) -> Result<GamFit> {
    if data.names.is_empty() {
        return Err(Error::InvalidConfig("at least one feature is required".into()));
    }
    spec.adam.validate()?;
    let design = Design::build(data, spec)?;
    let solved = solve(&design, &spec.adam, None)?;
    finish(data, design, solved)
}

fn finish(data: &GamData, design: Design, solved: Solved) -> Result<GamFit> {
    let beta = solved.beta;
    let eta = &design.x * &beta;
    let mut xw = design.x.clone();
    for (r, &z) in eta.iter().enumerate() {
        let p = crate::model::logistic(z);
        xw.row_mut(r).scale_mut((p * (1.0 - p)).sqrt());
    }
    let info = xw.tr_mul(&xw);
    let hessian = &info + &design.pen * 2.0;
    let covariance = Cholesky::<f64, Dyn>::new(hessian)
        .ok_or_else(|| Error::Numerical("penalized Hessian is not positive definite".into()))?
        .inverse();
    let influence = &covariance * &info;
    let (loglik, penalized_loglik) = design.penalized_loglik(&beta);

    let mut intercept = beta[0];
    let terms = design
        .terms
        .into_iter()
        .zip(&data.columns)
        .map(|(t, col)| {
            let m = t.z.ncols();
            let block = beta.rows(t.offset, m);
            let theta = &t.z * block;
            let edf = (0..m).map(|j| influence[(t.offset + j, t.offset + j)]).sum();
            let mut term = GamTerm {
                feature: t.feature,
                basis: t.basis,
                lambda: t.lambda,
                coefficients: theta.as_slice().to_vec(),
                edf,
                z: t.z,
                offset: t.offset,
                shift: 0.0,
                train_x: col.clone(),
            };
            let mean = col.iter().map(|&x| term.value(x)).sum::<f64>() / col.len() as f64;
            term.shift = mean;
            intercept += mean;
            term
        })
        .collect();

    Ok(GamFit {
        intercept,
        terms,
        loglik,
        penalized_loglik,
        iterations: solved.iterations,
        converged: solved.converged,
        n_rows: data.n_rows(),
        beta: beta.as_slice().to_vec(),
        covariance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCurve {
    pub feature: String,
    pub x: Vec<f64>,
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
}

impl ComponentCurve {
    pub fn lower(&self) -> Vec<f64> {
        self.estimate.iter().zip(&self.se).map(|(e, s)| e - 2.0 * s).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.estimate.iter().zip(&self.se).map(|(e, s)| e + 2.0 * s).collect()
    }
}

/// The centered component on `n_grid` evenly spaced points spanning the
/// observed feature range, with pointwise standard errors.
pub fn component_curve(fit: &GamFit, feature: &str, n_grid: usize) -> Result<ComponentCurve> {
    let term = fit.term(feature)?;
    let (lo, hi) = term.basis.range();
    let n_grid = n_grid.max(2);
    let x: Vec<f64> = (0..n_grid)
        .map(|i| {
            if i + 1 == n_grid {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n_grid - 1) as f64
            }
        })
        .collect();
    let estimate = x.iter().map(|&v| term.value(v)).collect();
    let se = x.iter().map(|&v| fit.component_se(feature, v)).collect::<Result<_>>()?;
    Ok(ComponentCurve {
        feature: feature.to_string(),
        x,
        estimate,
        se,
    })
}

pub const CURVE_HEADER: [&str; 4] = ["feature", "x", "estimate", "se"];

pub fn write_curves<W: Write>(curves: &[ComponentCurve], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CURVE_HEADER)?;
    for c in curves {
        for i in 0..c.x.len() {
            w.write_record([
                c.feature.clone(),
                c.x[i].to_string(),
                c.estimate[i].to_string(),
                c.se[i].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<curves>", e))?;
    Ok(())
}

/// Deviance-difference test for dropping one smooth term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub feature: String,
    pub edf: f64,
    /// Twice the penalized log-likelihood lost by dropping the term.
    pub statistic: f64,
    /// `None` when the reduced model could not be fitted.
    pub p_value: Option<f64>,
}

impl fmt::Display for Significance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.p_value {
            Some(p) if p < 2e-16 => "< 2e-16".to_string(),
            Some(p) => format!("{p:.3e}"),
            None => "unavailable".to_string(),
        };
        write!(
            f,
            "{:<20} edf {:>6.2}  chi2 {:>10.3}  p {} (APPROXIMATE)",
            self.feature, self.edf, self.statistic, p
        )
    }
}

const NEWTON_STEPS: usize = 50;

/// Refits without `feature` by Newton steps warm-started from the fit's
/// other coefficients (after polishing the full fit the same way), and
/// compares penalized log-likelihoods against a chi-square with the term's
/// effective degrees of freedom. `data` must be
/// the data `fit` was trained on.
pub fn term_significance(data: &GamData, spec: &GamSpec, fit: &GamFit, feature: &str) -> Result<Significance> {
    let term = fit.term(feature)?;
    let full = Design::build(data, spec)?;
    if full.p() != fit.beta.len() {
        return Err(Error::LengthMismatch {
            expected: full.p(),
            got: fit.beta.len(),
        });
    }
    let polished = full.newton_polish(&DVector::from_column_slice(&fit.beta), NEWTON_STEPS);
    let (_, pll_full) = full.penalized_loglik(&polished);

    let m = term.z.ncols();
    let mut start: Vec<f64> = polished.iter().copied().collect();
    start.drain(term.offset..term.offset + m);
    let start = DVector::from_vec(start);

    let reduced_pll = data.without(feature).and_then(|reduced| {
        let design = Design::build(&reduced, spec)?;
        let refit = design.newton_polish(&start, NEWTON_STEPS);
        Ok(design.penalized_loglik(&refit).1)
    });

    let (statistic, p_value) = match reduced_pll {
        Ok(pll) if pll.is_finite() => {
            let stat = (2.0 * (pll_full - pll)).max(0.0);
            let p = ChiSquared::new(term.edf).ok().map(|chi| chi.sf(stat));
            (stat, p)
        }
        Ok(_) | Err(_) => {
            log::warn!("reduced fit without `{feature}` failed; significance unavailable");
            (f64::NAN, None)
        }
    };
    Ok(Significance {
        feature: feature.to_string(),
        edf: term.edf,
        statistic,
        p_value,
    })
}
