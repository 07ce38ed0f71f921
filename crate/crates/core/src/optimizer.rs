//! Full-batch Adam over flat parameter vectors.
//!
//! This is the only fitting engine in the crate: both the deterrence models
//! and the additive model minimize through [`minimize_objective`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once the loss changes by less than this over `window` iterations.
    pub tolerance: f64,
    pub window: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iterations: 20_000,
            tolerance: 1e-9,
            window: 50,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("adam: {what}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be nonnegative");
        }
        if self.window == 0 {
            return bad("window must be positive");
        }
        Ok(())
    }
}

/// Iteration count, moment estimates and current parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub x: Vec<f64>,
}

impl AdamState {
    pub fn new(x0: Vec<f64>) -> Self {
        let n = x0.len();
        Self {
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
            x: x0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(state: &mut AdamState, gradient: &[f64], config: &AdamConfig) -> Result<()> {
    if gradient.len() != state.x.len() {
        return Err(Error::LengthMismatch {
            expected: state.x.len(),
            got: gradient.len(),
        });
    }
    if let Some(i) = gradient.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(i));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for (((x, m), v), &g) in state.x.iter_mut().zip(&mut state.m).zip(&mut state.v).zip(gradient) {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *x -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    Ok(())
}

/// A differentiable scalar function of a flat parameter vector.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]);

    /// Value and gradient together; override when they share work.
    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.gradient(x, out);
        self.value(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    /// Loss at the start point and after every step.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Minimum {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace holds at least the initial loss")
    }
}

/// Runs Adam from `x0` until `max_iterations` steps or until the loss moves by
/// less than `tolerance` across the last `window` iterations.
pub fn minimize_objective<O: Objective + ?Sized>(objective: &O, x0: Vec<f64>, config: &AdamConfig) -> Result<Minimum> {
    config.validate()?;
    let mut state = AdamState::new(x0);
    let mut grad = vec![0.0; state.x.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    loop {
        let loss = objective.value_and_gradient(&state.x, &mut grad);
        let iteration = state.t as usize;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        trace.push(loss);
        if trace.len() > config.window {
            let past = trace[trace.len() - 1 - config.window];
            if (past - loss).abs() < config.tolerance {
                converged = true;
                break;
            }
        }
        if iteration >= config.max_iterations {
            break;
        }
        adam_step(&mut state, &grad, config)?;
    }
    Ok(Minimum {
        iterations: state.t as usize,
        x: state.x,
        loss_trace: trace,
        converged,
    })
}

struct FnObjective<F, G> {
    loss: F,
    grad: G,
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.loss)(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }
}

/// Closure form of [`minimize_objective`].
pub fn minimize<F, G>(loss_fn: F, grad_fn: G, x0: Vec<f64>, config: &AdamConfig) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    minimize_objective(
        &FnObjective {
            loss: loss_fn,
            grad: grad_fn,
        },
        x0,
        config,
    )
}
