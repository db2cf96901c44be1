//! Feature inversion: find lower-level features whose forward image through
//! the next network block matches given upper-level features.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use crate::backbone::{forward_between, loss_and_gradient, WeightsBundle};
use crate::error::{invalid, shape, Error, Result};
use crate::tensor::FeatureMap;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    /// Limited-memory BFGS with Armijo backtracking.
    Lbfgs { history: usize },
    /// Steepest descent with Armijo backtracking.
    GradientDescent,
}

/// Starting point used by the pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitStrategy {
    /// The lower-level features resized by the feature-space operator.
    UrsResized,
    /// Independent uniform samples in `[lo, hi)`.
    RandomUniform { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct InversionConfig {
    pub max_iterations: usize,
    /// Stop once the relative loss decrease of an iteration drops below this.
    pub tolerance: f64,
    pub optimizer: Optimizer,
    pub init: InitStrategy,
    /// Clamp iterates to be non-negative after every step.
    pub project_nonneg: bool,
    pub time_limit: Option<Duration>,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-5,
            optimizer: Optimizer::Lbfgs { history: 10 },
            init: InitStrategy::UrsResized,
            project_nonneg: false,
            time_limit: None,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        if let Optimizer::Lbfgs { history: 0 } = self.optimizer {
            return Err(invalid("L-BFGS history must be at least 1"));
        }
        if let InitStrategy::RandomUniform { lo, hi } = self.init {
            if !(lo < hi) {
                return Err(invalid("random init range must satisfy lo < hi"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Inversion {
    pub features: FeatureMap,
    /// Loss at the starting point followed by the loss after each accepted step.
    pub loss_trace: Vec<f64>,
}

impl Inversion {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().unwrap()
    }
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: returns `-H g`.
fn lbfgs_direction(g: &[f64], history: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for p in history.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        q.iter_mut().zip(&p.y).for_each(|(q, y)| *q -= a * y);
        alphas.push(a);
    }
    let newest = history.back().expect("non-empty history");
    let gamma = dot(&newest.s, &newest.y) / dot(&newest.y, &newest.y);
    q.iter_mut().for_each(|v| *v *= gamma);
    for (p, a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        q.iter_mut().zip(&p.s).for_each(|(q, s)| *q += (a - b) * s);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `||forward_between(x) - target||^2` starting from `init`.
///
/// Every accepted step strictly lowers the loss, so the returned trace is
/// non-increasing. L-BFGS falls back to steepest descent (and drops its
/// history) whenever its direction is not a descent direction or its line
/// search fails.
pub fn invert(target: &FeatureMap, w: &WeightsBundle, init: &FeatureMap, cfg: &InversionConfig) -> Result<Inversion> {
    cfg.validate()?;
    if !init.is_finite() || !target.is_finite() {
        return Err(invalid("inversion inputs must be finite"));
    }
    let probe = forward_between(init, w)?;
    if probe.dims() != target.dims() {
        return Err(shape(format!(
            "init maps to {:?} but the target is {:?}",
            probe.dims(),
            target.dims()
        )));
    }
    let started = Instant::now();
    let eval = |x: &FeatureMap| loss_and_gradient(x, target, w);

    let mut x = init.clone();
    if cfg.project_nonneg {
        x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    }
    let (mut f, mut g) = eval(&x)?;
    if !f.is_finite() {
        return Err(Error::NonFiniteLoss { iteration: 0 });
    }
    let mut trace = vec![f];
    let history_len = match cfg.optimizer {
        Optimizer::Lbfgs { history } => history,
        Optimizer::GradientDescent => 0,
    };
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(history_len);
    let mut gd_step: Option<f64> = None;

    for iteration in 1..=cfg.max_iterations {
        if f == 0.0 {
            break;
        }
        if let Some(limit) = cfg.time_limit {
            if started.elapsed() > limit {
                return Err(Error::Timeout { stage: "feature inversion".into(), limit_ms: limit.as_millis() });
            }
        }

        let gg = dot(g.data(), g.data());
        if gg == 0.0 {
            break;
        }
        let mut accepted = None;
        for attempt in 0..2 {
            let quasi_newton = attempt == 0 && !history.is_empty();
            let (dir, t0) = if quasi_newton {
                let d = lbfgs_direction(g.data(), &history);
                if dot(&d, g.data()) >= 0.0 {
                    history.clear();
                    continue;
                }
                (d, 1.0)
            } else {
                let polyak = f / gg;
                let t0 = match (cfg.optimizer, gd_step) {
                    (Optimizer::GradientDescent, Some(prev)) => (2.0 * prev).min(polyak),
                    _ => polyak,
                };
                (g.data().iter().map(|v| -v).collect(), t0)
            };
            if let Some(found) = line_search(&x, f, &g, &dir, t0, cfg.project_nonneg, &eval)? {
                if !quasi_newton {
                    gd_step = Some(found.3);
                }
                accepted = Some(found);
                break;
            }
            history.clear();
            if !quasi_newton {
                break;
            }
        }
        let Some((x_new, f_new, g_new, _)) = accepted else { break };

        if history_len > 0 {
            let s: Vec<f64> = x_new.data().iter().zip(x.data()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.data().iter().zip(g.data()).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
                if history.len() == history_len {
                    history.pop_front();
                }
                history.push_back(Pair { s, y, rho: 1.0 / sy });
            }
        }

        let decrease = (f - f_new) / f;
        x = x_new;
        f = f_new;
        g = g_new;
        if !f.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        trace.push(f);
        if decrease < cfg.tolerance {
            break;
        }
    }
    Ok(Inversion { features: x, loss_trace: trace })
}

type Eval<'a> = dyn Fn(&FeatureMap) -> Result<(f64, FeatureMap)> + 'a;

/// Armijo backtracking. Returns `(x, f, g, step)` or `None` if no strictly
/// decreasing point was found.
fn line_search(
    x: &FeatureMap,
    f: f64,
    g: &FeatureMap,
    dir: &[f64],
    t0: f64,
    project: bool,
    eval: &Eval<'_>,
) -> Result<Option<(FeatureMap, f64, FeatureMap, f64)>> {
    let mut t = t0;
    for _ in 0..MAX_BACKTRACKS {
        let mut trial = x.clone();
        trial.data_mut().iter_mut().zip(dir).for_each(|(v, d)| {
            *v += t * d;
            if project {
                *v = v.max(0.0);
            }
        });
        let predicted: f64 = g.data().iter().zip(trial.data().iter().zip(x.data())).map(|(g, (a, b))| g * (a - b)).sum();
        let (ft, gt) = eval(&trial)?;
        if ft.is_finite() && ft < f && ft <= f + ARMIJO_C1 * predicted.min(0.0) {
            return Ok(Some((trial, ft, gt, t)));
        }
        t *= 0.5;
    }
    Ok(None)
}
