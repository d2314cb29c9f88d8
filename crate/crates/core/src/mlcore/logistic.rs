use serde::{Deserialize, Serialize};

use super::{check_labels, check_row, Classifier, MlError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            l2: 1e-4,
            max_iters: 5000,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticTrainMeta {
    pub iterations: usize,
    pub final_loss: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
    pub train_meta: LogisticTrainMeta,
}

/// σ(z) without overflow for any finite z.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean cross-entropy plus (l2/2)·‖w‖², with its gradient in w and b.
pub fn loss_and_gradient(w: &[f64], b: f64, x: &[Vec<f64>], y: &[u8], l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let t = f64::from(u8::from(label != 0));
        let z = dot(w, row) + b;
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
        gb += r;
    }
    loss /= n;
    gb /= n;
    let mut norm = 0.0;
    for (g, wi) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * wi;
        norm += wi * wi;
    }
    (loss + 0.5 * l2 * norm, gw, gb)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss after each accepted step, starting with the initial loss.
pub type LossTrace = Vec<f64>;

pub fn train_logistic(x: &[Vec<f64>], y: &[u8], cfg: &LogisticConfig) -> Result<LogisticModel, MlError> {
    train_logistic_traced(x, y, cfg).map(|(m, _)| m)
}

/// Full-batch gradient descent. A step that would raise the loss is
/// rejected and the step size halved, so accepted losses never increase.
pub fn train_logistic_traced(
    x: &[Vec<f64>],
    y: &[u8],
    cfg: &LogisticConfig,
) -> Result<(LogisticModel, LossTrace), MlError> {
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(MlError::InvalidConfig("learning_rate must be > 0".into()));
    }
    if !(cfg.l2 >= 0.0 && cfg.l2.is_finite()) {
        return Err(MlError::InvalidConfig("l2 must be >= 0".into()));
    }
    if x.len() < 2 {
        return Err(MlError::TooFewRecords {
            needed: 2,
            got: x.len(),
        });
    }
    let d = check_labels(x, y)?;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let (mut loss, mut gw, mut gb) = loss_and_gradient(&w, b, x, y, cfg.l2);
    let mut trace = vec![loss];
    let mut step = cfg.learning_rate;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(wi, g)| wi - step * g).collect();
        let cand_b = b - step * gb;
        let (cand_loss, cand_gw, cand_gb) = loss_and_gradient(&cand_w, cand_b, x, y, cfg.l2);
        if cand_loss <= loss {
            let improvement = loss - cand_loss;
            w = cand_w;
            b = cand_b;
            loss = cand_loss;
            gw = cand_gw;
            gb = cand_gb;
            trace.push(loss);
            if improvement < cfg.tol {
                break;
            }
        } else {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    Ok((
        LogisticModel {
            weights: w,
            bias: b,
            l2: cfg.l2,
            train_meta: LogisticTrainMeta {
                iterations,
                final_loss: loss,
                seed: cfg.seed,
            },
        },
        trace,
    ))
}

impl LogisticModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, MlError> {
        check_row(x, self.weights.len())?;
        Ok(sigmoid(dot(&self.weights, x) + self.bias))
    }
}

impl Classifier for LogisticModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<f64, MlError> {
        self.predict(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(w: Vec<f64>, b: f64) -> LogisticModel {
        LogisticModel {
            weights: w,
            bias: b,
            l2: 0.0,
            train_meta: LogisticTrainMeta {
                iterations: 0,
                final_loss: 0.0,
                seed: 0,
            },
        }
    }

    #[test]
    fn predict_examples() {
        assert_eq!(model(vec![0.0, 0.0], 0.0).predict(&[3.0, -9.0]).unwrap(), 0.5);
        assert_eq!(model(vec![1.0], 0.0).predict(&[0.0]).unwrap(), 0.5);
        let p = model(vec![1.0], 0.0).predict(&[3f64.ln()]).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
        assert!(matches!(
            model(vec![1.0], 0.0).predict(&[1.0, 2.0]),
            Err(MlError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn extreme_logits_stay_in_open_interval() {
        let m = model(vec![1.0], 0.0);
        let hi = m.predict(&[700.0]).unwrap();
        let lo = m.predict(&[-700.0]).unwrap();
        assert!(hi <= 1.0 && hi.is_finite());
        assert!(lo > 0.0 && lo < 1e-300);
        let (loss, _, _) = loss_and_gradient(&[1.0], 0.0, &[vec![-700.0]], &[1], 0.0);
        assert!((loss - 700.0).abs() < 1e-9);
    }

    #[test]
    fn separable_line() {
        let x = vec![vec![-1.0], vec![1.0]];
        let y = [0, 1];
        let cfg = LogisticConfig {
            max_iters: 1000,
            ..LogisticConfig::default()
        };
        let (m, trace) = train_logistic_traced(&x, &y, &cfg).unwrap();
        assert!(m.predict(&[-1.0]).unwrap() < 0.5);
        assert!(m.predict(&[1.0]).unwrap() > 0.5);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.train_meta.iterations <= 1000);
    }

    #[test]
    fn single_class_and_non_finite() {
        let x = vec![vec![1.0], vec![2.0]];
        assert_eq!(
            train_logistic(&x, &[0, 0], &LogisticConfig::default()),
            Err(MlError::SingleClassInput)
        );
        let x = vec![vec![1.0], vec![f64::NAN]];
        assert_eq!(
            train_logistic(&x, &[0, 1], &LogisticConfig::default()),
            Err(MlError::NonFiniteInput)
        );
    }
}
