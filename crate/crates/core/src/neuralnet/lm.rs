use nalgebra::{DMatrix, DVector};

use super::{EarlyStop, Loss, Mlp, Samples, StopReason, TrainOptions, TrainReport, Trainer};
use crate::error::{Error, Result};

/// Levenberg-Marquardt on the sum of squared residuals.
pub struct LevenbergMarquardt;

/// Solves `(J^T J + mu I) d = -J^T r`, through the smaller of the two
/// normal-equation forms. `None` when the damped system is not positive
/// definite.
fn damped_step(j: &DMatrix<f64>, gram: &DMatrix<f64>, jtr: &DVector<f64>, r: &DVector<f64>, mu: f64) -> Option<DVector<f64>> {
    let mut a = gram.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += mu;
    }
    let chol = a.cholesky()?;
    if j.nrows() >= j.ncols() {
        Some(-chol.solve(jtr))
    } else {
        // (J^T J + mu I)^-1 J^T = J^T (J J^T + mu I)^-1
        Some(-(j.transpose() * chol.solve(r)))
    }
}

impl Trainer for LevenbergMarquardt {
    fn name(&self) -> &'static str {
        "lm"
    }

    fn loss(&self) -> Loss {
        Loss::Mse
    }

    fn train(&self, net: &mut Mlp, train: &Samples, val: Option<&Samples>, opts: &TrainOptions) -> Result<TrainReport> {
        opts.validate()?;
        if train.is_empty() {
            return Err(Error::InsufficientData("no training samples".into()));
        }
        let norm = train.w.map_or(train.len() as f64, |w| w.iter().sum()) * net.arch.outputs as f64;
        let val_loss = |n: &Mlp| val.map(|v| n.loss(v, Loss::Mse)).transpose();
        let mut stopper = EarlyStop::new(&net.params, val_loss(net)?, opts.patience);
        let mut report = TrainReport {
            trainer: self.name().into(),
            epochs: 0,
            best_epoch: 0,
            train_loss: Vec::new(),
            val_loss: Vec::new(),
            stop: StopReason::MaxEpochs,
        };
        let mut mu = opts.mu_init;
        let mut trial = net.clone();
        'epochs: for epoch in 1..=opts.max_epochs {
            let (res, rows) = net.residual_jacobian(train)?;
            let r = DVector::from_vec(res);
            let sse = r.norm_squared();
            let p = net.params.len();
            let j = DMatrix::from_fn(rows.len(), p, |i, k| rows[i][k]);
            let jtr = j.transpose() * &r;
            if sse / norm < 1e-30 {
                report.stop = StopReason::ZeroLoss;
                break;
            }
            if 2.0 * jtr.amax() / norm < opts.min_gradient {
                report.stop = StopReason::SmallGradient;
                break;
            }
            let gram = if j.nrows() >= p { j.transpose() * &j } else { &j * j.transpose() };
            loop {
                if let Some(d) = damped_step(&j, &gram, &jtr, &r, mu) {
                    for ((w, base), dw) in trial.params.iter_mut().zip(&net.params).zip(d.iter()) {
                        *w = base + dw;
                    }
                    let new = trial.loss(train, Loss::Mse)? * norm;
                    if new.is_finite() && new < sse {
                        std::mem::swap(net, &mut trial);
                        mu = (mu / opts.mu_down).max(1e-20);
                        break;
                    }
                }
                mu *= opts.mu_up;
                if mu > opts.mu_max {
                    report.stop = StopReason::DampingExhausted;
                    break 'epochs;
                }
            }
            report.epochs = epoch;
            report.train_loss.push(net.loss(train, Loss::Mse)?);
            if let Some(v) = val_loss(net)? {
                report.val_loss.push(v);
                if stopper.update(epoch, &net.params, v) {
                    report.stop = StopReason::Patience;
                    break;
                }
            }
        }
        if val.is_some() {
            report.best_epoch = stopper.finish(&mut net.params);
        } else {
            report.best_epoch = report.epochs;
        }
        Ok(report)
    }
}
