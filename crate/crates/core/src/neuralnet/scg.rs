use super::{dot, norm_sq, EarlyStop, Loss, Mlp, Samples, StopReason, TrainOptions, TrainReport, Trainer};
use crate::error::{Error, Result};

/// Moller's scaled conjugate gradient on the cross-entropy loss.
pub struct ScaledConjugateGradient;

impl Trainer for ScaledConjugateGradient {
    fn name(&self) -> &'static str {
        "scg"
    }

    fn loss(&self) -> Loss {
        Loss::CrossEntropy
    }

    fn train(&self, net: &mut Mlp, train: &Samples, val: Option<&Samples>, opts: &TrainOptions) -> Result<TrainReport> {
        opts.validate()?;
        if train.is_empty() {
            return Err(Error::InsufficientData("no training samples".into()));
        }
        let loss = Loss::CrossEntropy;
        let val_loss = |n: &Mlp| val.map(|v| n.loss(v, loss)).transpose();
        let mut stopper = EarlyStop::new(&net.params, val_loss(net)?, opts.patience);
        let mut report = TrainReport {
            trainer: self.name().into(),
            epochs: 0,
            best_epoch: 0,
            train_loss: Vec::new(),
            val_loss: Vec::new(),
            stop: StopReason::MaxEpochs,
        };
        let n = net.params.len();
        let mut e = net.loss(train, loss)?;
        let mut r: Vec<f64> = net.gradient(train, loss)?.iter().map(|g| -g).collect();
        let mut p = r.clone();
        let mut lambda = opts.lambda_init;
        let mut lambda_bar = 0.0;
        let mut success = true;
        let mut delta = 0.0;
        let mut s = vec![0.0; n];
        let mut probe = net.clone();
        let mut since_restart = 0usize;
        for epoch in 1..=opts.max_epochs {
            if r.iter().fold(0.0f64, |m, g| m.max(g.abs())) < opts.min_gradient {
                report.stop = StopReason::SmallGradient;
                break;
            }
            if e < 1e-15 {
                report.stop = StopReason::ZeroLoss;
                break;
            }
            let p2 = norm_sq(&p);
            if success {
                // second-order information from a finite difference of gradients
                let sigma = opts.sigma / p2.sqrt();
                for ((w, base), d) in probe.params.iter_mut().zip(&net.params).zip(&p) {
                    *w = base + sigma * d;
                }
                let g1 = probe.gradient(train, loss)?;
                for ((si, a), b) in s.iter_mut().zip(&g1).zip(&r) {
                    // r holds the negated gradient at the current point
                    *si = (a + b) / sigma;
                }
                delta = dot(&p, &s);
            }
            delta += (lambda - lambda_bar) * p2;
            if delta <= 0.0 {
                lambda_bar = 2.0 * (lambda - delta / p2);
                delta = -delta + lambda * p2;
                lambda = lambda_bar;
            }
            let mu = dot(&p, &r);
            let alpha = mu / delta;
            for ((w, base), d) in probe.params.iter_mut().zip(&net.params).zip(&p) {
                *w = base + alpha * d;
            }
            let e_new = probe.loss(train, loss)?;
            let comparison = 2.0 * delta * (e - e_new) / (mu * mu);
            if comparison >= 0.0 && e_new.is_finite() {
                std::mem::swap(net, &mut probe);
                e = e_new;
                let r_new: Vec<f64> = net.gradient(train, loss)?.iter().map(|g| -g).collect();
                lambda_bar = 0.0;
                success = true;
                since_restart += 1;
                if since_restart >= n {
                    p.clone_from(&r_new);
                    since_restart = 0;
                } else {
                    let beta = (norm_sq(&r_new) - dot(&r_new, &r)) / mu;
                    for (pi, ri) in p.iter_mut().zip(&r_new) {
                        *pi = ri + beta * *pi;
                    }
                }
                r = r_new;
                if comparison >= 0.75 {
                    lambda *= 0.25;
                }
            } else {
                lambda_bar = lambda;
                success = false;
            }
            if comparison < 0.25 {
                lambda += delta * (1.0 - comparison) / p2;
            }
            if !lambda.is_finite() || lambda > 1e100 {
                report.stop = StopReason::DampingExhausted;
                break;
            }
            report.epochs = epoch;
            report.train_loss.push(e);
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
