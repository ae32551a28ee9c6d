//! Derivative-free simplex minimisation with restarts.
//!
//! Uses the dimension-adaptive coefficients of Gao and Han, which behave far
//! better than the textbook ones once the dimension exceeds ten or so.

use rand::rngs::StdRng;
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadConfig {
    pub initial_step: f64,
    pub max_evals: usize,
    /// Stop a run once `f_worst - f_best <= ftol * (1 + |f_best|)`.
    pub ftol: f64,
    pub max_restarts: usize,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

pub fn minimize(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    cfg: &NelderMeadConfig,
    rng: &mut StdRng,
) -> Minimum {
    let mut best = x0.to_vec();
    let mut f_best = f(&best);
    let mut evals = 1;
    let mut step = cfg.initial_step;
    let mut converged = false;
    let mut quiet_restarts = 0;
    for restart in 0..=cfg.max_restarts {
        let budget = cfg.max_evals.saturating_sub(evals);
        if budget == 0 {
            break;
        }
        let run = simplex_run(f, &best, f_best, step, budget, cfg.ftol, rng, restart > 0);
        evals += run.evals;
        converged = run.converged;
        let gain = f_best - run.f;
        if run.f < f_best {
            best = run.x;
            f_best = run.f;
        }
        if gain <= cfg.ftol * (1.0 + f_best.abs()) {
            quiet_restarts += 1;
            if quiet_restarts >= 2 && converged {
                break;
            }
        } else {
            quiet_restarts = 0;
        }
        step = (step * 0.5).max(cfg.initial_step * 1e-3);
    }
    Minimum { x: best, f: f_best, evals, converged }
}

#[allow(clippy::too_many_arguments)]
fn simplex_run(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    step: f64,
    budget: usize,
    ftol: f64,
    rng: &mut StdRng,
    randomize: bool,
) -> Minimum {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut evals = 0;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut v = x0.to_vec();
        let sign = if randomize && rng.random_bool(0.5) { -1.0 } else { 1.0 };
        v[i] += sign * step;
        let fv = f(&v);
        evals += 1;
        simplex.push((v, fv));
    }

    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let point = |c: &[f64], w: &[f64], coef: f64, out: &mut [f64]| {
        for i in 0..out.len() {
            out[i] = c[i] + coef * (w[i] - c[i]);
        }
    };

    while evals < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_lo = simplex[0].1;
        let f_hi = simplex[n].1;
        if f_hi - f_lo <= ftol * (1.0 + f_lo.abs()) {
            converged = true;
            break;
        }
        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let worst = simplex[n].0.clone();
        point(&centroid, &worst, -alpha, &mut trial);
        let fr = f(&trial);
        evals += 1;
        if fr < f_lo {
            let reflected = trial.clone();
            point(&centroid, &worst, -alpha * beta, &mut trial);
            let fe = f(&trial);
            evals += 1;
            simplex[n] = if fe < fr { (trial.clone(), fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (trial.clone(), fr);
            continue;
        }
        let outside = fr < f_hi;
        let coef = if outside { -alpha * gamma } else { gamma };
        point(&centroid, &worst, coef, &mut trial);
        let fc = f(&trial);
        evals += 1;
        if (outside && fc <= fr) || (!outside && fc < f_hi) {
            simplex[n] = (trial.clone(), fc);
            continue;
        }
        let lo = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            for (x, l) in entry.0.iter_mut().zip(&lo) {
                *x = l + delta * (*x - l);
            }
            entry.1 = f(&entry.0);
            evals += 1;
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Minimum { x, f, evals, converged }
}
