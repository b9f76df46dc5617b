//! Independent reference computations for the inference and simulation
//! code. Each check returns a short summary on success and a description of
//! the first violation otherwise.

#![allow(dead_code)]

use smc_core::gp::{kernel_matrix_sym, se_kernel, se_kernel_gradient, KernelParams};
use smc_core::linalg::{Cholesky, Matrix};
use smc_core::rng::{RngStream, StreamRng};
use smc_core::svgp::{fit, init_posterior, probit_mean, probit_variance, FitOptions, PredictiveDist};
use smc_core::{parse_model, simulate, Dataset, GaussHermite, VariationalPosterior};

pub type Check = Result<String, String>;
pub type CheckFn = fn() -> Check;

fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn random_posterior(rng: &mut StreamRng, dim: usize, m: usize, ell: f64) -> VariationalPosterior {
    let inducing: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..dim).map(|_| rng.uniform()).collect())
        .collect();
    let mean: Vec<f64> = (0..m).map(|_| 6.0 * (rng.uniform() - 0.5)).collect();
    let scale = Matrix::from_fn(m, m, |r, c| {
        if r == c {
            0.05 + 1.5 * rng.uniform()
        } else if c < r {
            rng.uniform() - 0.5
        } else {
            0.0
        }
    });
    VariationalPosterior::from_whitened(inducing, KernelParams::new(ell, 1e-6).unwrap(), mean, scale)
        .unwrap()
}

/// `log ∫ Πᵢ Φ(gᵢ)^{n1ᵢ} Φ(−gᵢ)^{n0ᵢ} N(g; 0, K) dg` by a trapezoid rule on
/// a dense grid over the whitened coordinates `z`, `g = L z`.
fn log_marginal_likelihood(points: &[Vec<f64>], counts: &[(u32, u32)], kern: &KernelParams) -> f64 {
    let n = points.len();
    let l = Cholesky::factor(&kernel_matrix_sym(points, kern)).unwrap().into_lower();
    let steps = match n {
        1 => 4001,
        2 => 801,
        _ => 161,
    };
    let lim = 7.5;
    let h = 2.0 * lim / (steps - 1) as f64;
    let nodes: Vec<f64> = (0..steps).map(|i| -lim + h * i as f64).collect();
    let dens: Vec<f64> = nodes
        .iter()
        .map(|z| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() * h)
        .collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; n];
    loop {
        let mut w = 1.0;
        let mut like = 1.0;
        for i in 0..n {
            w *= dens[idx[i]];
            let g: f64 = (0..=i).map(|k| l[(i, k)] * nodes[idx[k]]).sum();
            let (n1, n0) = counts[i];
            like *= phi(g).powi(n1 as i32) * phi(-g).powi(n0 as i32);
        }
        total += w * like;
        let mut k = n;
        loop {
            if k == 0 {
                return total.ln();
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < steps {
                break;
            }
            idx[k] = 0;
        }
    }
}

pub fn elbo_below_marginal_likelihood() -> Check {
    let kern = KernelParams::new(0.1, 1e-6).unwrap();
    let gh = GaussHermite::default();
    let opts = FitOptions::default();
    let mut rng = RngStream::new(2024, 0).generator();
    let mut worst_gap: f64 = 0.0;
    let mut cases = 0;
    for n in 1..=3usize {
        for rep in 0..3 {
            let points: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.uniform()]).collect();
            let counts: Vec<(u32, u32)> = (0..n)
                .map(|_| (rng.below(4) as u32, rng.below(4) as u32))
                .collect();
            let mut data = Dataset::empty();
            for (p, (n1, n0)) in points.iter().zip(&counts) {
                for _ in 0..*n1 {
                    data.push(p.clone(), true);
                }
                for _ in 0..*n0 {
                    data.push(p.clone(), false);
                }
            }
            let log_p = log_marginal_likelihood(&points, &counts, &kern);
            // random posteriors on the data points and on a separate set
            for m in [n, 2] {
                let q = if m == n && rep % 2 == 0 {
                    let mut q = random_posterior(&mut rng, 1, n, 0.1);
                    q = VariationalPosterior::from_whitened(
                        points.clone(),
                        kern,
                        q.whitened_mean().to_vec(),
                        q.whitened_scale().clone(),
                    )
                    .unwrap();
                    q
                } else {
                    random_posterior(&mut rng, 1, m, 0.1)
                };
                let e = q.elbo(&data, &gh).unwrap();
                cases += 1;
                if e > log_p + 1e-6 {
                    return Err(format!("ELBO {e} exceeds log p(y) = {log_p} (n = {n})"));
                }
            }
            let fitted = fit(&init_posterior(points.clone(), kern).unwrap(), &data, &opts)
                .unwrap()
                .posterior;
            let e = fitted.elbo(&data, &gh).unwrap();
            cases += 1;
            if e > log_p + 1e-6 {
                return Err(format!("fitted ELBO {e} exceeds log p(y) = {log_p}"));
            }
            if log_p - e > 0.5 {
                return Err(format!("fitted ELBO {e} is {} nats below log p(y)", log_p - e));
            }
            worst_gap = worst_gap.max(log_p - e);
        }
    }
    Ok(format!("{cases} bound checks, largest optimum gap {worst_gap:.2e} nats"))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / norm.max(1e-8)
}

pub fn kernel_gradient_matches_fd() -> Check {
    let mut rng = RngStream::new(7, 0).generator();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = 1 + rng.below(3);
        let kern = KernelParams::new(0.02 + rng.uniform(), 0.0).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
        let u: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
        let an = se_kernel_gradient(&x, &u, &kern);
        let h = 1e-5;
        let fd: Vec<f64> = (0..d)
            .map(|k| {
                let mut xp = x.clone();
                xp[k] += h;
                let mut xn = x.clone();
                xn[k] -= h;
                (se_kernel(&xp, &u, &kern) - se_kernel(&xn, &u, &kern)) / (2.0 * h)
            })
            .collect();
        if an.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-12 {
            continue;
        }
        let e = rel_err(&fd, &an);
        worst = worst.max(e);
        if e >= 1e-5 {
            return Err(format!("kernel gradient rel. error {e:.2e} at x={x:?}, u={u:?}"));
        }
    }
    Ok(format!("worst rel. error {worst:.2e}"))
}

pub fn mean_gradient_matches_fd() -> Check {
    let mut rng = RngStream::new(8, 0).generator();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = 1 + rng.below(2);
        let m = 1 + rng.below(8);
        let ell = 0.05 + 0.5 * rng.uniform();
        let q = random_posterior(&mut rng, d, m, ell);
        let x: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
        let an = q.mean_gradient(&x);
        let h = 1e-5;
        let fd: Vec<f64> = (0..d)
            .map(|k| {
                let mut xp = x.clone();
                xp[k] += h;
                let mut xn = x.clone();
                xn[k] -= h;
                let f = |p: Vec<f64>| q.latent_marginals(&[p]).unwrap()[0].mean;
                (f(xp) - f(xn)) / (2.0 * h)
            })
            .collect();
        let e = rel_err(&fd, &an);
        worst = worst.max(e);
        if e >= 1e-5 {
            return Err(format!("mean gradient rel. error {e:.2e} ({fd:?} vs {an:?})"));
        }
    }
    Ok(format!("worst rel. error {worst:.2e}"))
}

pub fn probabilities_and_variances_bounded() -> Check {
    let mut rng = RngStream::new(9, 0).generator();
    let gh = GaussHermite::default();
    let mut count = 0;
    for _ in 0..100 {
        let d = 1 + rng.below(2);
        let m = 1 + rng.below(10);
        let ell = 0.01 + rng.uniform();
        let q = random_posterior(&mut rng, d, m, ell);
        let xs: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..d).map(|_| 1.4 * rng.uniform() - 0.2).collect())
            .collect();
        let p = q.predict_probability(&xs).unwrap();
        let v = q.predictive_variance(&xs, &gh).unwrap();
        for (pi, vi) in p.iter().zip(&v) {
            count += 1;
            if !(0.0..=1.0).contains(pi) {
                return Err(format!("probability {pi} outside [0, 1]"));
            }
            if !(0.0..=0.25).contains(vi) {
                return Err(format!("variance {vi} outside [0, 0.25]"));
            }
        }
    }
    Ok(format!("{count} cases"))
}

/// Composite Simpson rule of `f` against the `N(mean, var)` density.
fn dense_expect(f: impl Fn(f64) -> f64, mean: f64, var: f64) -> f64 {
    let s = var.sqrt();
    let n = 20_000;
    let (a, b) = (mean - 12.0 * s, mean + 12.0 * s);
    let h = (b - a) / n as f64;
    let dens = |g: f64| (-(g - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    let mut acc = 0.0;
    for i in 0..=n {
        let g = a + h * i as f64;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * f(g) * dens(g);
    }
    acc * h / 3.0
}

pub fn predictive_moments_match_dense_integration() -> Check {
    let gh = GaussHermite::default();
    let mut rng = RngStream::new(10, 0).generator();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d = PredictiveDist {
            mean: 6.0 * (rng.uniform() - 0.5),
            variance: 0.01 + 3.0 * rng.uniform(),
        };
        let p_dense = dense_expect(phi, d.mean, d.variance);
        let v_dense = dense_expect(|g| phi(g).powi(2), d.mean, d.variance) - p_dense * p_dense;
        let p_quad = gh.expect(phi, d.mean, d.variance);
        for (a, b, what) in [
            (probit_mean(d), p_dense, "probability"),
            (probit_mean(d), p_quad, "probability vs quadrature"),
            (probit_variance(d, &gh), v_dense, "variance"),
        ] {
            worst = worst.max((a - b).abs());
            if (a - b).abs() > 1e-6 {
                return Err(format!("{what}: {a} vs {b} at {d:?}"));
            }
        }
    }
    let logistic = |g: f64| 1.0 / (1.0 + (-g).exp());
    let a = GaussHermite::new(32).expect(logistic, 0.0, 1.0);
    let b = dense_expect(logistic, 0.0, 1.0);
    if (a - b).abs() > 1e-8 {
        return Err(format!("logistic expectation {a} vs {b}"));
    }
    Ok(format!("worst abs. error {worst:.2e}"))
}

pub fn pure_death_extinction_time() -> Check {
    let model = parse_model("species I=5\nparam k range 0.01 1\nreaction death: I -> 0 @ k\n").unwrap();
    let point = model.point(vec![0.1]).unwrap();
    let runs = 100_000u64;
    let mut sum = 0.0;
    for s in 0..runs {
        let tr = simulate(&model, &point, 1e4, RngStream::new(31, s));
        if tr.final_state()[0] != 0 {
            return Err(format!("run {s} did not go extinct"));
        }
        sum += *tr.times().last().unwrap();
    }
    let mean = sum / runs as f64;
    let exact = 10.0 * (1.0 + 0.5 + 1.0 / 3.0 + 0.25 + 0.2);
    let rel = (mean - exact).abs() / exact;
    if rel > 0.02 {
        return Err(format!("mean extinction {mean} vs {exact}"));
    }
    Ok(format!("mean {mean:.4} vs {exact:.4} (rel. {rel:.2e})"))
}

pub fn prior_recovery() -> Check {
    let kern = KernelParams::new(0.05, 1e-6).unwrap();
    let u: Vec<Vec<f64>> = (0..6)
        .flat_map(|i| (0..6).map(move |j| vec![i as f64 / 5.0, j as f64 / 5.0]))
        .collect();
    let xs: Vec<Vec<f64>> = (0..15)
        .flat_map(|i| (0..15).map(move |j| vec![i as f64 / 14.0, j as f64 / 14.0]))
        .collect();
    let prior = VariationalPosterior::prior(u.clone(), kern).unwrap();
    for d in prior.latent_marginals(&xs).unwrap() {
        if d.mean != 0.0 || (d.variance - 1.0).abs() > 1e-8 {
            return Err(format!("prior marginal {d:?}"));
        }
    }
    let q0 = init_posterior(u, kern).unwrap();
    let q = fit(&q0, &Dataset::empty(), &FitOptions::default()).unwrap().posterior;
    let mut worst: f64 = 0.0;
    for d in q.latent_marginals(&xs).unwrap() {
        worst = worst.max(d.mean.abs()).max((d.variance - 1.0).abs());
    }
    if worst > 1e-3 {
        return Err(format!("fit on empty data deviates from the prior by {worst}"));
    }
    Ok(format!("max deviation after fit {worst:.2e}"))
}

pub fn permutation_invariance() -> Check {
    let mut rng = RngStream::new(12, 0).generator();
    let mut data = Dataset::empty();
    for _ in 0..300 {
        let x = vec![rng.below(10) as f64 / 9.0, rng.below(10) as f64 / 9.0];
        let p = phi(4.0 * (x[0] - x[1]));
        data.push(x, rng.uniform() < p);
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.below(i + 1));
    }
    let mut shuffled = Dataset::empty();
    for i in order {
        shuffled.push(data.points()[i].clone(), data.labels()[i]);
    }
    let u: Vec<Vec<f64>> = (0..4)
        .flat_map(|i| (0..4).map(move |j| vec![i as f64 / 3.0, j as f64 / 3.0]))
        .collect();
    let q0 = init_posterior(u, KernelParams::new(0.1, 1e-6).unwrap()).unwrap();
    let opts = FitOptions::default();
    let gh = GaussHermite::default();
    let a = q0.elbo(&data, &gh).unwrap();
    let b = q0.elbo(&shuffled, &gh).unwrap();
    if (a - b).abs() >= 1e-10 {
        return Err(format!("ELBO changed by {}", (a - b).abs()));
    }
    let fa = fit(&q0, &data, &opts).unwrap();
    let fb = fit(&q0, &shuffled, &opts).unwrap();
    if fa.posterior != fb.posterior {
        return Err("fit output depends on row order".into());
    }
    Ok(format!("ELBO difference {:.1e}, fits identical", (a - b).abs()))
}

/// Every check, in a fixed order.
pub fn all() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("ELBO below brute-force log p(y)", elbo_below_marginal_likelihood as CheckFn),
        ("kernel gradient vs finite differences", kernel_gradient_matches_fd),
        ("predictive-mean gradient vs finite differences", mean_gradient_matches_fd),
        ("probabilities in [0,1], variances in [0,0.25]", probabilities_and_variances_bounded),
        ("predictive moments vs dense integration", predictive_moments_match_dense_integration),
        ("pure-death mean extinction time", pure_death_extinction_time),
        ("prior recovery", prior_recovery),
        ("permutation invariance", permutation_invariance),
    ]
}
