//! Online updates of a variational posterior.
//!
//! Old data enter only through the previous approximation `q_old(a)` over
//! the old inducing values `a`. The new approximation over inducing values
//! `b` maximizes
//!
//! `Σ E_q[log p(yᵢ | gᵢ)] − KL(q(b) ‖ p(b)) + E_q[log q_old(a) − log p(a)]`
//!
//! which equals the batch ELBO when `q_old` is the prior. In whitened
//! coordinates `a = L_a w_a`, `b = L_b w_b` the last term is a quadratic in
//! `(m, S)` of `q(w_b)`, so the same natural-gradient optimizer applies.

use alloc::vec::Vec;

use crate::gp::{cross_kernel, kl_gaussians, GaussHermite, GaussianDist};
use crate::linalg::{dot, Matrix};
use crate::svgp::{
    optimize, Dataset, FitOptions, FitOutcome, GaussianTerm, Problem, SvgpError,
    VariationalPosterior,
};

/// Streaming objective of `q_new` given the previous posterior `q_old`.
///
/// The old-posterior term is evaluated as `KL(q_a ‖ p(a)) − KL(q_a ‖ q_old)`,
/// where `q_a` is the marginal of `q_new` at the old inducing points.
pub fn streaming_bound(
    q_new: &VariationalPosterior,
    q_old: &VariationalPosterior,
    data: &Dataset,
    gh: &GaussHermite,
) -> Result<f64, SvgpError> {
    check_kernels(q_new, q_old)?;
    let q_a = if q_new.inducing() == q_old.inducing() {
        q_new.dist()
    } else {
        q_new.joint_marginal(q_old.inducing())?
    };
    // the prior covariance is rebuilt through the same factor as `q_old`
    // so the two KL terms agree bit for bit when `q_old` is the prior
    let l_old = q_old.kmm_chol().lower();
    let prior = GaussianDist {
        mean: alloc::vec![0.0; q_old.num_inducing()],
        covariance: l_old.matmul(&Matrix::identity(l_old.rows())).gram(),
    };
    let correction = kl_gaussians(&q_a, &prior)? - kl_gaussians(&q_a, &q_old.dist())?;
    Ok(q_new.elbo(data, gh)? + correction)
}

/// Folds `data` into `q_old`. With `new_inducing == None` the inducing set is
/// kept; otherwise the result lives on the given points.
pub fn streaming_update(
    q_old: &VariationalPosterior,
    data: &Dataset,
    new_inducing: Option<Vec<Vec<f64>>>,
    opts: &FitOptions,
) -> Result<FitOutcome, SvgpError> {
    opts.validate()?;
    let gh = GaussHermite::new(opts.quadrature_nodes);
    let v = new_inducing.unwrap_or_else(|| q_old.inducing().to_vec());
    let same = v.as_slice() == q_old.inducing();
    if same && data.is_empty() {
        let bound = streaming_bound(q_old, q_old, data, &gh)?;
        return Ok(FitOutcome {
            posterior: q_old.clone(),
            trace: alloc::vec![bound],
            iterations: 0,
            converged: true,
        });
    }

    let q_init = if same {
        q_old.clone()
    } else {
        let joint = q_old.joint_marginal(&v)?;
        VariationalPosterior::from_moments(v, *q_old.kernel(), &joint.mean, &joint.covariance)?
    };
    let term = old_posterior_term(q_old, &q_init, same);
    let problem = Problem::new(
        q_init.inducing(),
        q_init.kmm_chol(),
        q_init.kernel(),
        data,
        &gh,
        Some(term),
    )?;
    optimize(&problem, &q_init, opts)
}

/// Folds `data` into `q_old`, moving the posterior onto the inducing set `v`.
pub fn update(
    q_old: &VariationalPosterior,
    data: &Dataset,
    v: Vec<Vec<f64>>,
    opts: &FitOptions,
) -> Result<VariationalPosterior, SvgpError> {
    streaming_update(q_old, data, Some(v), opts).map(|o| o.posterior)
}

fn check_kernels(a: &VariationalPosterior, b: &VariationalPosterior) -> Result<(), SvgpError> {
    if a.kernel() != b.kernel() {
        return Err(SvgpError::InvalidOptions(
            "streaming updates need the same kernel hyperparameters",
        ));
    }
    if a.input_dim() != b.input_dim() {
        return Err(SvgpError::DimensionMismatch {
            expected: b.input_dim(),
            found: a.input_dim(),
        });
    }
    Ok(())
}

/// `E_q[log q_old(w_a) − log p(w_a)]` as a quadratic in the whitened new
/// posterior. `w_a | w_b ~ N(D w_b, I − D Dᵀ)` with `D = L_a⁻¹ K_ab L_b⁻ᵀ`.
fn old_posterior_term(
    q_old: &VariationalPosterior,
    q_new: &VariationalPosterior,
    same: bool,
) -> GaussianTerm {
    let ma = q_old.num_inducing();
    let (d, r) = if same {
        (Matrix::identity(ma), None)
    } else {
        let kab = cross_kernel(q_old.inducing(), q_new.inducing(), q_old.kernel());
        let x = q_old.kmm_chol().solve_lower_matrix(&kab);
        let d = q_new.kmm_chol().solve_lower_matrix(&x.transpose()).transpose();
        let mut r = Matrix::identity(ma);
        r.add_scaled(-1.0, &d.matmul(&d.transpose()));
        (d, Some(r))
    };

    let l_old = q_old.whitened_scale();
    let winv = crate::linalg::Cholesky::from_lower(l_old.clone())
        .expect("whitened scale has a positive diagonal")
        .lower_inverse();
    let s_inv = winv.transpose().matmul(&winv);
    let mut m = s_inv.clone();
    m.add_scaled(-1.0, &Matrix::identity(ma));

    let dt = d.transpose();
    let mut b = dt.matmul(&m).matmul(&d);
    b.symmetrize();
    let s_inv_mean = s_inv.matvec(q_old.whitened_mean());
    let c = dt.matvec(&s_inv_mean);
    let log_det_old: f64 = 2.0 * (0..ma).map(|i| libm::log(l_old[(i, i)])).sum::<f64>();
    let tr_mr = match &r {
        Some(r) => m
            .as_slice()
            .iter()
            .zip(r.as_slice())
            .map(|(a, b)| a * b)
            .sum(),
        None => 0.0,
    };
    let constant =
        -0.5 * tr_mr - 0.5 * dot(q_old.whitened_mean(), &s_inv_mean) - 0.5 * log_det_old;
    GaussianTerm { b, c, constant }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelParams;
    use crate::rng::RngStream;
    use crate::special::norm_cdf;
    use crate::svgp::{fit, init_posterior};

    fn kp() -> KernelParams {
        KernelParams::new(0.05, 1e-6).unwrap()
    }

    fn line(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| alloc::vec![i as f64 / (n - 1) as f64]).collect()
    }

    fn data(seed: u64, n: usize) -> Dataset {
        let mut rng = RngStream::new(seed, 0).generator();
        let mut d = Dataset::empty();
        for _ in 0..n {
            let x = rng.uniform();
            let p = norm_cdf(4.0 * (x - 0.4));
            d.push(alloc::vec![x], rng.uniform() < p);
        }
        d
    }

    #[test]
    fn bound_equals_elbo_when_old_is_prior() {
        let u = line(7);
        let prior = VariationalPosterior::prior(u.clone(), kp()).unwrap();
        let d = data(1, 30);
        let gh = GaussHermite::default();
        let q = fit(&init_posterior(u, kp()).unwrap(), &d, &FitOptions::default())
            .unwrap()
            .posterior;
        let a = streaming_bound(&q, &prior, &d, &gh).unwrap();
        let b = q.elbo(&d, &gh).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn quadratic_term_matches_literal_bound() {
        let gh = GaussHermite::default();
        let d1 = data(2, 25);
        let d2 = data(3, 15);
        let opts = FitOptions::default();
        let q_old = fit(&init_posterior(line(6), kp()).unwrap(), &d1, &opts)
            .unwrap()
            .posterior;
        for v in [line(6), line(9)] {
            let same = v.as_slice() == q_old.inducing();
            let joint = q_old.joint_marginal(&v).unwrap();
            let q_new = if same {
                q_old.clone()
            } else {
                VariationalPosterior::from_moments(v, kp(), &joint.mean, &joint.covariance)
                    .unwrap()
            };
            let term = old_posterior_term(&q_old, &q_new, same);
            let problem = Problem::new(
                q_new.inducing(),
                q_new.kmm_chol(),
                q_new.kernel(),
                &d2,
                &gh,
                Some(term),
            )
            .unwrap();
            let a = problem.value_at(&q_new);
            let b = streaming_bound(&q_new, &q_old, &d2, &gh).unwrap();
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn empty_update_keeps_posterior() {
        let q_old = fit(
            &init_posterior(line(5), kp()).unwrap(),
            &data(4, 20),
            &FitOptions::default(),
        )
        .unwrap()
        .posterior;
        let out = streaming_update(&q_old, &Dataset::empty(), None, &FitOptions::default())
            .unwrap();
        assert_eq!(out.posterior, q_old);
    }

    #[test]
    fn two_batches_track_batch_fit() {
        let opts = FitOptions::default();
        let u = line(10);
        let d1 = data(5, 20);
        let d2 = data(6, 20);
        let mut all = d1.clone();
        all.extend(&d2);
        let q0 = init_posterior(u, kp()).unwrap();
        let batch = fit(&q0, &all, &opts).unwrap().posterior;
        let q1 = fit(&q0, &d1, &opts).unwrap().posterior;
        let out = streaming_update(&q1, &d2, None, &opts).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-6 * w[0].abs().max(1.0));
        }
        let xs = line(41);
        let pa = batch.predict_probability(&xs).unwrap();
        let pb = out.posterior.predict_probability(&xs).unwrap();
        let mad: f64 = pa.iter().zip(&pb).map(|(a, b)| (a - b).abs()).sum::<f64>() / 41.0;
        assert!(mad <= 0.05, "{mad}");
    }

    #[test]
    fn repeated_successes_raise_probability() {
        let opts = FitOptions::default();
        let x = alloc::vec![0.5];
        let mut q = init_posterior(line(5), kp()).unwrap();
        let mut last = q.predict_probability(std::slice::from_ref(&x)).unwrap()[0];
        for _ in 0..3 {
            let mut d = Dataset::empty();
            d.push(x.clone(), true);
            q = update(&q, &d, line(5), &opts).unwrap();
            let p = q.predict_probability(std::slice::from_ref(&x)).unwrap()[0];
            assert!(p >= last - 1e-9, "{p} < {last}");
            last = p;
        }
        assert!(last > 0.5);
    }

    #[test]
    fn batch_order_barely_matters() {
        let opts = FitOptions::default();
        let q0 = init_posterior(line(10), kp()).unwrap();
        let d1 = data(9, 20);
        let d2 = data(10, 20);
        let a = update(&fit(&q0, &d1, &opts).unwrap().posterior, &d2, line(10), &opts).unwrap();
        let b = update(&fit(&q0, &d2, &opts).unwrap().posterior, &d1, line(10), &opts).unwrap();
        let xs = line(41);
        let pa = a.predict_probability(&xs).unwrap();
        let pb = b.predict_probability(&xs).unwrap();
        let mad: f64 = pa.iter().zip(&pb).map(|(a, b)| (a - b).abs()).sum::<f64>() / 41.0;
        assert!(mad < 0.05, "{mad}");
    }

    #[test]
    fn streamed_bound_close_to_batch_optimum() {
        let opts = FitOptions::default();
        let gh = GaussHermite::default();
        let q0 = init_posterior(line(10), kp()).unwrap();
        let d1 = data(11, 20);
        let d2 = data(12, 20);
        let mut all = d1.clone();
        all.extend(&d2);
        let batch = fit(&q0, &all, &opts).unwrap().posterior;
        let q1 = fit(&q0, &d1, &opts).unwrap().posterior;
        let q2 = update(&q1, &d2, line(10), &opts).unwrap();
        // F(q2) approximates log p(y2 | y1); add the first-batch ELBO to compare
        let streamed = streaming_bound(&q2, &q1, &d2, &gh).unwrap() + q1.elbo(&d1, &gh).unwrap();
        let joint = batch.elbo(&all, &gh).unwrap();
        assert!((streamed - joint).abs() < 0.5, "{streamed} vs {joint}");
    }

    #[test]
    fn update_can_move_inducing_points() {
        let opts = FitOptions::default();
        let q1 = fit(&init_posterior(line(6), kp()).unwrap(), &data(7, 20), &opts)
            .unwrap()
            .posterior;
        let out = streaming_update(&q1, &data(8, 20), Some(line(8)), &opts).unwrap();
        assert_eq!(out.posterior.num_inducing(), 8);
        let p = out.posterior.predict_probability(&line(11)).unwrap();
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
