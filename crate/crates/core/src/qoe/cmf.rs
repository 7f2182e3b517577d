//! Collective matrix factorization of a partially observed user x service
//! QoE matrix together with user- and service-attribute matrices.
//!
//! The QoE matrix is approximated as `U V^T`; the side matrices share the
//! same latent rows through their own loadings, `Xu ~ U A^T` and
//! `Xs ~ V B^T`. Fitting alternates exact ridge solves of U, V, A and B.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{keyed_rng, Stream};

/// Observed QoE scores in `[0, 1]`; unobserved entries are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct QoeMatrix {
    pub scores: DMatrix<f64>,
    pub observed: DMatrix<bool>,
}

impl QoeMatrix {
    pub fn n_users(&self) -> usize {
        self.scores.nrows()
    }

    pub fn n_services(&self) -> usize {
        self.scores.ncols()
    }

    pub fn n_observed(&self) -> usize {
        self.observed.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmfParams {
    pub rank: usize,
    pub beta_y: f64,
    pub beta_u: f64,
    pub beta_s: f64,
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once the relative objective decrease drops below this.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for CmfParams {
    fn default() -> Self {
        Self {
            rank: 3,
            beta_y: 1.0,
            beta_u: 0.1,
            beta_s: 0.1,
            lambda: 0.1,
            max_iter: 500,
            rel_tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmfModel {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub params: CmfParams,
    /// Objective after initialization and after every accepted sweep.
    pub trace: Vec<f64>,
}

impl CmfModel {
    pub fn rank(&self) -> usize {
        self.params.rank
    }

    pub fn n_users(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_services(&self) -> usize {
        self.v.nrows()
    }

    /// Unclipped `U_u . V_s`.
    pub fn raw_score(&self, user: usize, service: usize) -> f64 {
        self.u.row(user).dot(&self.v.row(service))
    }
}

fn check_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-0.01..=0.01))
}

/// Solves the SPD system `g x = rhs`, falling back to a pseudo-inverse
/// when `g` is singular (only possible with `lambda = 0`).
fn solve_spd(g: DMatrix<f64>, rhs: DVector<f64>) -> DVector<f64> {
    match g.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => g
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(rhs.len())),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn objective(model_u: &DMatrix<f64>, model_v: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>,
                 y: &QoeMatrix, xu: &DMatrix<f64>, xs: &DMatrix<f64>, p: &CmfParams) -> f64 {
    let pred = model_u * model_v.transpose();
    let mut fit = 0.0;
    for ((&m, &obs), &pr) in y.observed.iter().zip(y.scores.iter()).zip(pred.iter()) {
        if m {
            fit += (obs - pr) * (obs - pr);
        }
    }
    let side_u = if xu.ncols() > 0 { (xu - model_u * a.transpose()).norm_squared() } else { 0.0 };
    let side_s = if xs.ncols() > 0 { (xs - model_v * b.transpose()).norm_squared() } else { 0.0 };
    let reg = model_u.norm_squared() + model_v.norm_squared() + a.norm_squared() + b.norm_squared();
    p.beta_y * fit + p.beta_u * side_u + p.beta_s * side_s + p.lambda * reg
}

/// Ridge update of every row of `target` (the latent rows of one side of
/// the QoE matrix). `partner` holds the opposite side's latent rows;
/// `observed(i, j)` tells whether entry `(i, j)` of the oriented score
/// matrix exists.
#[allow(clippy::too_many_arguments)]
fn update_latent(
    target: &mut DMatrix<f64>,
    partner: &DMatrix<f64>,
    scores: &DMatrix<f64>,
    observed: &DMatrix<bool>,
    side: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
    beta_y: f64,
    beta_side: f64,
    lambda: f64,
) {
    let k = target.ncols();
    let side_gram = if side.ncols() > 0 {
        loadings.transpose() * loadings * beta_side
    } else {
        DMatrix::zeros(k, k)
    };
    for i in 0..target.nrows() {
        let mut g = &side_gram + DMatrix::identity(k, k) * lambda;
        let mut rhs = DVector::zeros(k);
        for j in 0..partner.nrows() {
            if observed[(i, j)] {
                let pj = partner.row(j).transpose();
                g += &pj * pj.transpose() * beta_y;
                rhs += pj * (beta_y * scores[(i, j)]);
            }
        }
        if side.ncols() > 0 {
            rhs += loadings.transpose() * side.row(i).transpose() * beta_side;
        }
        let x = solve_spd(g, rhs);
        target.set_row(i, &x.transpose());
    }
}

/// Ridge update of side loadings: `min beta ||X - L W^T||^2 + lambda ||W||^2`.
fn update_loadings(loadings: &mut DMatrix<f64>, latent: &DMatrix<f64>, side: &DMatrix<f64>, beta: f64, lambda: f64) {
    let k = latent.ncols();
    let g = latent.transpose() * latent * beta + DMatrix::identity(k, k) * lambda;
    for c in 0..side.ncols() {
        let rhs = latent.transpose() * side.column(c) * beta;
        let x = solve_spd(g.clone(), rhs);
        loadings.set_row(c, &x.transpose());
    }
}

pub fn cmf_fit(y: &QoeMatrix, xu: &DMatrix<f64>, xs: &DMatrix<f64>, params: &CmfParams) -> Result<CmfModel> {
    let (nu, ns) = (y.n_users(), y.n_services());
    if y.observed.shape() != (nu, ns) {
        return Err(Error::InvalidInput("observation mask shape differs from QoE matrix".into()));
    }
    if xu.nrows() != nu || xs.nrows() != ns {
        return Err(Error::InvalidInput(format!(
            "side matrices have {} / {} rows, expected {nu} / {ns}",
            xu.nrows(),
            xs.nrows()
        )));
    }
    if params.rank == 0 || params.rank >= nu.min(ns) {
        return Err(Error::InvalidInput(format!(
            "rank {} must satisfy 1 <= k < min({nu}, {ns})",
            params.rank
        )));
    }
    for (w, name) in [
        (params.beta_y, "beta_y"),
        (params.beta_u, "beta_u"),
        (params.beta_s, "beta_s"),
        (params.lambda, "lambda"),
    ] {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidInput(format!("{name} must be a finite non-negative weight")));
        }
    }
    let masked_scores = y.scores.zip_map(&y.observed, |s, m| if m { s } else { 0.0 });
    check_finite(&masked_scores, "QoE matrix")?;
    check_finite(xu, "user attribute matrix")?;
    check_finite(xs, "service attribute matrix")?;
    if y.n_observed() == 0 {
        return Err(Error::NoObservations);
    }

    let k = params.rank;
    let mut rng = keyed_rng(params.seed, Stream::CmfInit, 0, 0);
    let mut u = random_matrix(&mut rng, nu, k);
    let mut v = random_matrix(&mut rng, ns, k);
    let mut a = random_matrix(&mut rng, xu.ncols(), k);
    let mut b = random_matrix(&mut rng, xs.ncols(), k);

    let scores_t = masked_scores.transpose();
    let observed_t = y.observed.transpose();
    let mut prev = objective(&u, &v, &a, &b, y, xu, xs, params);
    let mut trace = vec![prev];

    for _ in 0..params.max_iter {
        let snapshot = (u.clone(), v.clone(), a.clone(), b.clone());
        update_latent(&mut u, &v, &masked_scores, &y.observed, xu, &a, params.beta_y, params.beta_u, params.lambda);
        update_latent(&mut v, &u, &scores_t, &observed_t, xs, &b, params.beta_y, params.beta_s, params.lambda);
        if xu.ncols() > 0 {
            update_loadings(&mut a, &u, xu, params.beta_u, params.lambda);
        }
        if xs.ncols() > 0 {
            update_loadings(&mut b, &v, xs, params.beta_s, params.lambda);
        }
        let cur = objective(&u, &v, &a, &b, y, xu, xs, params);
        if !(cur <= prev) {
            // Rounding noise at the optimum; keep the last accepted state.
            (u, v, a, b) = snapshot;
            break;
        }
        trace.push(cur);
        let converged = prev <= 0.0 || (prev - cur) / prev < params.rel_tol;
        prev = cur;
        if converged {
            break;
        }
    }

    Ok(CmfModel {
        u,
        v,
        a,
        b,
        params: params.clone(),
        trace,
    })
}

/// Predicted QoE of `user` for `service`, clipped to `[0, 1]`.
pub fn cmf_predict(model: &CmfModel, user: usize, service: usize) -> Result<f64> {
    if user >= model.n_users() {
        return Err(Error::UnknownId { kind: "user", id: user });
    }
    if service >= model.n_services() {
        return Err(Error::UnknownId {
            kind: "service",
            id: service,
        });
    }
    Ok(model.raw_score(user, service).clamp(0.0, 1.0))
}
