//! Projected Levenberg–Marquardt.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

type ResidualFn<'a> = Box<dyn Fn(&[f64], &mut [f64]) + 'a>;
type JacobianFn<'a> = Box<dyn Fn(&[f64], &mut DMatrix<f64>) + 'a>;

/// A weighted nonlinear least-squares problem: minimise
/// ½ Σ (w_i r_i(p))² subject to `lower ≤ p ≤ upper`.
pub struct FitProblem<'a> {
    residuals: ResidualFn<'a>,
    jacobian: Option<JacobianFn<'a>>,
    n_residuals: usize,
    pub initial: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Per-residual weights 1/σ_i. With `None`, the covariance is scaled by
    /// the reduced χ².
    pub weights: Option<Vec<f64>>,
    pub max_iterations: usize,
    pub gradient_tol: f64,
}

impl<'a> FitProblem<'a> {
    pub fn new(
        n_residuals: usize,
        initial: Vec<f64>,
        residuals: impl Fn(&[f64], &mut [f64]) + 'a,
    ) -> Self {
        let n = initial.len();
        FitProblem {
            residuals: Box::new(residuals),
            jacobian: None,
            n_residuals,
            initial,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            weights: None,
            max_iterations: 500,
            gradient_tol: 1e-10,
        }
    }

    /// Analytic Jacobian of the unweighted residuals (rows = residuals).
    pub fn with_jacobian(mut self, jac: impl Fn(&[f64], &mut DMatrix<f64>) + 'a) -> Self {
        self.jacobian = Some(Box::new(jac));
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn n_params(&self) -> usize {
        self.initial.len()
    }

    pub fn n_residuals(&self) -> usize {
        self.n_residuals
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_params();
        if n == 0 {
            return Err(Error::InvalidInput("fit has no parameters".into()));
        }
        if self.n_residuals < n {
            return Err(Error::InvalidInput(format!(
                "{} residuals cannot constrain {} parameters",
                self.n_residuals, n
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidInput("bounds length mismatch".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidInput("bounds are not ordered".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.n_residuals || w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidInput("weights must be finite, non-negative, one per residual".into()));
            }
        }
        Ok(())
    }

    fn project(&self, p: &mut [f64]) {
        for (j, v) in p.iter_mut().enumerate() {
            *v = v.clamp(self.lower[j], self.upper[j]);
        }
    }

    fn weighted_residuals(&self, p: &[f64], out: &mut DVector<f64>) {
        (self.residuals)(p, out.as_mut_slice());
        if let Some(w) = &self.weights {
            for (r, w) in out.iter_mut().zip(w) {
                *r *= w;
            }
        }
    }

    /// Public evaluation of the weighted residual vector.
    pub fn residual_vector(&self, p: &[f64]) -> Vec<f64> {
        let mut r = DVector::zeros(self.n_residuals);
        self.weighted_residuals(p, &mut r);
        r.as_slice().to_vec()
    }

    fn weighted_jacobian(&self, p: &[f64], r0: &DVector<f64>, jac: &mut DMatrix<f64>) {
        match &self.jacobian {
            Some(f) => {
                f(p, jac);
                if let Some(w) = &self.weights {
                    for (i, wi) in w.iter().enumerate() {
                        jac.row_mut(i).scale_mut(*wi);
                    }
                }
            }
            None => {
                // Central differences, one-sided at an active bound.
                let mut rp = DVector::zeros(self.n_residuals);
                let mut rm = DVector::zeros(self.n_residuals);
                let mut q = p.to_vec();
                for j in 0..p.len() {
                    let h = 1e-6 * p[j].abs().max(1e-8);
                    let up = (p[j] + h).min(self.upper[j]);
                    let dn = (p[j] - h).max(self.lower[j]);
                    q[j] = up;
                    self.weighted_residuals(&q, &mut rp);
                    if dn < p[j] {
                        q[j] = dn;
                        self.weighted_residuals(&q, &mut rm);
                    } else {
                        rm.copy_from(r0);
                    }
                    q[j] = p[j];
                    let span = up - dn;
                    if span > 0.0 {
                        jac.set_column(j, &((&rp - &rm) / span));
                    } else {
                        jac.column_mut(j).fill(0.0);
                    }
                }
            }
        }
    }
}

/// Outcome of [`least_squares`].
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// 1σ uncertainties from the local curvature.
    pub sigma: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Σ (w r)².
    pub chi2: f64,
    pub dof: usize,
    pub chi2_dof: f64,
    pub converged: bool,
    pub iterations: usize,
    /// The normal matrix was singular (or nearly) at some point.
    pub singular_curvature: bool,
    /// Accepted-iteration cost history (½ χ²), non-increasing.
    pub cost_history: Vec<f64>,
}

impl FitResult {
    pub fn relative_sigma(&self, j: usize) -> f64 {
        self.sigma[j] / self.params[j].abs()
    }
}

fn cost_of(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

/// Minimises the problem with a damped Gauss–Newton (Levenberg–Marquardt)
/// iteration. Steps are projected onto the bounds and only accepted when the
/// cost does not increase.
pub fn least_squares(problem: &FitProblem<'_>) -> Result<FitResult> {
    problem.validate()?;
    let n = problem.n_params();
    let m = problem.n_residuals;
    let mut p = problem.initial.clone();
    problem.project(&mut p);

    let mut r = DVector::zeros(m);
    problem.weighted_residuals(&p, &mut r);
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("initial residuals are not finite".into()));
    }
    let mut cost = cost_of(&r);
    let mut history = vec![cost];
    let mut jac = DMatrix::zeros(m, n);
    problem.weighted_jacobian(&p, &r, &mut jac);

    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut converged = false;
    let mut singular = false;
    let mut iterations = 0;
    let mut r_new = DVector::zeros(m);

    while iterations < problem.max_iterations {
        iterations += 1;
        let grad = jac.transpose() * &r;
        if cost == 0.0 || projected_gradient_small(&jac, &r, &grad, &p, problem) {
            converged = true;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for j in 0..n {
                let d = jtj[(j, j)].max(1e-300);
                a[(j, j)] += lambda * d;
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    singular = true;
                    lambda *= nu;
                    nu *= 2.0;
                    continue;
                }
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            problem.project(&mut trial);
            let actual_step = DVector::from_iterator(n, trial.iter().zip(&p).map(|(a, b)| a - b));
            problem.weighted_residuals(&trial, &mut r_new);
            let cost_new = if r_new.iter().all(|x| x.is_finite()) { cost_of(&r_new) } else { f64::INFINITY };
            let predicted = -(grad.dot(&actual_step) + 0.5 * (&jac * &actual_step).norm_squared());
            if cost_new <= cost && actual_step.amax() > 0.0 {
                let rho = if predicted > 0.0 { (cost - cost_new) / predicted } else { 1.0 };
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                let small_step = actual_step
                    .iter()
                    .zip(&p)
                    .all(|(d, x)| d.abs() <= 1e-14 * x.abs().max(1e-300));
                let small_gain = cost - cost_new <= 1e-16 * cost;
                p = trial;
                std::mem::swap(&mut r, &mut r_new);
                cost = cost_new;
                history.push(cost);
                problem.weighted_jacobian(&p, &r, &mut jac);
                accepted = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e300 {
                break;
            }
        }
        if !accepted {
            // No descent direction left: a (possibly constrained) stationary point.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let dof = m.saturating_sub(n).max(1);
    let chi2 = 2.0 * cost;
    let chi2_dof = chi2 / dof as f64;
    let jtj = jac.transpose() * &jac;
    let (mut covariance, cov_singular) = invert_normal_matrix(&jtj);
    singular |= cov_singular;
    if problem.weights.is_none() {
        covariance *= chi2_dof;
    }
    let sigma = (0..n).map(|j| covariance[(j, j)].max(0.0).sqrt()).collect();
    Ok(FitResult {
        params: p,
        sigma,
        covariance,
        chi2,
        dof,
        chi2_dof,
        converged,
        iterations,
        singular_curvature: singular,
        cost_history: history,
    })
}

fn projected_gradient_small(
    jac: &DMatrix<f64>,
    r: &DVector<f64>,
    grad: &DVector<f64>,
    p: &[f64],
    problem: &FitProblem<'_>,
) -> bool {
    let rn = r.norm();
    (0..p.len()).all(|j| {
        let g = grad[j];
        // Gradient pointing out of the feasible box at an active bound is fine.
        if (p[j] <= problem.lower[j] && g > 0.0) || (p[j] >= problem.upper[j] && g < 0.0) {
            return true;
        }
        let cn = jac.column(j).norm();
        cn == 0.0 || g.abs() <= problem.gradient_tol * cn * rn
    })
}

/// Inverse of JᵀJ via a symmetric eigendecomposition; near-null directions get
/// infinite variance.
fn invert_normal_matrix(jtj: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let n = jtj.nrows();
    // Scale to unit diagonal for conditioning.
    let d: Vec<f64> = (0..n).map(|j| jtj[(j, j)].max(0.0).sqrt()).collect();
    let mut scaled = jtj.clone();
    for i in 0..n {
        for j in 0..n {
            let s = d[i] * d[j];
            scaled[(i, j)] = if s > 0.0 { jtj[(i, j)] / s } else { 0.0 };
        }
    }
    let eig = scaled.symmetric_eigen();
    let max_ev = eig.eigenvalues.amax();
    let mut singular = false;
    let mut inv = DMatrix::zeros(n, n);
    for k in 0..n {
        let ev = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k);
        let w = if ev > 1e-14 * max_ev && ev > 0.0 {
            1.0 / ev
        } else {
            singular = true;
            f64::INFINITY
        };
        for i in 0..n {
            for j in 0..n {
                let c = v[i] * v[j];
                if c != 0.0 {
                    inv[(i, j)] += w * c;
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let s = d[i] * d[j];
            inv[(i, j)] = if s > 0.0 { inv[(i, j)] / s } else { f64::INFINITY };
        }
    }
    (inv, singular)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_fit() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v).collect();
        let prob = FitProblem::new(x.len(), vec![1.0], |p, out| {
            for i in 0..x.len() {
                out[i] = p[0] * x[i] - y[i];
            }
        });
        let fit = least_squares(&prob).unwrap();
        assert!((fit.params[0] - 2.5).abs() < 1e-12);
        assert!(fit.chi2 < 1e-20);
        assert!(fit.converged);
    }

    #[test]
    fn quadratic_bowl() {
        // Residuals of a separable bowl with minimum at (3, −1, 0.5).
        let target = [3.0, -1.0, 0.5];
        let prob = FitProblem::new(3, vec![-20.0, 40.0, 7.0], |p, out| {
            for j in 0..3 {
                out[j] = (j as f64 + 1.0) * (p[j] - target[j]);
            }
        });
        let fit = least_squares(&prob).unwrap();
        for j in 0..3 {
            assert!((fit.params[j] - target[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn rosenbrock_monotone_cost() {
        let prob = FitProblem::new(2, vec![-1.2, 1.0], |p, out| {
            out[0] = 10.0 * (p[1] - p[0] * p[0]);
            out[1] = 1.0 - p[0];
        });
        let fit = least_squares(&prob).unwrap();
        assert!((fit.params[0] - 1.0).abs() < 1e-8 && (fit.params[1] - 1.0).abs() < 1e-8);
        assert!(fit.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bounds_are_respected() {
        let prob = FitProblem::new(1, vec![5.0], |p, out| out[0] = p[0] + 2.0)
            .with_bounds(vec![0.0], vec![10.0]);
        let fit = least_squares(&prob).unwrap();
        assert_eq!(fit.params[0], 0.0);
    }

    #[test]
    fn rejects_underdetermined() {
        let prob = FitProblem::new(1, vec![1.0, 2.0], |_, out| out[0] = 0.0);
        assert!(matches!(least_squares(&prob), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn flags_singular_curvature() {
        // p0 and p1 enter only through their sum.
        let prob = FitProblem::new(3, vec![1.0, 1.0], |p, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = (p[0] + p[1]) * i as f64 - 3.0 * i as f64;
            }
        });
        let fit = least_squares(&prob).unwrap();
        assert!(fit.singular_curvature);
        assert!((fit.params[0] + fit.params[1] - 3.0).abs() < 1e-9);
    }
}
