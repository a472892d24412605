//! Primal active-set method for small convex QPs with box bounds and
//! monotone linear inequalities.
//!
//! Problem form: minimize `1/2 u'Hu + c'u + k` subject to `lb <= u <= ub`
//! and `G u <= h`, with `H` positive semidefinite and every entry of `G`
//! nonnegative. Nonnegative rows make the lower box corner the easiest
//! point to satisfy the inequalities, so it doubles as the feasibility
//! certificate and the starting iterate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::SolveError;

const ZERO_STEP: f64 = 1e-11;
const FIXED_WIDTH: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadProgram {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
    /// Inequality rows `G` of `G u <= h`.
    pub ineq: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl QuadProgram {
    pub fn new(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        constant: f64,
        ineq: DMatrix<f64>,
        rhs: DVector<f64>,
    ) -> Result<Self, SolveError> {
        let n = linear.len();
        if hessian.shape() != (n, n) {
            return Err(SolveError::Invalid(format!(
                "hessian is {:?}, expected {n}x{n}",
                hessian.shape()
            )));
        }
        if ineq.ncols() != n || ineq.nrows() != rhs.len() {
            return Err(SolveError::Invalid(
                "inequality block has wrong shape".into(),
            ));
        }
        if ineq.iter().any(|&g| g < 0.0 || !g.is_finite()) {
            return Err(SolveError::Invalid(
                "inequality coefficients must be finite and nonnegative".into(),
            ));
        }
        let asym = (&hessian - hessian.transpose()).amax();
        if asym > 1e-9 * (1.0 + hessian.amax()) {
            return Err(SolveError::Invalid("hessian is not symmetric".into()));
        }
        Ok(QuadProgram {
            hessian,
            linear,
            constant,
            ineq,
            rhs,
        })
    }

    /// Box-only program.
    pub fn unconstrained(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        constant: f64,
    ) -> Result<Self, SolveError> {
        let n = linear.len();
        Self::new(
            hessian,
            linear,
            constant,
            DMatrix::zeros(0, n),
            DVector::zeros(0),
        )
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        let u = DVector::from_column_slice(u);
        0.5 * u.dot(&(&self.hessian * &u)) + self.linear.dot(&u) + self.constant
    }

    /// Largest violation of `G u <= h` (0 when feasible).
    pub fn violation(&self, u: &[f64]) -> f64 {
        let u = DVector::from_column_slice(u);
        let slack = &self.rhs - &self.ineq * u;
        slack.iter().fold(0.0_f64, |m, &s| m.max(-s))
    }

    /// Whether the lower corner `lb` satisfies the inequalities (within `tol`).
    pub fn corner_feasible(&self, lb: &[f64], tol: f64) -> bool {
        self.violation(lb) <= tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Max of stationarity, primal, dual and complementarity residuals.
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Final working set; reusable as a warm start for a nearby box.
    pub active: Vec<ActiveConstraint>,
}

/// A constraint of the full (unreduced) problem held at equality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActiveConstraint {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

/// One constraint of the reduced problem, `a'u <= b`.
enum Row {
    General(usize),
    Lower(usize),
    Upper(usize),
}

struct Reduced<'a> {
    qp: &'a QuadProgram,
    free: Vec<usize>,
    h: DMatrix<f64>,
    c: DVector<f64>,
    g: DMatrix<f64>,
    rhs: DVector<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl Reduced<'_> {
    fn n(&self) -> usize {
        self.free.len()
    }

    fn n_rows(&self) -> usize {
        self.g.nrows() + 2 * self.n()
    }

    fn row(&self, i: usize) -> Row {
        let m = self.g.nrows();
        let n = self.n();
        if i < m {
            Row::General(i)
        } else if i < m + n {
            Row::Lower(i - m)
        } else {
            Row::Upper(i - m - n)
        }
    }

    fn normal(&self, i: usize) -> DVector<f64> {
        match self.row(i) {
            Row::General(r) => self.g.row(r).transpose(),
            Row::Lower(j) => {
                let mut a = DVector::zeros(self.n());
                a[j] = -1.0;
                a
            }
            Row::Upper(j) => {
                let mut a = DVector::zeros(self.n());
                a[j] = 1.0;
                a
            }
        }
    }

    fn dot(&self, i: usize, v: &DVector<f64>) -> f64 {
        match self.row(i) {
            Row::General(r) => (0..self.n()).map(|k| self.g[(r, k)] * v[k]).sum(),
            Row::Lower(j) => -v[j],
            Row::Upper(j) => v[j],
        }
    }

    fn dot_slice(&self, i: usize, v: &[f64]) -> f64 {
        match self.row(i) {
            Row::General(r) => (0..self.n()).map(|k| self.g[(r, k)] * v[k]).sum(),
            Row::Lower(j) => -v[j],
            Row::Upper(j) => v[j],
        }
    }

    fn bound(&self, i: usize) -> f64 {
        match self.row(i) {
            Row::General(r) => self.rhs[r],
            Row::Lower(j) => -self.lb[j],
            Row::Upper(j) => self.ub[j],
        }
    }

    fn slack(&self, i: usize, u: &DVector<f64>) -> f64 {
        self.bound(i) - self.dot(i, u)
    }
}

/// Orthonormal basis of the null space of the rows indexed by `working`.
fn null_space(red: &Reduced<'_>, working: &[usize]) -> DMatrix<f64> {
    let n = red.n();
    if working.is_empty() {
        return DMatrix::identity(n, n);
    }
    let mut aw = DMatrix::zeros(working.len(), n);
    for (r, &i) in working.iter().enumerate() {
        aw.set_row(r, &red.normal(i).transpose());
    }
    let gram = aw.transpose() * &aw;
    let eig = SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<DVector<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &ev)| ev <= 1e-10 * scale)
        .map(|(k, _)| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Least-squares multipliers `mu` with `A_W' mu = -g`.
fn multipliers(red: &Reduced<'_>, working: &[usize], grad: &DVector<f64>) -> DVector<f64> {
    let n = red.n();
    let mut awt = DMatrix::zeros(n, working.len());
    for (c, &i) in working.iter().enumerate() {
        awt.set_column(c, &red.normal(i));
    }
    let normal = awt.transpose() * &awt;
    let rhs = -(awt.transpose() * grad);
    normal
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .unwrap_or_else(|| {
            normal
                .pseudo_inverse(1e-12)
                .map(|p| p * &rhs)
                .unwrap_or_else(|_| DVector::zeros(working.len()))
        })
}

/// Null-space step; handles singular curvature by following a descent ray.
fn eigen_step(red: &Reduced<'_>, working: &[usize], grad: &DVector<f64>) -> (DVector<f64>, bool) {
    let z = null_space(red, working);
    if z.ncols() == 0 {
        return (DVector::zeros(red.n()), false);
    }
    let hz = z.transpose() * &red.h * &z;
    let gz = z.transpose() * grad;
    let eig = SymmetricEigen::new(hz);
    let scale = eig.eigenvalues.amax().max(1e-300);
    let curv_tol = 1e-10 * scale.max(1.0);
    let w = eig.eigenvectors.transpose() * &gz;
    let grad_tol = 1e-10 * (1.0 + red.c.amax());
    let flat_descent: Vec<usize> = (0..w.len())
        .filter(|&k| eig.eigenvalues[k] <= curv_tol && w[k].abs() > grad_tol)
        .collect();
    if flat_descent.is_empty() {
        let pz = DVector::from_fn(w.len(), |k, _| {
            if eig.eigenvalues[k] > curv_tol {
                -w[k] / eig.eigenvalues[k]
            } else {
                0.0
            }
        });
        (&z * (&eig.eigenvectors * pz), false)
    } else {
        let mut dz = DVector::zeros(w.len());
        for &k in &flat_descent {
            dz[k] = -w[k];
        }
        (&z * (&eig.eigenvectors * dz), true)
    }
}

/// Range-space step using a precomputed `H^{-1}`: the multipliers solve
/// `(A H^{-1} A') mu = -A H^{-1} g` and `p = -H^{-1}(g + A' mu)`.
fn range_step(
    red: &Reduced<'_>,
    hinv: &DMatrix<f64>,
    working: &[usize],
    grad: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = red.n();
    let w = working.len();
    let hg = hinv * grad;
    if w == 0 {
        return Some((-hg, DVector::zeros(0)));
    }
    if w > n {
        return None;
    }
    let mut v = DMatrix::zeros(n, w);
    for (c, &i) in working.iter().enumerate() {
        match red.row(i) {
            Row::General(r) => {
                for b in 0..n {
                    let gb = red.g[(r, b)];
                    if gb != 0.0 {
                        for a in 0..n {
                            v[(a, c)] += hinv[(a, b)] * gb;
                        }
                    }
                }
            }
            Row::Lower(j) => v.set_column(c, &(-hinv.column(j))),
            Row::Upper(j) => v.set_column(c, &hinv.column(j)),
        }
    }
    let mut schur = DMatrix::zeros(w, w);
    let mut rhs = DVector::zeros(w);
    for (r, &i) in working.iter().enumerate() {
        for c in 0..w {
            schur[(r, c)] = red.dot_slice(i, v.column(c).as_slice());
        }
        rhs[r] = -red.dot_slice(i, hg.as_slice());
    }
    let mu = schur.cholesky()?.solve(&rhs);
    let step = -(hg + &v * &mu);
    if step.iter().chain(mu.iter()).any(|x| !x.is_finite()) {
        return None;
    }
    let drift = working
        .iter()
        .map(|&i| red.dot(i, &step).abs())
        .fold(0.0, f64::max);
    if drift > 1e-9 * (1.0 + step.amax()) {
        return None;
    }
    Some((step, mu))
}

/// Step and multipliers from the equality-constrained KKT system
/// `[H A'; A 0] [p; mu] = [-g; 0]`. `None` when the system is singular or
/// the solve is inaccurate, in which case the null-space path takes over.
fn kkt_step(
    red: &Reduced<'_>,
    working: &[usize],
    grad: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = red.n();
    let w = working.len();
    if w > n {
        return None;
    }
    let mut k = DMatrix::zeros(n + w, n + w);
    k.view_mut((0, 0), (n, n)).copy_from(&red.h);
    for (r, &i) in working.iter().enumerate() {
        let a = red.normal(i);
        k.view_mut((n + r, 0), (1, n)).copy_from(&a.transpose());
        k.view_mut((0, n + r), (n, 1)).copy_from(&a);
    }
    let mut rhs = DVector::zeros(n + w);
    rhs.rows_mut(0, n).copy_from(&(-grad));
    let sol = k.clone().lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let resid = (&k * &sol - &rhs).amax();
    if resid > 1e-9 * (1.0 + grad.amax()) {
        return None;
    }
    let step = sol.rows(0, n).into_owned();
    // a positive-definite reduced Hessian makes the step a descent direction
    if step.dot(grad) > 1e-12 * (1.0 + grad.amax()) * (1.0 + step.amax()) {
        return None;
    }
    Some((step, sol.rows(n, w).into_owned()))
}

/// Feasible starting point and working set derived from a previous
/// solution, or `None` when the old point cannot be reused.
fn warm_start(
    red: &Reduced<'_>,
    x: &[f64],
    active: &[ActiveConstraint],
    tol: f64,
) -> Option<(DVector<f64>, Vec<usize>)> {
    let nf = red.n();
    let m = red.g.nrows();
    let u = DVector::from_fn(nf, |a, _| x[red.free[a]].clamp(red.lb[a], red.ub[a]));
    if (0..m).any(|r| red.slack(r, &u) < -tol) {
        return None;
    }
    let pos = |j: usize| red.free.iter().position(|&f| f == j);
    let mut candidates: Vec<usize> = Vec::new();
    for a in 0..nf {
        let j = red.free[a];
        if u[a] != x[j] {
            candidates.push(if u[a] == red.lb[a] { m + a } else { m + nf + a });
        }
    }
    for c in active {
        let i = match *c {
            ActiveConstraint::Row(r) if red.slack(r, &u).abs() <= tol => Some(r),
            ActiveConstraint::Lower(j) => pos(j).filter(|&a| u[a] == red.lb[a]).map(|a| m + a),
            ActiveConstraint::Upper(j) => pos(j).filter(|&a| u[a] == red.ub[a]).map(|a| m + nf + a),
            ActiveConstraint::Row(_) => None,
        };
        if let Some(i) = i {
            if !candidates.contains(&i) {
                candidates.push(i);
            }
        }
    }
    // keep the normals linearly independent
    let mut working: Vec<usize> = Vec::new();
    for i in candidates {
        if working.len() == nf {
            break;
        }
        working.push(i);
        let mut a = DMatrix::zeros(working.len(), nf);
        for (r, &k) in working.iter().enumerate() {
            a.set_row(r, &red.normal(k).transpose());
        }
        let gram = &a * a.transpose();
        let independent = gram
            .cholesky()
            .is_some_and(|ch| ch.l().diagonal().iter().all(|&d| d > 1e-7));
        if !independent {
            working.pop();
        }
    }
    Some((u, working))
}

/// Solves the continuous relaxation over the box `[lb, ub]`.
pub fn solve_relaxation(
    qp: &QuadProgram,
    lb: &[f64],
    ub: &[f64],
) -> Result<RelaxedSolution, SolveError> {
    solve_relaxation_from(qp, lb, ub, None)
}

/// Like [`solve_relaxation`], starting from a previous solution's point
/// and working set when they are still usable in the new box.
pub fn solve_relaxation_from(
    qp: &QuadProgram,
    lb: &[f64],
    ub: &[f64],
    start: Option<(&[f64], &[ActiveConstraint])>,
) -> Result<RelaxedSolution, SolveError> {
    if let Some((x, active)) = start {
        match active_set(qp, lb, ub, Some((x, active))) {
            Err(SolveError::IterationLimit) | Err(SolveError::Invalid(_)) => {}
            other => return other,
        }
    }
    active_set(qp, lb, ub, None)
}

fn active_set(
    qp: &QuadProgram,
    lb: &[f64],
    ub: &[f64],
    start: Option<(&[f64], &[ActiveConstraint])>,
) -> Result<RelaxedSolution, SolveError> {
    let n = qp.dim();
    if lb.len() != n || ub.len() != n {
        return Err(SolveError::Invalid("box dimension mismatch".into()));
    }
    if lb.iter().zip(ub).any(|(l, u)| l > u) {
        return Err(SolveError::Infeasible);
    }
    let feas_tol = 1e-9 * (1.0 + qp.rhs.amax());
    if !qp.corner_feasible(lb, feas_tol) {
        return Err(SolveError::Infeasible);
    }

    // Eliminate variables pinned by the box.
    let free: Vec<usize> = (0..n).filter(|&j| ub[j] - lb[j] > FIXED_WIDTH).collect();
    let mut full = DVector::from_column_slice(lb);
    let fixed_part = {
        let mut v = DVector::zeros(n);
        for j in 0..n {
            if ub[j] - lb[j] <= FIXED_WIDTH {
                v[j] = lb[j];
            }
        }
        v
    };
    let h_full_fixed = &qp.hessian * &fixed_part;
    let nf = free.len();
    let h = DMatrix::from_fn(nf, nf, |a, b| qp.hessian[(free[a], free[b])]);
    let c = DVector::from_fn(nf, |a, _| qp.linear[free[a]] + h_full_fixed[free[a]]);
    let g = DMatrix::from_fn(qp.ineq.nrows(), nf, |r, a| qp.ineq[(r, free[a])]);
    let rhs = &qp.rhs - &qp.ineq * &fixed_part;
    let red = Reduced {
        qp,
        free: free.clone(),
        h,
        c,
        g,
        rhs,
        lb: free.iter().map(|&j| lb[j]).collect(),
        ub: free.iter().map(|&j| ub[j]).collect(),
    };

    let (mut u, mut working) = start
        .and_then(|(x, active)| {
            (x.len() == n)
                .then(|| warm_start(&red, x, active, feas_tol))
                .flatten()
        })
        .unwrap_or_else(|| (DVector::from_column_slice(&red.lb), Vec::new()));
    let max_iter = 50 * (red.n_rows() + 10);
    let mut iterations = 0;
    let mut mu;
    let mut stalled = false;
    // an ill-conditioned inverse makes full steps overshoot and cycle
    let hinv = red
        .h
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .filter(|hi| hi.amax() * red.h.amax() < 1e8);

    loop {
        iterations += 1;
        if iterations > max_iter {
            return Err(SolveError::IterationLimit);
        }
        let grad = &red.h * &u + &red.c;
        let fast = match &hinv {
            Some(hi) => range_step(&red, hi, &working, &grad),
            None => None,
        };
        let (step, unbounded, kkt_mu) =
            if let Some((p, nu)) = fast.or_else(|| kkt_step(&red, &working, &grad)) {
                (p, false, Some(nu))
            } else {
                let (p, unbounded) = eigen_step(&red, &working, &grad);
                (p, unbounded, None)
            };

        let scale = 1.0 + u.amax();
        // rounding in the step can exceed ZERO_STEP when H is badly scaled
        let stationary = kkt_mu.as_ref().is_some_and(|m| {
            let mut r = grad.clone();
            for (k, &i) in working.iter().enumerate() {
                r += m[k] * red.normal(i);
            }
            r.amax() <= 1e-9 * (1.0 + grad.amax())
        });
        if !unbounded && (step.amax() <= ZERO_STEP * scale || stationary || stalled) {
            stalled = false;
            mu = kkt_mu.unwrap_or_else(|| multipliers(&red, &working, &grad));
            let mu_tol = 1e-9 * (1.0 + grad.amax());
            let drop = mu
                .iter()
                .enumerate()
                .filter(|(_, &m)| m < -mu_tol)
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k);
            match drop {
                Some(k) => {
                    working.remove(k);
                    continue;
                }
                None => break,
            }
        }

        let mut alpha = if unbounded { f64::INFINITY } else { 1.0 };
        let mut blocking = None;
        let g_step = &red.g * &step;
        let g_u = &red.g * &u;
        // rounding noise in `a'p` must not block a step
        let step_tol = 1e-11 * (1.0 + step.amax());
        for i in 0..red.n_rows() {
            let (ap, slack) = match red.row(i) {
                Row::General(r) => (g_step[r], red.rhs[r] - g_u[r]),
                Row::Lower(j) => (-step[j], u[j] - red.lb[j]),
                Row::Upper(j) => (step[j], red.ub[j] - u[j]),
            };
            if ap > step_tol && !working.contains(&i) {
                let ratio = (slack / ap).max(0.0);
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        if !alpha.is_finite() {
            // A box always blocks a descent ray; reaching here means bad input.
            return Err(SolveError::Invalid("unbounded descent direction".into()));
        }
        let before = u.clone();
        u += alpha * &step;
        if let Some(i) = blocking {
            working.push(i);
        }
        // Keep iterates exactly on active bounds.
        for &i in &working {
            match red.row(i) {
                Row::Lower(j) => u[j] = red.lb[j],
                Row::Upper(j) => u[j] = red.ub[j],
                Row::General(_) => {}
            }
        }
        for j in 0..nf {
            u[j] = u[j].clamp(red.lb[j], red.ub[j]);
        }
        // an unblocked step that does not move is rounding noise
        stalled = blocking.is_none() && (&u - &before).amax() <= 1e-9 * scale;
    }

    for (a, &j) in red.free.iter().enumerate() {
        full[j] = u[a];
    }
    let kkt = kkt_residual(&red, &working, &u, &mu);
    let active = working
        .iter()
        .map(|&i| match red.row(i) {
            Row::General(r) => ActiveConstraint::Row(r),
            Row::Lower(a) => ActiveConstraint::Lower(red.free[a]),
            Row::Upper(a) => ActiveConstraint::Upper(red.free[a]),
        })
        .collect();
    Ok(RelaxedSolution {
        objective: red.qp.objective(full.as_slice()),
        x: full.iter().copied().collect(),
        kkt_residual: kkt,
        iterations,
        active,
    })
}

fn kkt_residual(red: &Reduced<'_>, working: &[usize], u: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    let mut station = &red.h * u + &red.c;
    let mut res: f64 = 0.0;
    for (k, &i) in working.iter().enumerate() {
        let m = mu.get(k).copied().unwrap_or(0.0);
        station += m * red.normal(i);
        res = res.max((-m).max(0.0));
        res = res.max((m * red.slack(i, u)).abs());
    }
    res = res.max(station.amax());
    for i in 0..red.n_rows() {
        res = res.max((-red.slack(i, u)).max(0.0));
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(h: f64, c: f64) -> QuadProgram {
        QuadProgram::unconstrained(
            DMatrix::from_element(1, 1, h),
            DVector::from_element(1, c),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn interior_minimum() {
        // (u-6)^2 = u^2 - 12u + 36
        let mut qp = scalar(2.0, -12.0);
        qp.constant = 36.0;
        let sol = solve_relaxation(&qp, &[0.0], &[12.0]).unwrap();
        assert!((sol.x[0] - 6.0).abs() < 1e-12);
        assert!(sol.objective.abs() < 1e-12);
        assert!(sol.kkt_residual < 1e-12);
    }

    #[test]
    fn active_upper_bound() {
        let mut qp = scalar(2.0, -12.0);
        qp.constant = 36.0;
        let sol = solve_relaxation(&qp, &[0.0], &[4.0]).unwrap();
        assert_eq!(sol.x[0], 4.0);
        assert!((sol.objective - 4.0).abs() < 1e-12);
        assert!(sol.kkt_residual < 1e-9);
    }

    #[test]
    fn linear_objective_rides_to_the_bound() {
        let qp = scalar(0.0, -1.0);
        let sol = solve_relaxation(&qp, &[0.0], &[3.0]).unwrap();
        assert_eq!(sol.x[0], 3.0);
    }

    #[test]
    fn general_constraint_binds() {
        // min (u1-5)^2 + (u2-5)^2 s.t. u1 + u2 <= 4
        let qp = QuadProgram::new(
            DMatrix::identity(2, 2) * 2.0,
            DVector::from_vec(vec![-10.0, -10.0]),
            50.0,
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![4.0]),
        )
        .unwrap();
        let sol = solve_relaxation(&qp, &[0.0, 0.0], &[10.0, 10.0]).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 2.0).abs() < 1e-9);
        assert!(sol.kkt_residual < 1e-7);
    }

    #[test]
    fn infeasible_corner() {
        let qp = QuadProgram::new(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            0.0,
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert_eq!(
            solve_relaxation(&qp, &[2.0], &[3.0]),
            Err(SolveError::Infeasible)
        );
    }

    #[test]
    fn negative_rows_are_rejected() {
        let err = QuadProgram::new(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            0.0,
            DMatrix::from_element(1, 1, -1.0),
            DVector::from_element(1, 1.0),
        );
        assert!(err.is_err());
    }

    #[test]
    fn fixed_variables_are_respected() {
        let qp = QuadProgram::unconstrained(
            DMatrix::identity(2, 2) * 2.0,
            DVector::from_vec(vec![-4.0, -4.0]),
            8.0,
        )
        .unwrap();
        let sol = solve_relaxation(&qp, &[1.0, 0.0], &[1.0, 5.0]).unwrap();
        assert_eq!(sol.x[0], 1.0);
        assert!((sol.x[1] - 2.0).abs() < 1e-12);
    }
}
