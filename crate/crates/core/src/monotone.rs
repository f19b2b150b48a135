//! Affine monotone operators `A x = M x + q` and the nonexpansive maps built
//! from them: resolvents, forward steps, projected-gradient maps and the
//! resolvent of the bifunction `F(z, y) = <M z + q, y - z>` over a convex set.

use nalgebra::LU;
use serde::Serialize;

use crate::convex_sets::{projection_operator, ConvexSet};
use crate::error::{Error, Result};
use crate::hilbert::{
    check_dims, operator_norm, solve_linear_set, symmetric_part_eigenvalues, AffineSet, Matrix,
    Vector,
};
use crate::operators::{compose, KnownFix, Operator};
use crate::sampling::PairSampler;

pub const DEFAULT_INNER_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_INNER: usize = 100_000;

const PSD_TOL: f64 = 1e-10;

fn check_monotone_matrix(m: &Matrix, q: &Vector) -> Result<()> {
    if !m.is_square() {
        return Err(Error::invalid("monotone operator needs a square matrix"));
    }
    check_dims(m.nrows(), q.len())?;
    let lmin = symmetric_part_eigenvalues(m)[0];
    if lmin < -PSD_TOL * (1.0 + operator_norm(m)) {
        return Err(Error::invalid(format!(
            "symmetric part is not positive semidefinite (eigenvalue {lmin:e})"
        )));
    }
    Ok(())
}

fn is_symmetric(m: &Matrix) -> bool {
    (m - m.transpose()).amax() <= 1e-12 * (1.0 + m.amax())
}

/// `A x = M x + q` with `(M + M^T)/2` positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMonotoneOp {
    m: Matrix,
    q: Vector,
    declared_mu: Option<f64>,
}

impl AffineMonotoneOp {
    pub fn new(m: Matrix, q: Vector, declared_mu: Option<f64>) -> Result<Self> {
        check_monotone_matrix(&m, &q)?;
        if let Some(mu) = declared_mu {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::invalid("inverse-strong-monotonicity modulus must be positive"));
            }
        }
        Ok(AffineMonotoneOp { m, q, declared_mu })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn offset(&self) -> &Vector {
        &self.q
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        check_dims(self.dim(), x.len())?;
        Ok(&self.m * x + &self.q)
    }

    /// The declared modulus, else `1/λ_max(M)` for symmetric `M`.
    pub fn ism_modulus(&self) -> Option<f64> {
        if self.declared_mu.is_some() {
            return self.declared_mu;
        }
        if is_symmetric(&self.m) {
            let lmax = *symmetric_part_eigenvalues(&self.m).last().expect("nonempty");
            if lmax > 0.0 {
                return Some(1.0 / lmax);
            }
        }
        None
    }

    /// `{x : M x + q = 0}`, or `None` when `A` has no zero.
    pub fn zero_set(&self) -> Result<Option<AffineSet>> {
        solve_linear_set(&self.m, &(-&self.q))
    }

    fn modulus_or_err(&self) -> Result<f64> {
        self.ism_modulus().ok_or_else(|| {
            Error::invalid("operator needs a declared inverse-strong-monotonicity modulus")
        })
    }

    /// `J_r x = (I + r M)^{-1} (x - r q)`.
    pub fn resolvent(&self, r: f64) -> Result<Operator> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(format!("resolvent parameter {r} must be positive")));
        }
        let d = self.dim();
        let lu = LU::new(Matrix::identity(d, d) + &self.m * r);
        let inv = lu
            .try_inverse()
            .expect("I + rM is invertible for monotone M");
        let shift = &inv * (&self.q * r);
        let mut op = Operator::from_fn(d, format!("J[{r}]"), move |x| Ok(&inv * x - &shift))
            .with_lipschitz(1.0)
            .firmly_nonexpansive();
        if let Some(zeros) = self.zero_set()? {
            op = op.with_known_fix(KnownFix::Affine(zeros));
        }
        Ok(op)
    }

    /// `x -> x - λ A x` for `λ ∈ (0, 2μ]`.
    pub fn forward_step(&self, lambda: f64) -> Result<Operator> {
        let mu = self.modulus_or_err()?;
        if !(lambda > 0.0 && lambda <= 2.0 * mu * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!(
                "forward step {lambda} outside (0, 2μ] with μ = {mu}"
            )));
        }
        let (m, q) = (self.m.clone(), self.q.clone());
        let mut op = Operator::from_fn(self.dim(), format!("fwd[{lambda}]"), move |x| {
            Ok(x - (&m * x + &q) * lambda)
        })
        .with_lipschitz(1.0);
        if let Some(zeros) = self.zero_set()? {
            op = op.with_known_fix(KnownFix::Affine(zeros));
        }
        Ok(op)
    }
}

/// `x -> P_C(x - λ A x)` for `λ ∈ (0, 2μ)`; its fixed points solve VI(C, A).
pub fn projected_gradient_map(c: &ConvexSet, a: &AffineMonotoneOp, lambda: f64) -> Result<Operator> {
    check_dims(c.dim(), a.dim())?;
    let mu = a.modulus_or_err()?;
    if lambda >= 2.0 * mu {
        return Err(Error::invalid(format!(
            "projected-gradient step {lambda} must be below 2μ = {}",
            2.0 * mu
        )));
    }
    let op = compose(&projection_operator(c), &a.forward_step(lambda)?)?;
    Ok(op.with_lipschitz(1.0).with_label(format!("PG[{lambda}]")))
}

/// `F(z, y) = <M z + q, y - z>` with `M` monotone.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticBifunction {
    m: Matrix,
    q: Vector,
}

impl QuadraticBifunction {
    pub fn new(m: Matrix, q: Vector) -> Result<Self> {
        check_monotone_matrix(&m, &q)?;
        Ok(QuadraticBifunction { m, q })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn value(&self, z: &Vector, y: &Vector) -> Result<f64> {
        check_dims(self.dim(), z.len())?;
        check_dims(self.dim(), y.len())?;
        Ok((&self.m * z + &self.q).dot(&(y - z)))
    }

    /// Constant step of the inner projected-gradient loop for parameter `r`.
    ///
    /// `G(z) = M z + q + (z - x)/r` is `m`-strongly monotone and
    /// `L`-Lipschitz with `m = 1/r + λ_min(sym M)` and `L = |M| + 1/r`. For
    /// symmetric `M` the step `1/(|M| + 2/r)` contracts; otherwise the step
    /// `m/L^2` is used, which contracts with factor `sqrt(1 - m^2/L^2)`.
    pub fn inner_step(&self, r: f64) -> f64 {
        let norm = operator_norm(&self.m);
        if is_symmetric(&self.m) {
            1.0 / (norm + 2.0 / r)
        } else {
            let strong = 1.0 / r + symmetric_part_eigenvalues(&self.m)[0].max(0.0);
            let lip = norm + 1.0 / r;
            strong / (lip * lip)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InnerSolverOptions {
    pub inner_tol: f64,
    pub max_inner: usize,
}

impl Default for InnerSolverOptions {
    fn default() -> Self {
        InnerSolverOptions {
            inner_tol: DEFAULT_INNER_TOL,
            max_inner: DEFAULT_MAX_INNER,
        }
    }
}

/// Solves the strongly monotone VI over `C` with operator
/// `G(z) = M z + q + (z - x)/r`, starting from `P_C(x)`.
pub fn solve_equilibrium_resolvent(
    f: &QuadraticBifunction,
    c: &ConvexSet,
    r: f64,
    x: &Vector,
    opts: InnerSolverOptions,
) -> Result<Vector> {
    let tau = f.inner_step(r);
    let mut z = c.project(x)?;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_inner {
        let g = &f.m * &z + &f.q + (&z - x) / r;
        let next = c.project(&(&z - g * tau))?;
        residual = (&next - &z).norm();
        z = next;
        if residual <= opts.inner_tol {
            return Ok(z);
        }
    }
    Err(Error::InnerSolver {
        iterations: opts.max_inner,
        residual,
    })
}

/// `T_r x = {z ∈ C : F(z, y) + <y - z, z - x>/r >= 0 for all y ∈ C}`.
pub fn equilibrium_resolvent(
    f: &QuadraticBifunction,
    c: &ConvexSet,
    r: f64,
    opts: InnerSolverOptions,
) -> Result<Operator> {
    check_dims(c.dim(), f.dim())?;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid(format!("resolvent parameter {r} must be positive")));
    }
    if !(opts.inner_tol > 0.0) || opts.max_inner == 0 {
        return Err(Error::invalid("inner solver needs a positive tolerance and iteration cap"));
    }
    let (f, c) = (f.clone(), c.clone());
    Ok(
        Operator::from_fn(f.dim(), format!("T[{r}]"), move |x| {
            solve_equilibrium_resolvent(&f, &c, r, x, opts)
        })
        .with_lipschitz(1.0)
        .firmly_nonexpansive(),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct IsmReport {
    pub mu: f64,
    pub min_slack: f64,
    pub trials: usize,
    pub pass: bool,
}

/// Minimum sampled `<x - y, Ax - Ay> - μ |Ax - Ay|^2`.
pub fn check_inverse_strongly_monotone(
    a: &AffineMonotoneOp,
    mu: f64,
    sampler: &mut dyn PairSampler,
    trials: usize,
) -> Result<IsmReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let mut min_slack = f64::INFINITY;
    for _ in 0..trials {
        let (x, y) = sampler.pair(a.dim());
        let d = &x - &y;
        let ad = &a.m * &d;
        min_slack = min_slack.min(d.dot(&ad) - mu * ad.norm_squared());
    }
    Ok(IsmReport {
        mu,
        min_slack,
        trials,
        pass: min_slack >= -1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::solve_affine_fixed_set;
    use crate::operators::{check_attracting, check_nonexpansive};
    use crate::sampling::{rng, BoxSampler, DEFAULT_TOL, DEFAULT_TRIALS};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn v(c: &[f64]) -> Vector {
        Vector::from_vec(c.to_vec())
    }

    fn diag(d: &[f64]) -> Matrix {
        Matrix::from_diagonal(&v(d))
    }

    /// `B^T B + S` with `S` skew: monotone, generally nonsymmetric.
    fn random_monotone(seed: u64, d: usize) -> AffineMonotoneOp {
        let mut r = rng(seed);
        let b = Matrix::from_fn(d, d, |_, _| r.gen_range(-1.0..1.0));
        let s = Matrix::from_fn(d, d, |_, _| r.gen_range(-1.0..1.0));
        let m = b.transpose() * &b + (&s - s.transpose()) * 0.5;
        let q = Vector::from_fn(d, |_, _| r.gen_range(-1.0..1.0));
        AffineMonotoneOp::new(m, q, None).unwrap()
    }

    #[test]
    fn resolvent_examples() {
        let id = AffineMonotoneOp::new(Matrix::identity(2, 2), Vector::zeros(2), None).unwrap();
        let j = id.resolvent(1.0).unwrap();
        assert_eq!(j.apply(&v(&[4.0, -2.0])).unwrap(), v(&[2.0, -1.0]));
        match j.known_fix() {
            Some(KnownFix::Affine(a)) => assert_eq!(a.dim_subspace(), 0),
            other => panic!("{other:?}"),
        }

        let a = AffineMonotoneOp::new(diag(&[1.0, 0.0]), Vector::zeros(2), None).unwrap();
        let j = a.resolvent(3.0).unwrap();
        let y = j.apply(&v(&[8.0, 5.0])).unwrap();
        assert_abs_diff_eq!(y[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(y[1], 5.0, epsilon = 1e-14);
        let axis = AffineSet::new(Vector::zeros(2), &[v(&[0.0, 1.0])]).unwrap();
        match j.known_fix() {
            Some(KnownFix::Affine(z)) => assert!(z.same_set(&axis, 1e-12)),
            other => panic!("{other:?}"),
        }
        assert!(a.resolvent(0.0).is_err());
    }

    fn resolvent_identity_gap(a: &AffineMonotoneOp, lam: f64, mu: f64, x: &Vector) -> f64 {
        let jl = a.resolvent(lam).unwrap();
        let jm = a.resolvent(mu).unwrap();
        let jlx = jl.apply(x).unwrap();
        let arg = x * (mu / lam) + &jlx * (1.0 - mu / lam);
        (jlx - jm.apply(&arg).unwrap()).norm()
    }

    #[test]
    fn resolvent_identity_on_random_points() {
        let a = random_monotone(21, 4);
        let mut s = BoxSampler::symmetric(22, 5.0);
        for _ in 0..100 {
            let x = s.point(4);
            assert!(resolvent_identity_gap(&a, 2.0, 0.5, &x) <= 1e-9);
        }
    }

    #[test]
    fn resolvents_are_firmly_nonexpansive() {
        let a = random_monotone(23, 5);
        let j = a.resolvent(0.7).unwrap();
        let mut s = BoxSampler::symmetric(24, 4.0);
        for _ in 0..DEFAULT_TRIALS {
            let (x, y) = s.pair(5);
            let d = j.apply(&x).unwrap() - j.apply(&y).unwrap();
            assert!(d.norm_squared() <= d.dot(&(&x - &y)) + 1e-9);
        }
        assert!(check_nonexpansive(&j, &mut s, DEFAULT_TRIALS, DEFAULT_TOL).unwrap().pass);
    }

    #[test]
    fn resolvent_fixed_set_does_not_depend_on_r() {
        // Rank-deficient monotone operator with a nontrivial zero set.
        let m = Matrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let a = AffineMonotoneOp::new(m.clone(), v(&[-1.0, 0.0, 0.0]), None).unwrap();
        let sets: Vec<AffineSet> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&r| {
                // Oracle: fixed set of the resolvent as an explicit affine map.
                let inv = (Matrix::identity(3, 3) + &m * r).try_inverse().unwrap();
                let b = -(&inv * (a.offset() * r));
                solve_affine_fixed_set(&inv, &b).unwrap().unwrap()
            })
            .collect();
        let zeros = a.zero_set().unwrap().unwrap();
        for s in &sets {
            assert!(s.same_set(&zeros, 1e-9) && zeros.same_set(s, 1e-9));
        }
        assert!(zeros.contains(&v(&[1.0, -1.0, 7.0]), 1e-12));
    }

    #[test]
    fn forward_step_examples() {
        let b = v(&[2.0, 0.0]);
        let a = AffineMonotoneOp::new(Matrix::identity(2, 2), -&b, Some(1.0)).unwrap();
        let f = a.forward_step(1.0).unwrap();
        assert_eq!(f.apply(&v(&[5.0, -3.0])).unwrap(), b);

        let id = AffineMonotoneOp::new(Matrix::identity(2, 2), Vector::zeros(2), Some(1.0)).unwrap();
        assert_eq!(id.forward_step(2.0).unwrap().apply(&v(&[1.0, 2.0])).unwrap(), v(&[-1.0, -2.0]));
        assert!(id.forward_step(2.5).is_err());
        assert!(id.forward_step(0.0).is_err());

        let d = AffineMonotoneOp::new(diag(&[1.0, 0.5]), Vector::zeros(2), None).unwrap();
        assert_abs_diff_eq!(d.ism_modulus().unwrap(), 1.0, epsilon = 1e-12);
        let mut s = BoxSampler::symmetric(25, 3.0);
        let rep = check_nonexpansive(&d.forward_step(1.5).unwrap(), &mut s, DEFAULT_TRIALS, DEFAULT_TOL).unwrap();
        assert!(rep.pass && rep.max_ratio <= 1.0);
    }

    #[test]
    fn short_forward_steps_are_attracting() {
        let a = AffineMonotoneOp::new(diag(&[1.0, 0.5]), v(&[-1.0, 0.5]), None).unwrap();
        let zero = v(&[1.0, -1.0]);
        assert!(a.apply(&zero).unwrap().norm() < 1e-15);
        let f = a.forward_step(1.5).unwrap();
        let mut s = BoxSampler::symmetric(26, 3.0);
        let rep = check_attracting(&f, &[zero], &mut s, DEFAULT_TRIALS, DEFAULT_TOL).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn projected_gradient_examples() {
        let ball = ConvexSet::unit_ball(2);
        let a = AffineMonotoneOp::new(Matrix::identity(2, 2), v(&[-2.0, 0.0]), Some(1.0)).unwrap();
        let t = projected_gradient_map(&ball, &a, 1.0).unwrap();
        let p = v(&[1.0, 0.0]);
        assert!(t.displacement(&p).unwrap() < 1e-15);
        // VI(C, A): <A p, y - p> >= 0 for sampled y in the ball.
        let mut r = rng(27);
        let ap = a.apply(&p).unwrap();
        for _ in 0..1000 {
            let y = ball.sample(&mut r, 1.0);
            assert!(ap.dot(&(y - &p)) >= -1e-9);
        }

        let id = AffineMonotoneOp::new(Matrix::identity(2, 2), Vector::zeros(2), Some(1.0)).unwrap();
        let t = projected_gradient_map(&ConvexSet::whole_space(2).unwrap(), &id, 0.5).unwrap();
        assert!(t.displacement(&Vector::zeros(2)).unwrap() == 0.0);
        assert!(projected_gradient_map(&ball, &id, 2.0).is_err());
    }

    #[test]
    fn projected_gradient_on_box_matches_grid_search() {
        let unit_box = ConvexSet::boxed(v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap();
        let a = AffineMonotoneOp::new(Matrix::identity(2, 2), v(&[-2.0, 0.5]), Some(1.0)).unwrap();
        let t = projected_gradient_map(&unit_box, &a, 1.0).unwrap();
        let mut best = (f64::INFINITY, Vector::zeros(2));
        for i in 0..=200 {
            for j in 0..=200 {
                let x = v(&[i as f64 / 200.0, j as f64 / 200.0]);
                let r = t.displacement(&x).unwrap();
                if r < best.0 {
                    best = (r, x);
                }
            }
        }
        assert!(best.0 < 1e-12);
        assert!((best.1 - v(&[1.0, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn projected_gradient_fixed_points_do_not_depend_on_step() {
        let ball = ConvexSet::ball(v(&[0.0, 0.0, 0.0]), 1.0).unwrap();
        let a = AffineMonotoneOp::new(diag(&[2.0, 1.0, 0.5]), v(&[-3.0, 1.0, 0.2]), None).unwrap();
        let (t1, t2) = (
            projected_gradient_map(&ball, &a, 0.3).unwrap(),
            projected_gradient_map(&ball, &a, 0.9).unwrap(),
        );
        let mut fixed = Vec::new();
        for t in [&t1, &t2] {
            let mut x = Vector::zeros(3);
            for _ in 0..20_000 {
                x = t.apply(&x).unwrap();
            }
            fixed.push(x);
        }
        assert!(t2.displacement(&fixed[0]).unwrap() <= 1e-7);
        assert!(t1.displacement(&fixed[1]).unwrap() <= 1e-7);
    }

    #[test]
    fn equilibrium_resolvent_closed_forms() {
        let mut s = BoxSampler::symmetric(28, 3.0);
        let mut r = rng(29);
        let q = v(&[0.4, -1.1]);
        let zero = QuadraticBifunction::new(Matrix::zeros(2, 2), q.clone()).unwrap();
        let sets = [
            ConvexSet::unit_ball(2),
            ConvexSet::boxed(v(&[0.0, -0.5]), v(&[1.0, 2.0])).unwrap(),
        ];
        for set in &sets {
            for _ in 0..100 {
                let x = s.point(2);
                let rr: f64 = r.gen_range(0.1..10.0);
                let t = equilibrium_resolvent(&zero, set, rr, InnerSolverOptions::default()).unwrap();
                let expect = set.project(&(&x - &q * rr)).unwrap();
                assert!((t.apply(&x).unwrap() - expect).norm() <= 1e-7);
            }
        }

        let trivial = QuadraticBifunction::new(Matrix::zeros(2, 2), Vector::zeros(2)).unwrap();
        let t = equilibrium_resolvent(&trivial, &sets[0], 2.0, InnerSolverOptions::default()).unwrap();
        let x = v(&[3.0, 4.0]);
        assert!((t.apply(&x).unwrap() - v(&[0.6, 0.8])).norm() <= 1e-12);

        let id = QuadraticBifunction::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let whole = ConvexSet::whole_space(2).unwrap();
        let t = equilibrium_resolvent(&id, &whole, 3.0, InnerSolverOptions::default()).unwrap();
        assert!((t.apply(&x).unwrap() - &x / 4.0).norm() <= 1e-7);
    }

    #[test]
    fn equilibrium_resolvent_reports_inner_failure() {
        let id = QuadraticBifunction::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let opts = InnerSolverOptions {
            inner_tol: 1e-14,
            max_inner: 3,
        };
        let t = equilibrium_resolvent(&id, &ConvexSet::whole_space(2).unwrap(), 1.0, opts).unwrap();
        assert!(matches!(
            t.apply(&v(&[5.0, 5.0])),
            Err(Error::InnerSolver { iterations: 3, .. })
        ));
    }

    #[test]
    fn equilibrium_resolvent_handles_nonsymmetric_matrices() {
        let m = Matrix::from_row_slice(2, 2, &[0.1, 3.0, -3.0, 0.1]);
        let f = QuadraticBifunction::new(m.clone(), v(&[0.2, -0.1])).unwrap();
        let c = ConvexSet::unit_ball(2);
        let t = equilibrium_resolvent(&f, &c, 1.0, InnerSolverOptions::default()).unwrap();
        let x = v(&[2.0, 1.0]);
        let z = t.apply(&x).unwrap();
        // Defining inequality at sampled y.
        let mut r = rng(30);
        for _ in 0..500 {
            let y = c.sample(&mut r, 1.0);
            let val = f.value(&z, &y).unwrap() + (&y - &z).dot(&(&z - &x));
            assert!(val >= -1e-8);
        }
    }

    #[test]
    fn inverse_strong_monotonicity_examples() {
        let mut s = BoxSampler::symmetric(31, 2.0);
        let id = AffineMonotoneOp::new(Matrix::identity(2, 2), Vector::zeros(2), None).unwrap();
        let rep = check_inverse_strongly_monotone(&id, 1.0, &mut s, 200).unwrap();
        assert!(rep.pass && rep.min_slack.abs() < 1e-12);

        let two = AffineMonotoneOp::new(Matrix::identity(2, 2) * 2.0, Vector::zeros(2), None).unwrap();
        assert!(!check_inverse_strongly_monotone(&two, 1.0, &mut s, 200).unwrap().pass);

        // Oracle: symmetric M passes exactly when μ <= 1/λ_max(M).
        let d = AffineMonotoneOp::new(diag(&[1.0, 1.0 / 3.0]), Vector::zeros(2), None).unwrap();
        let lmax = *symmetric_part_eigenvalues(d.matrix()).last().unwrap();
        for mu in [0.5, 1.0, 1.2, 3.0] {
            let rep = check_inverse_strongly_monotone(&d, mu, &mut s, 500).unwrap();
            assert_eq!(rep.pass, mu <= 1.0 / lmax, "mu = {mu}");
        }
    }

    #[test]
    fn non_monotone_matrices_are_rejected() {
        assert!(AffineMonotoneOp::new(diag(&[1.0, -0.1]), Vector::zeros(2), None).is_err());
        assert!(QuadraticBifunction::new(diag(&[-1.0]), Vector::zeros(1)).is_err());
    }

    proptest! {
        #[test]
        fn bifunction_conditions(seed in 0u64..500) {
            let a = random_monotone(seed, 3);
            let f = QuadraticBifunction::new(a.matrix().clone(), a.offset().clone()).unwrap();
            let mut s = BoxSampler::symmetric(seed, 3.0);
            let (x, y) = s.pair(3);
            prop_assert_eq!(f.value(&x, &x).unwrap(), 0.0);
            prop_assert!(f.value(&x, &y).unwrap() + f.value(&y, &x).unwrap() <= 1e-9);
            prop_assert!((&x - &y).dot(&(a.apply(&x).unwrap() - a.apply(&y).unwrap())) >= -1e-9);
        }
    }
}
