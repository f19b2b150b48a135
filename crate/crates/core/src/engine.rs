//! The iteration driver `x_{n+1} = α_n f(x_n) + (1 - α_n) T_n x_n`, the
//! families `n -> T_n`, and the viscosity path `x_t = t f(x_t) + (1-t) T x_t`
//! whose limit as `t -> 0` is the point the iteration should converge to.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::convex_sets::{projection_operator, ConvexSet};
use crate::error::{Error, Result};
use crate::hilbert::{all_finite, check_dims, Matrix, Vector};
use crate::monotone::{
    projected_gradient_map, solve_equilibrium_resolvent, AffineMonotoneOp, InnerSolverOptions,
    QuadraticBifunction,
};
use crate::operators::{compose, convex_combination, ContractionSpec, MeirKeelerSpec, Operator};
use crate::schedules::{
    decay_check, summable_check, H3Item, HypothesisReport, ItemReport, ReportMode, Schedule,
    Verdict, MIN_PREFIX, RUN_PREFIX,
};

pub const DEFAULT_MAX_ITERS: usize = 100_000;
pub const DEFAULT_RESIDUAL: f64 = 1e-10;
/// Coordinates beyond this magnitude count as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e12;
pub const DEFAULT_PATH_TOL: f64 = 1e-12;
pub const DEFAULT_QMAP_TOL: f64 = 1e-5;
pub const DEFAULT_MAX_PATH_ITERS: usize = 20_000_000;

/// The anchor map `f`.
#[derive(Clone, Debug)]
pub enum Anchor {
    Contraction(ContractionSpec),
    MeirKeeler(MeirKeelerSpec),
}

impl From<ContractionSpec> for Anchor {
    fn from(f: ContractionSpec) -> Self {
        Anchor::Contraction(f)
    }
}

impl From<MeirKeelerSpec> for Anchor {
    fn from(f: MeirKeelerSpec) -> Self {
        Anchor::MeirKeeler(f)
    }
}

impl Anchor {
    pub fn operator(&self) -> &Operator {
        match self {
            Anchor::Contraction(f) => f.operator(),
            Anchor::MeirKeeler(f) => f.operator(),
        }
    }

    /// Contraction modulus, when there is one.
    pub fn modulus(&self) -> Option<f64> {
        match self {
            Anchor::Contraction(f) => Some(f.alpha()),
            Anchor::MeirKeeler(_) => None,
        }
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        self.operator().apply(x)
    }

    /// `f ∘ P`, which keeps the modulus (or the Meir-Keeler witness).
    fn after(&self, p: &Operator) -> Result<Anchor> {
        Ok(match self {
            Anchor::Contraction(f) => {
                Anchor::Contraction(ContractionSpec::new(compose(f.operator(), p)?, f.alpha())?)
            }
            Anchor::MeirKeeler(f) => Anchor::MeirKeeler(MeirKeelerSpec::new(
                compose(f.operator(), p)?,
                f.witness().cloned(),
            )),
        })
    }
}

#[derive(Clone, Debug)]
enum FamilyKind {
    Constant(Operator),
    Mann {
        t: Operator,
        beta: Schedule,
    },
    Cyclic(Vec<Operator>),
    ResolventVarying {
        a: AffineMonotoneOp,
        r: Schedule,
    },
    ConvexCombVarying {
        ops: Vec<Operator>,
        weights: Vec<Schedule>,
    },
    ProjectedGradientVarying {
        c: ConvexSet,
        a: AffineMonotoneOp,
        lambda: Schedule,
    },
    EquilibriumVarying {
        f: QuadraticBifunction,
        c: ConvexSet,
        r: Schedule,
        opts: InnerSolverOptions,
    },
    GammaChain {
        ops: Vec<Operator>,
        betas: Vec<Schedule>,
    },
    Retracted {
        t: Operator,
        p: ConvexSet,
    },
    Composition(Vec<Operator>),
}

/// A sequence of nonexpansive maps `n -> T_n`.
#[derive(Clone, Debug)]
pub struct OperatorFamily {
    kind: FamilyKind,
    dim: usize,
}

fn same_dims(ops: &[Operator]) -> Result<usize> {
    let first = ops
        .first()
        .ok_or_else(|| Error::invalid("family needs at least one operator"))?;
    for op in ops {
        check_dims(first.dim(), op.dim())?;
    }
    Ok(first.dim())
}

fn positive_lower_bound(s: &Schedule, hypothesis: &str) -> Result<()> {
    let (lo, _) = s.bounds();
    if lo > 0.0 {
        Ok(())
    } else {
        Err(Error::hypothesis(
            hypothesis,
            format!("{} schedule has infimum {lo}", s.family()),
        ))
    }
}

impl OperatorFamily {
    pub fn constant(t: Operator) -> Self {
        let dim = t.dim();
        OperatorFamily {
            kind: FamilyKind::Constant(t),
            dim,
        }
    }

    /// `T_n = β_n I + (1 - β_n) T`.
    pub fn mann(t: Operator, beta: Schedule) -> Result<Self> {
        if !beta.values_within_open(0.0, 1.0) {
            return Err(Error::hypothesis("β_n ∈ (0,1)", "Mann weights leave (0,1)"));
        }
        let dim = t.dim();
        Ok(OperatorFamily {
            kind: FamilyKind::Mann { t, beta },
            dim,
        })
    }

    /// `T_n = Q_{n mod N}`.
    pub fn cyclic(ops: Vec<Operator>) -> Result<Self> {
        let dim = same_dims(&ops)?;
        Ok(OperatorFamily {
            kind: FamilyKind::Cyclic(ops),
            dim,
        })
    }

    /// `T_n = J_{r_n}` with `r_n >= ε > 0`.
    pub fn resolvent_varying(a: AffineMonotoneOp, r: Schedule) -> Result<Self> {
        positive_lower_bound(&r, "r_n ≥ ε > 0")?;
        let dim = a.dim();
        Ok(OperatorFamily {
            kind: FamilyKind::ResolventVarying { a, r },
            dim,
        })
    }

    /// `T_n = Σ_i λ_{i,n} T_i`; the weights are the given positive schedules
    /// divided by their sum at each `n`.
    pub fn convex_comb_varying(ops: Vec<Operator>, weights: Vec<Schedule>) -> Result<Self> {
        let dim = same_dims(&ops)?;
        if ops.len() != weights.len() {
            return Err(Error::invalid("need one weight schedule per operator"));
        }
        for w in &weights {
            positive_lower_bound(w, "λ_{i,n} ∈ [a,b], a > 0")?;
        }
        Ok(OperatorFamily {
            kind: FamilyKind::ConvexCombVarying { ops, weights },
            dim,
        })
    }

    /// `T_n = P_C(I - λ_n A)` with `λ_n ∈ [a,b] ⊂ (0, 2μ)`.
    pub fn projected_gradient_varying(c: ConvexSet, a: AffineMonotoneOp, lambda: Schedule) -> Result<Self> {
        check_dims(c.dim(), a.dim())?;
        let mu = a.ism_modulus().ok_or_else(|| {
            Error::invalid("projected-gradient family needs an inverse-strong-monotonicity modulus")
        })?;
        let (lo, hi) = lambda.bounds();
        if !(lo > 0.0 && hi < 2.0 * mu) {
            return Err(Error::hypothesis(
                "λ_n ∈ [a,b] ⊂ (0,2μ)",
                format!("steps range over [{lo}, {hi}] with μ = {mu}"),
            ));
        }
        let dim = a.dim();
        Ok(OperatorFamily {
            kind: FamilyKind::ProjectedGradientVarying { c, a, lambda },
            dim,
        })
    }

    /// `T_n = T_{r_n}`, the resolvent of the bifunction, with `liminf r_n > 0`.
    pub fn equilibrium_varying(
        f: QuadraticBifunction,
        c: ConvexSet,
        r: Schedule,
        opts: InnerSolverOptions,
    ) -> Result<Self> {
        check_dims(c.dim(), f.dim())?;
        positive_lower_bound(&r, "liminf r_n > 0")?;
        let dim = f.dim();
        Ok(OperatorFamily {
            kind: FamilyKind::EquilibriumVarying { f, c, r, opts },
            dim,
        })
    }

    /// `T_n = Γ^{(1)}_n` with `Γ^{(j)}_n x = β^{(j)}_n x + (1 - β^{(j)}_n) T_j Γ^{(j+1)}_n x`
    /// and `Γ^{(m+1)}_n = I`.
    pub fn gamma_chain(ops: Vec<Operator>, betas: Vec<Schedule>) -> Result<Self> {
        let dim = same_dims(&ops)?;
        if ops.len() != betas.len() {
            return Err(Error::invalid("need one β schedule per operator"));
        }
        for b in &betas {
            if b.limit() != Some(0.0) || !b.values_within_open(0.0, 1.0) {
                return Err(Error::hypothesis(
                    "β^{(j)}_n ∈ (0,1), β^{(j)}_n → 0",
                    format!("{} schedule does not qualify", b.family()),
                ));
            }
        }
        Ok(OperatorFamily {
            kind: FamilyKind::GammaChain { ops, betas },
            dim,
        })
    }

    /// Ambient form of the retracted scheme: `T_n = T ∘ P` and the anchor is
    /// evaluated at `P x_n`.
    pub fn retracted(t: Operator, p: ConvexSet) -> Result<Self> {
        check_dims(t.dim(), p.dim())?;
        let dim = t.dim();
        Ok(OperatorFamily {
            kind: FamilyKind::Retracted { t, p },
            dim,
        })
    }

    /// `T_n = T_1 ∘ T_2 ∘ ... ∘ T_m` for every `n`.
    pub fn composition(ops: Vec<Operator>) -> Result<Self> {
        let dim = same_dims(&ops)?;
        Ok(OperatorFamily {
            kind: FamilyKind::Composition(ops),
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &'static str {
        match self.kind {
            FamilyKind::Constant(_) => "constant",
            FamilyKind::Mann { .. } => "mann",
            FamilyKind::Cyclic(_) => "cyclic",
            FamilyKind::ResolventVarying { .. } => "resolvent_varying",
            FamilyKind::ConvexCombVarying { .. } => "convex_comb_varying",
            FamilyKind::ProjectedGradientVarying { .. } => "projected_gradient_varying",
            FamilyKind::EquilibriumVarying { .. } => "equilibrium_varying",
            FamilyKind::GammaChain { .. } => "gamma_chain",
            FamilyKind::Retracted { .. } => "retracted",
            FamilyKind::Composition(_) => "composition",
        }
    }

    /// The shift `N` that makes the family periodic (1 unless cyclic).
    pub fn period(&self) -> usize {
        match &self.kind {
            FamilyKind::Cyclic(ops) => ops.len(),
            _ => 1,
        }
    }

    /// The retraction `P` of the retracted scheme.
    pub fn retraction(&self) -> Option<&ConvexSet> {
        match &self.kind {
            FamilyKind::Retracted { p, .. } => Some(p),
            _ => None,
        }
    }

    /// `T_n x`.
    pub fn apply(&self, n: usize, x: &Vector) -> Result<Vector> {
        check_dims(self.dim, x.len())?;
        match &self.kind {
            FamilyKind::Constant(t) => t.apply(x),
            FamilyKind::Mann { t, beta } => {
                let b = beta.value(n)?;
                let mut y = t.apply(x)? * (1.0 - b);
                y.axpy(b, x, 1.0);
                Ok(y)
            }
            FamilyKind::Cyclic(ops) => ops[n % ops.len()].apply(x),
            FamilyKind::ResolventVarying { a, r } => {
                let r = r.value(n)?;
                let d = self.dim;
                let lhs = Matrix::identity(d, d) + a.matrix() * r;
                let rhs = x - a.offset() * r;
                lhs.lu()
                    .solve(&rhs)
                    .ok_or_else(|| Error::invalid("I + rM is singular; operator is not monotone"))
            }
            FamilyKind::ConvexCombVarying { ops, weights } => {
                let w = weights
                    .iter()
                    .map(|s| s.value(n))
                    .collect::<Result<Vec<_>>>()?;
                let total: f64 = w.iter().sum();
                let mut acc = Vector::zeros(self.dim);
                for (op, wi) in ops.iter().zip(&w) {
                    acc.axpy(wi / total, &op.apply(x)?, 1.0);
                }
                Ok(acc)
            }
            FamilyKind::ProjectedGradientVarying { c, a, lambda } => {
                let l = lambda.value(n)?;
                c.project(&(x - a.apply(x)? * l))
            }
            FamilyKind::EquilibriumVarying { f, c, r, opts } => {
                solve_equilibrium_resolvent(f, c, r.value(n)?, x, *opts)
            }
            FamilyKind::GammaChain { ops, betas } => {
                let mut y = x.clone();
                for (op, beta) in ops.iter().zip(betas).rev() {
                    let b = beta.value(n)?;
                    let mut next = op.apply(&y)? * (1.0 - b);
                    next.axpy(b, x, 1.0);
                    y = next;
                }
                Ok(y)
            }
            FamilyKind::Retracted { t, p } => t.apply(&p.project(x)?),
            FamilyKind::Composition(ops) => {
                let mut y = x.clone();
                for op in ops.iter().rev() {
                    y = op.apply(&y)?;
                }
                Ok(y)
            }
        }
    }

    /// `T_n` as a standalone operator.
    pub fn at(&self, n: usize) -> Operator {
        let fam = self.clone();
        Operator::from_fn(self.dim, format!("{}[{n}]", self.kind()), move |x| fam.apply(n, x))
            .with_lipschitz(1.0)
    }

    /// A single nonexpansive map whose fixed-point set is the common fixed
    /// point set of the family. Used for the viscosity path and for `fixres`.
    pub fn reference_operator(&self) -> Result<Operator> {
        Ok(match &self.kind {
            FamilyKind::Constant(t) | FamilyKind::Mann { t, .. } => t.clone(),
            FamilyKind::Cyclic(ops) => {
                // Q_{N-1} ∘ ... ∘ Q_0
                let mut acc = ops[0].clone();
                for op in &ops[1..] {
                    acc = compose(op, &acc)?;
                }
                acc
            }
            FamilyKind::ResolventVarying { a, r } => {
                a.resolvent(r.limit().filter(|v| *v > 0.0).unwrap_or(1.0))?
            }
            FamilyKind::ConvexCombVarying { ops, .. } => {
                let w = vec![1.0 / ops.len() as f64; ops.len()];
                convex_combination(ops, &w)?
            }
            FamilyKind::ProjectedGradientVarying { c, a, lambda } => {
                let (lo, hi) = lambda.bounds();
                let l = lambda.limit().unwrap_or(0.5 * (lo + hi));
                projected_gradient_map(c, a, l)?
            }
            FamilyKind::EquilibriumVarying { f, c, r, opts } => {
                let r = r.limit().filter(|v| *v > 0.0).unwrap_or(r.bounds().0);
                crate::monotone::equilibrium_resolvent(f, c, r, *opts)?
            }
            FamilyKind::GammaChain { ops, .. } | FamilyKind::Composition(ops) => {
                let mut acc = ops[ops.len() - 1].clone();
                for op in ops[..ops.len() - 1].iter().rev() {
                    acc = compose(op, &acc)?;
                }
                acc
            }
            FamilyKind::Retracted { t, p } => compose(t, &projection_operator(p))?,
        })
    }

    /// The anchor as it enters the ambient recurrence (`f ∘ P` for the
    /// retracted scheme).
    pub fn effective_anchor(&self, f: &Anchor) -> Result<Anchor> {
        match &self.kind {
            FamilyKind::Retracted { p, .. } => f.after(&projection_operator(p)),
            _ => Ok(f.clone()),
        }
    }

    /// Largest relative displacement `|T_n p - p| / (1 + |p|)` over `ns`.
    pub fn common_fix_residual(&self, p: &Vector, ns: impl IntoIterator<Item = usize>) -> Result<f64> {
        let mut worst = 0.0_f64;
        for n in ns {
            worst = worst.max((self.apply(n, p)? - p).norm() / (1.0 + p.norm()));
        }
        Ok(worst)
    }

    /// `T_{n+N-1} ∘ ... ∘ T_n x`.
    pub fn block_apply(&self, n: usize, n_shift: usize, x: &Vector) -> Result<Vector> {
        let mut y = x.clone();
        for k in n..n + n_shift {
            y = self.apply(k, &y)?;
        }
        Ok(y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMeasure {
    /// `|x_{n+1} - x_n|`
    #[default]
    Step,
    /// `|x_n - T_n x_n|`
    FixedPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// `None` disables the residual test.
    #[serde(default = "default_residual")]
    pub residual: Option<f64>,
    #[serde(default)]
    pub measure: ResidualMeasure,
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

fn default_residual() -> Option<f64> {
    Some(DEFAULT_RESIDUAL)
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            max_iters: DEFAULT_MAX_ITERS,
            residual: Some(DEFAULT_RESIDUAL),
            measure: ResidualMeasure::Step,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCause {
    ResidualMet,
    MaxIters,
    Diverged,
    InnerSolverFailure,
}

impl StopCause {
    pub fn as_str(self) -> &'static str {
        match self {
            StopCause::ResidualMet => "residual_met",
            StopCause::MaxIters => "max_iters",
            StopCause::Diverged => "diverged",
            StopCause::InnerSolverFailure => "inner_solver_failure",
        }
    }
}

/// Everything recorded by [`run`].
#[derive(Clone, Debug)]
pub struct IterationTrace {
    /// `x_0, ..., x_K`
    pub iterates: Vec<Vector>,
    /// `α_0, ..., α_{K-1}`
    pub alpha_values: Vec<f64>,
    /// `|x_{n+1} - x_n|`
    pub residuals: Vec<f64>,
    /// `|x_n - T_n x_n|`, `n < K`
    pub fixed_point_residuals: Vec<f64>,
    /// `y_n = P x_n` for the retracted scheme.
    pub retracted: Option<Vec<Vector>>,
    pub stop_cause: StopCause,
    pub failure: Option<String>,
    pub config_echo: serde_json::Value,
    pub wall_time: Duration,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn last(&self) -> &Vector {
        self.iterates.last().expect("trace holds x_0")
    }

    pub fn dim(&self) -> usize {
        self.iterates[0].len()
    }
}

fn diverged(x: &Vector) -> bool {
    !all_finite(x) || x.iter().any(|c| c.abs() > DIVERGENCE_BOUND)
}

/// Runs the viscosity iteration from `x0`.
pub fn run(
    x0: &Vector,
    f: &Anchor,
    family: &OperatorFamily,
    alpha: &Schedule,
    stop: &StopRule,
    config_echo: serde_json::Value,
) -> Result<IterationTrace> {
    check_dims(family.dim(), x0.len())?;
    check_dims(family.dim(), f.operator().dim())?;
    if stop.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    if let Some(len) = alpha.len() {
        if len < stop.max_iters {
            return Err(Error::invalid(format!(
                "α schedule has {len} terms but max_iters is {}",
                stop.max_iters
            )));
        }
    }
    let start = Instant::now();
    let anchor = family.effective_anchor(f)?;
    let retraction = family.retraction().cloned();
    let cap = stop.max_iters.min(1 << 20) + 1;
    let mut iterates = Vec::with_capacity(cap);
    let mut alpha_values = Vec::with_capacity(cap);
    let mut residuals = Vec::with_capacity(cap);
    let mut fixres = Vec::with_capacity(cap);
    let mut x = x0.clone();
    iterates.push(x.clone());
    let mut cause = StopCause::MaxIters;
    let mut failure = None;

    for n in 0..stop.max_iters {
        let a = alpha.value(n)?;
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::hypothesis("H3,N (i)", format!("α_{n} = {a} is not in (0,1)")));
        }
        let tx = match family.apply(n, &x) {
            Ok(v) => v,
            Err(e @ Error::InnerSolver { .. }) => {
                cause = StopCause::InnerSolverFailure;
                failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let fx = anchor.apply(&x)?;
        let mut next = fx * a;
        next.axpy(1.0 - a, &tx, 1.0);
        let fr = (&x - &tx).norm();
        if diverged(&next) {
            cause = StopCause::Diverged;
            failure = Some(format!("iterate {} left the finite range", n + 1));
            break;
        }
        let step = (&next - &x).norm();
        alpha_values.push(a);
        residuals.push(step);
        fixres.push(fr);
        iterates.push(next.clone());
        x = next;
        if let Some(thr) = stop.residual {
            let r = match stop.measure {
                ResidualMeasure::Step => step,
                ResidualMeasure::FixedPoint => fr,
            };
            if r <= thr {
                cause = StopCause::ResidualMet;
                break;
            }
        }
    }
    let retracted = retraction.map(|p| iterates.iter().map(|x| p.project(x).expect("dims checked")).collect());
    Ok(IterationTrace {
        iterates,
        alpha_values,
        residuals,
        fixed_point_residuals: fixres,
        retracted,
        stop_cause: cause,
        failure,
        config_echo,
        wall_time: start.elapsed(),
    })
}

/// `max(|x_0 - p|, |f(p) - p| / (1 - α))`, the bound every iterate obeys
/// when `p` is a common fixed point and `f` an `α`-contraction.
pub fn boundedness_radius(f: &Anchor, x0: &Vector, p: &Vector) -> Result<Option<f64>> {
    let Some(alpha) = f.modulus() else {
        return Ok(None);
    };
    let fp = f.apply(p)?;
    Ok(Some((x0 - p).norm().max((fp - p).norm() / (1.0 - alpha))))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathPoint {
    pub t: f64,
    pub point: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `x = t f(x) + (1 - t) T x` by Banach iteration from `x_init`.
///
/// With an `α`-contraction anchor the map contracts with modulus
/// `q = 1 - t(1 - α)`; the residual must shrink at least that fast (up to
/// `tol`) and the iteration count is capped at `log(tol/r_0)/log(q)` plus a
/// small margin. Meir-Keeler anchors carry no modulus and only the hard cap
/// `max_iters` applies.
pub fn solve_viscosity_path(
    f: &Anchor,
    t: f64,
    big_t: &Operator,
    x_init: &Vector,
    tol: f64,
    max_iters: usize,
) -> Result<PathPoint> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!("path parameter t = {t} not in (0,1)")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("path tolerance must be positive"));
    }
    check_dims(big_t.dim(), x_init.len())?;
    let step = |z: &Vector| -> Result<Vector> {
        let mut y = f.apply(z)? * t;
        y.axpy(1.0 - t, &big_t.apply(z)?, 1.0);
        Ok(y)
    };
    let mut x = x_init.clone();
    let mut next = step(&x)?;
    let mut r = (&next - &x).norm();
    let r0 = r;
    let q = f.modulus().map(|a| 1.0 - t * (1.0 - a));
    let bound = match q {
        Some(q) if r0 > tol => {
            let k = ((tol / r0).ln() / q.ln()).ceil();
            (k * 1.05 + 100.0).min(max_iters as f64) as usize
        }
        _ => max_iters,
    };
    let mut k = 0;
    while r > tol {
        if k >= bound {
            return Err(Error::NonContraction(format!(
                "path solve at t = {t} exceeded {bound} iterations (residual {r:e})"
            )));
        }
        x = next;
        next = step(&x)?;
        let r_new = (&next - &x).norm();
        if let Some(q) = q {
            if r_new > q * r + tol {
                return Err(Error::NonContraction(format!(
                    "residual grew from {r:e} to {r_new:e} at t = {t}"
                )));
            }
        }
        if diverged(&next) {
            return Err(Error::NonContraction(format!("path iterate diverged at t = {t}")));
        }
        r = r_new;
        k += 1;
    }
    Ok(PathPoint {
        t,
        point: next.iter().copied().collect(),
        iterations: k + 1,
        residual: r,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QMapOptions {
    /// Strictly decreasing values of `t` in `(0, 1)`.
    #[serde(default = "default_t_sequence")]
    pub t_sequence: Vec<f64>,
    /// Acceptance threshold on successive path points.
    #[serde(default = "default_qmap_tol")]
    pub tol: f64,
    /// Residual target of each path solve.
    #[serde(default = "default_path_tol")]
    pub path_tol: f64,
    #[serde(default = "default_max_path_iters")]
    pub max_path_iters: usize,
}

fn default_t_sequence() -> Vec<f64> {
    (1..=20).map(|k| 0.5f64.powi(k)).collect()
}

fn default_qmap_tol() -> f64 {
    DEFAULT_QMAP_TOL
}

fn default_path_tol() -> f64 {
    DEFAULT_PATH_TOL
}

fn default_max_path_iters() -> usize {
    DEFAULT_MAX_PATH_ITERS
}

impl Default for QMapOptions {
    fn default() -> Self {
        QMapOptions {
            t_sequence: default_t_sequence(),
            tol: DEFAULT_QMAP_TOL,
            path_tol: DEFAULT_PATH_TOL,
            max_path_iters: DEFAULT_MAX_PATH_ITERS,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QMapEstimate {
    pub limit: Vec<f64>,
    pub accepted_t: f64,
    pub last_difference: f64,
    pub path: Vec<PathPoint>,
}

impl QMapEstimate {
    pub fn limit_vector(&self) -> Vector {
        Vector::from_vec(self.limit.clone())
    }
}

/// Follows the viscosity path along `t_sequence`, warm-starting each solve
/// from the previous point, and accepts the first point within `tol` of its
/// predecessor.
pub fn estimate_q_map(f: &Anchor, big_t: &Operator, x_init: &Vector, opts: &QMapOptions) -> Result<QMapEstimate> {
    let ts = &opts.t_sequence;
    if ts.len() < 2
        || ts.windows(2).any(|w| w[1] >= w[0])
        || ts.iter().any(|t| !(*t > 0.0 && *t < 1.0))
    {
        return Err(Error::invalid("t_sequence must be strictly decreasing inside (0,1) with at least two entries"));
    }
    let mut path = Vec::with_capacity(ts.len());
    let mut x = x_init.clone();
    let mut last_difference = f64::INFINITY;
    for &t in ts {
        let p = solve_viscosity_path(f, t, big_t, &x, opts.path_tol, opts.max_path_iters)?;
        let point = Vector::from_vec(p.point.clone());
        if !path.is_empty() {
            last_difference = (&point - &x).norm();
        }
        path.push(p);
        x = point;
        if last_difference < opts.tol {
            return Ok(QMapEstimate {
                limit: x.iter().copied().collect(),
                accepted_t: t,
                last_difference,
                path,
            });
        }
    }
    Err(Error::NoStableLimit {
        last_difference,
        path: path
            .into_iter()
            .map(|p| (p.t, Vector::from_vec(p.point)))
            .collect(),
    })
}

/// H1,N along a stored run: `δ_n = |(1-α_{n+N}) T_{n+N} x_n - (1-α_n) T_n x_n|`
/// tested for `Σ δ_n < ∞` (item `(i)`) and `δ_n / α_n -> 0` (item `(i')`).
///
/// For constant families, and for cyclic families when `N` is a multiple of
/// the period, `δ_n = |α_{n+N} - α_n| |T_n x_n|`, so the summable mode
/// follows from item (iv) of H3,N and the boundedness of the iterates.
pub fn check_h1n_on_run(
    trace: &IterationTrace,
    family: &OperatorFamily,
    alpha: &Schedule,
    n_shift: usize,
) -> Result<HypothesisReport> {
    if n_shift == 0 {
        return Err(Error::invalid("shift N must be at least 1"));
    }
    check_dims(family.dim(), trace.dim())?;
    let len = trace.iterations().min(RUN_PREFIX);
    let mut delta = Vec::with_capacity(len);
    let mut ratio = Vec::with_capacity(len);
    for n in 0..len {
        let x = &trace.iterates[n];
        let (a0, a1) = (alpha.value(n)?, alpha.value(n + n_shift)?);
        let d = (family.apply(n + n_shift, x)? * (1.0 - a1) - family.apply(n, x)? * (1.0 - a0)).norm();
        delta.push(d);
        ratio.push(d / a0);
    }
    let periodic_in_n = match &family.kind {
        FamilyKind::Constant(_) | FamilyKind::Composition(_) | FamilyKind::Retracted { .. } => true,
        FamilyKind::Cyclic(ops) => n_shift % ops.len() == 0,
        _ => false,
    };
    let certified = periodic_in_n && alpha.certifies(H3Item::Iv, n_shift);
    let mut observations = BTreeMap::new();
    observations.insert("(i).partial_sum".to_string(), delta.iter().sum());
    let mut items = Vec::new();
    if len < MIN_PREFIX {
        items.push(ItemReport {
            item: "(i)".into(),
            verdict: if certified { Verdict::Certified } else { Verdict::Consistent },
            witness: None,
            note: (!certified).then(|| "run too short to evaluate".into()),
        });
        items.push(ItemReport {
            item: "(i')".into(),
            verdict: Verdict::Consistent,
            witness: None,
            note: Some("run too short to evaluate".into()),
        });
    } else {
        let sum = summable_check(&delta);
        let dec = decay_check(&ratio);
        for (k, v) in &sum.values {
            observations.insert(format!("(i).{k}"), *v);
        }
        for (k, v) in &dec.values {
            observations.insert(format!("(i').{k}"), *v);
        }
        for (name, o, cert) in [("(i)", &sum, certified), ("(i')", &dec, false)] {
            items.push(ItemReport {
                item: name.into(),
                verdict: if cert {
                    Verdict::Certified
                } else if o.violated {
                    Verdict::Violated
                } else {
                    Verdict::Consistent
                },
                witness: if cert { None } else { o.witness },
                note: if cert { None } else { o.note.clone() },
            });
        }
    }
    let verdict = if certified {
        Verdict::Certified
    } else if items.iter().all(|i| i.verdict == Verdict::Violated) {
        Verdict::Violated
    } else {
        Verdict::Consistent
    };
    Ok(HypothesisReport {
        hypothesis: "H1,N".into(),
        n_shift,
        mode: if certified {
            ReportMode::Analytic
        } else {
            ReportMode::PrefixHeuristic
        },
        prefix_length: len,
        items,
        observations,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::AffineSet;
    use crate::sampling::{BoxSampler, PairSampler};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn v(c: &[f64]) -> Vector {
        Vector::from_vec(c.to_vec())
    }

    fn constant_anchor(u: &[f64]) -> Anchor {
        ContractionSpec::constant(v(u)).into()
    }

    fn line(dir: [f64; 2]) -> Operator {
        projection_operator(&ConvexSet::affine(AffineSet::new(Vector::zeros(2), &[v(&dir)]).unwrap()))
    }

    fn ball_projection() -> Operator {
        projection_operator(&ConvexSet::unit_ball(2))
    }

    #[test]
    fn example_one_converges_to_projection_of_anchor() {
        let fam = OperatorFamily::constant(ball_projection());
        let trace = run(
            &v(&[0.0, 0.0]),
            &constant_anchor(&[2.0, 0.0]),
            &fam,
            &Schedule::harmonic(),
            &StopRule::default(),
            serde_json::Value::Null,
        )
        .unwrap();
        assert!((trace.last() - v(&[1.0, 0.0])).norm() <= 1e-4);
        assert_eq!(trace.residuals.len(), trace.iterates.len() - 1);
    }

    #[test]
    fn trace_replays_the_recurrence() {
        let fam = OperatorFamily::cyclic(vec![line([1.0, 0.0]), line([1.0, 1.0])]).unwrap();
        let f = constant_anchor(&[3.0, 1.0]);
        let alpha = Schedule::harmonic();
        let stop = StopRule {
            max_iters: 500,
            ..StopRule::default()
        };
        let trace = run(&v(&[0.5, -0.5]), &f, &fam, &alpha, &stop, serde_json::Value::Null).unwrap();
        for n in 0..trace.iterations() {
            let x = &trace.iterates[n];
            let a = trace.alpha_values[n];
            let expect = f.apply(x).unwrap() * a + fam.apply(n, x).unwrap() * (1.0 - a);
            assert!((expect - &trace.iterates[n + 1]).norm() <= 1e-12);
        }
    }

    #[test]
    fn rotation_drives_iterates_to_origin() {
        let f: Anchor = ContractionSpec::affine(0.5, Matrix::identity(2, 2) * 0.5, v(&[0.1, 0.0]))
            .unwrap()
            .into();
        let fam = OperatorFamily::constant(Operator::rotation(FRAC_PI_2));
        let trace = run(&v(&[1.0, 1.0]), &f, &fam, &Schedule::harmonic(), &StopRule::default(), serde_json::Value::Null)
            .unwrap();
        assert!(trace.last().norm() <= 1e-3);
    }

    #[test]
    fn cyclic_lines_converge_to_their_intersection() {
        let fam = OperatorFamily::cyclic(vec![line([1.0, 0.0]), line([1.0, 1.0])]).unwrap();
        assert_eq!(fam.period(), 2);
        let trace = run(
            &v(&[0.0, 0.0]),
            &constant_anchor(&[3.0, 1.0]),
            &fam,
            &Schedule::harmonic(),
            &StopRule::default(),
            serde_json::Value::Null,
        )
        .unwrap();
        assert!(trace.last().norm() <= 1e-3);
    }

    #[test]
    fn cyclic_indexing() {
        let q0 = line([1.0, 0.0]);
        let q1 = line([1.0, 1.0]);
        let fam = OperatorFamily::cyclic(vec![q0, q1.clone()]).unwrap();
        let x = v(&[2.0, -1.0]);
        assert_eq!(fam.apply(5, &x).unwrap(), q1.apply(&x).unwrap());
    }

    #[test]
    fn mann_first_operator_is_an_even_average() {
        let t = ball_projection();
        let fam = OperatorFamily::mann(t.clone(), Schedule::harmonic()).unwrap();
        let x = v(&[3.0, 4.0]);
        let expect = &x * 0.5 + t.apply(&x).unwrap() * 0.5;
        assert_eq!(fam.apply(0, &x).unwrap(), expect);
        assert!(OperatorFamily::mann(t, Schedule::constant(1.0).unwrap()).is_err());
    }

    #[test]
    fn single_gamma_chain_is_mann() {
        let t = ball_projection();
        let beta = Schedule::power(0.7, 0.8).unwrap();
        let chain = OperatorFamily::gamma_chain(vec![t.clone()], vec![beta.clone()]).unwrap();
        let mann = OperatorFamily::mann(t, beta).unwrap();
        let mut s = BoxSampler::symmetric(40, 3.0);
        for n in 0..100 {
            let x = s.point(2);
            assert!((chain.apply(n, &x).unwrap() - mann.apply(n, &x).unwrap()).norm() <= 1e-12);
        }
    }

    #[test]
    fn family_preconditions_name_the_hypothesis() {
        let a = AffineMonotoneOp::new(Matrix::identity(2, 2), v(&[-2.0, 0.0]), Some(1.0)).unwrap();
        let err = OperatorFamily::projected_gradient_varying(
            ConvexSet::unit_ball(2),
            a.clone(),
            Schedule::constant(2.5).unwrap(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("λ_n"));
        let err = OperatorFamily::resolvent_varying(a, Schedule::harmonic()).unwrap_err();
        assert!(err.to_string().contains("r_n"));
        let err = OperatorFamily::gamma_chain(vec![ball_projection()], vec![Schedule::constant(0.5).unwrap()])
            .unwrap_err();
        assert!(matches!(err, Error::Hypothesis { .. }));
    }

    #[test]
    fn alpha_outside_unit_interval_is_rejected() {
        let fam = OperatorFamily::constant(ball_projection());
        let err = run(
            &v(&[0.0, 0.0]),
            &constant_anchor(&[2.0, 0.0]),
            &fam,
            &Schedule::constant(1.0).unwrap(),
            &StopRule::default(),
            serde_json::Value::Null,
        )
        .unwrap_err();
        assert!(err.to_string().contains("H3,N (i)"));
    }

    #[test]
    fn divergence_is_reported() {
        let blow = Operator::affine(Matrix::identity(1, 1) * 10.0, Vector::zeros(1)).unwrap();
        let fam = OperatorFamily::constant(blow);
        let trace = run(
            &v(&[1.0]),
            &constant_anchor(&[0.0]),
            &fam,
            &Schedule::harmonic(),
            &StopRule::default(),
            serde_json::Value::Null,
        )
        .unwrap();
        assert_eq!(trace.stop_cause, StopCause::Diverged);
    }

    #[test]
    fn inner_failure_is_reported() {
        let f = QuadraticBifunction::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let opts = InnerSolverOptions {
            inner_tol: 1e-15,
            max_inner: 2,
        };
        let fam = OperatorFamily::equilibrium_varying(
            f,
            ConvexSet::whole_space(2).unwrap(),
            Schedule::constant(1.0).unwrap(),
            opts,
        )
        .unwrap();
        let trace = run(
            &v(&[5.0, 5.0]),
            &constant_anchor(&[1.0, 0.0]),
            &fam,
            &Schedule::harmonic(),
            &StopRule::default(),
            serde_json::Value::Null,
        )
        .unwrap();
        assert_eq!(trace.stop_cause, StopCause::InnerSolverFailure);
        assert!(trace.failure.is_some());
    }

    #[test]
    fn path_examples() {
        let c = v(&[0.3, -0.2]);
        let f: Anchor = ContractionSpec::affine(0.5, Matrix::identity(2, 2) * 0.5, c.clone())
            .unwrap()
            .into();
        let p = solve_viscosity_path(&f, 0.3, &Operator::identity(2), &Vector::zeros(2), 1e-13, 1_000_000).unwrap();
        assert!((Vector::from_vec(p.point) - &c * 2.0).norm() <= 1e-12);

        let u = v(&[1.5, -2.0]);
        let zero = Operator::affine(Matrix::zeros(2, 2), Vector::zeros(2)).unwrap();
        let p = solve_viscosity_path(&ContractionSpec::constant(u.clone()).into(), 0.25, &zero, &Vector::zeros(2), 1e-13, 1000)
            .unwrap();
        assert!((Vector::from_vec(p.point) - &u * 0.25).norm() <= 1e-12);
    }

    #[test]
    fn ball_path_point_matches_radial_oracle() {
        // On the ray through u = (2,0), x = (s,0) with s = 2t + (1-t) min(s,1)/... solved by bisection.
        let t = 0.01;
        let g = |s: f64| 2.0 * t + (1.0 - t) * s.min(1.0) - s;
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = solve_viscosity_path(&constant_anchor(&[2.0, 0.0]), t, &ball_projection(), &Vector::zeros(2), 1e-13, 10_000_000)
            .unwrap();
        assert!((Vector::from_vec(p.point.clone()) - v(&[lo, 0.0])).norm() <= 1e-9);
        assert!((p.point[0] - 1.0).abs() <= 0.02);
    }

    #[test]
    fn path_rejects_expanding_maps() {
        let blow = Operator::affine(Matrix::identity(1, 1) * 3.0, Vector::zeros(1)).unwrap();
        let err = solve_viscosity_path(&constant_anchor(&[1.0]), 0.1, &blow, &v(&[1.0]), 1e-12, 1000).unwrap_err();
        assert!(matches!(err, Error::NonContraction(_)));
    }

    #[test]
    fn q_map_examples() {
        let est = estimate_q_map(&constant_anchor(&[2.0, 0.0]), &ball_projection(), &Vector::zeros(2), &QMapOptions::default())
            .unwrap();
        assert!((est.limit_vector() - v(&[1.0, 0.0])).norm() <= 1e-4);

        let f: Anchor = ContractionSpec::affine(0.5, Matrix::identity(2, 2) * 0.5, v(&[0.4, 0.4]))
            .unwrap()
            .into();
        let est = estimate_q_map(&f, &Operator::rotation(1.0), &v(&[1.0, 1.0]), &QMapOptions::default()).unwrap();
        assert!(est.limit_vector().norm() <= 1e-4);

        let half: Anchor = ContractionSpec::affine(0.5, Matrix::identity(2, 2) * 0.5, Vector::zeros(2))
            .unwrap()
            .into();
        let est = estimate_q_map(&half, &line([1.0, 0.0]), &v(&[3.0, 1.0]), &QMapOptions::default()).unwrap();
        assert!(est.limit_vector().norm() <= 1e-4);
    }

    #[test]
    fn q_map_reports_unstable_paths() {
        let opts = QMapOptions {
            t_sequence: vec![0.5, 0.25],
            tol: 1e-12,
            ..QMapOptions::default()
        };
        let err = estimate_q_map(&constant_anchor(&[2.0, 0.0]), &ball_projection(), &Vector::zeros(2), &opts).unwrap_err();
        match err {
            Error::NoStableLimit { path, .. } => assert_eq!(path.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn boundedness_holds_along_runs() {
        let p = v(&[1.0, 0.0]);
        let f = constant_anchor(&[2.0, 0.0]);
        let x0 = v(&[-3.0, 2.0]);
        let fam = OperatorFamily::mann(ball_projection(), Schedule::power(1.0, 1.0).unwrap()).unwrap();
        let trace = run(&x0, &f, &fam, &Schedule::harmonic(), &StopRule::default(), serde_json::Value::Null).unwrap();
        let radius = boundedness_radius(&f, &x0, &p).unwrap().unwrap();
        assert!(trace.iterates.iter().all(|x| (x - &p).norm() <= radius + 1e-8));
        assert!(fam.common_fix_residual(&p, 0..100).unwrap() <= 1e-9);
    }

    #[test]
    fn h1n_examples() {
        let f = constant_anchor(&[2.0, 0.0]);
        let stop = StopRule {
            max_iters: 20_000,
            residual: None,
            ..StopRule::default()
        };
        let alpha = Schedule::harmonic();

        let fam = OperatorFamily::constant(ball_projection());
        let trace = run(&v(&[0.0, 0.0]), &f, &fam, &alpha, &stop, serde_json::Value::Null).unwrap();
        let rep = check_h1n_on_run(&trace, &fam, &alpha, 1).unwrap();
        assert_eq!(rep.verdict, Verdict::Certified);
        // Oracle: δ_n = |α_{n+1} - α_n| |T x_n| recomputed along the trace.
        let t = ball_projection();
        let direct: f64 = (0..RUN_PREFIX)
            .map(|n| (alpha.value(n + 1).unwrap() - alpha.value(n).unwrap()).abs() * t.apply(&trace.iterates[n]).unwrap().norm())
            .sum();
        assert_abs_diff_eq!(rep.observations["(i).partial_sum"], direct, epsilon = 1e-12);

        let cyc = OperatorFamily::cyclic(vec![line([1.0, 0.0]), line([1.0, 1.0])]).unwrap();
        let trace = run(&v(&[0.0, 0.0]), &constant_anchor(&[3.0, 1.0]), &cyc, &alpha, &stop, serde_json::Value::Null).unwrap();
        assert_eq!(check_h1n_on_run(&trace, &cyc, &alpha, 2).unwrap().verdict, Verdict::Certified);

        let beta = Schedule::power(1.0, 1.0).unwrap();
        let mann = OperatorFamily::mann(ball_projection(), beta.clone()).unwrap();
        let trace = run(&v(&[0.0, 0.0]), &f, &mann, &alpha, &stop, serde_json::Value::Null).unwrap();
        let rep = check_h1n_on_run(&trace, &mann, &alpha, 1).unwrap();
        assert_eq!(rep.verdict, Verdict::Consistent);
        // Bound: δ_n <= (|Δα_n| + |Δβ_n|) K with K = 2 max(|x_n|, |T x_n|) + ...
        let k = trace.iterates.iter().map(|x| x.norm()).fold(0.0, f64::max) * 2.0 + 2.0;
        for n in 0..1000 {
            let x = &trace.iterates[n];
            let d = (mann.apply(n + 1, x).unwrap() * (1.0 - alpha.value(n + 1).unwrap())
                - mann.apply(n, x).unwrap() * (1.0 - alpha.value(n).unwrap()))
            .norm();
            let bound = ((alpha.value(n + 1).unwrap() - alpha.value(n).unwrap()).abs()
                + (beta.value(n + 1).unwrap() - beta.value(n).unwrap()).abs())
                * k;
            assert!(d <= bound + 1e-15);
        }
    }

    #[test]
    fn gamma_chain_differences_stay_proportional_to_beta_differences() {
        let ops = vec![ball_projection(), projection_operator(&ConvexSet::halfspace(v(&[1.0, 0.0]), 0.5).unwrap())];
        let betas = vec![Schedule::power(1.0, 1.0).unwrap(), Schedule::power(0.8, 0.9).unwrap()];
        let fam = OperatorFamily::gamma_chain(ops, betas.clone()).unwrap();
        let trace = run(
            &v(&[0.0, 0.0]),
            &constant_anchor(&[2.0, 0.0]),
            &fam,
            &Schedule::harmonic(),
            &StopRule {
                max_iters: 5000,
                residual: None,
                ..StopRule::default()
            },
            serde_json::Value::Null,
        )
        .unwrap();
        let mut ratios = Vec::new();
        for n in 0..5000 {
            let x = &trace.iterates[n];
            let d = (fam.apply(n + 1, x).unwrap() - fam.apply(n, x).unwrap()).norm();
            let s: f64 = betas
                .iter()
                .map(|b| (b.value(n + 1).unwrap() - b.value(n).unwrap()).abs())
                .sum();
            ratios.push(d / s);
        }
        let k_hat = ratios.iter().copied().fold(0.0, f64::max);
        assert!(k_hat.is_finite() && k_hat < 10.0);
    }

    #[test]
    fn cyclic_block_displacement_decays() {
        let fam = OperatorFamily::cyclic(vec![line([1.0, 0.0]), line([1.0, 1.0])]).unwrap();
        let stop = StopRule {
            max_iters: 100_002,
            residual: None,
            ..StopRule::default()
        };
        let trace = run(&v(&[0.0, 0.0]), &constant_anchor(&[3.0, 1.0]), &fam, &Schedule::harmonic(), &stop, serde_json::Value::Null)
            .unwrap();
        let n = 100_000;
        let block = fam.block_apply(n, 2, &trace.iterates[n]).unwrap();
        assert!((&trace.iterates[n + 2] - block).norm() < 1e-3);
    }
}
