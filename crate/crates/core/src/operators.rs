//! Evaluable maps on `R^d` with declared regularity metadata, the
//! combinators used to build iteration families, and sampled checks of the
//! declared properties.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{check_dims, operator_norm, solve_affine_fixed_set, AffineSet, Matrix, Vector};
use crate::sampling::PairSampler;

/// Pairs closer than this are skipped by ratio checks.
const MIN_PAIR_DISTANCE: f64 = 1e-12;
/// Samples whose displacement `|Tx - x|` is below this are treated as fixed
/// by [`check_attracting`].
pub const ATTRACTING_MIN_DISPLACEMENT: f64 = 1e-3;
/// Relative tolerance for declared fixed points.
pub const FIX_TOL: f64 = 1e-9;

pub trait Map: Send + Sync {
    fn apply(&self, x: &Vector) -> Result<Vector>;
}

struct FnMap<F>(F);

impl<F> Map for FnMap<F>
where
    F: Fn(&Vector) -> Result<Vector> + Send + Sync,
{
    fn apply(&self, x: &Vector) -> Result<Vector> {
        (self.0)(x)
    }
}

/// Exactly known fixed points of an operator.
#[derive(Clone, Debug, PartialEq)]
pub enum KnownFix {
    Affine(AffineSet),
    Points(Vec<Vector>),
}

impl KnownFix {
    fn same_as(&self, other: &KnownFix, tol: f64) -> bool {
        match (self, other) {
            (KnownFix::Affine(a), KnownFix::Affine(b)) => a.same_set(b, tol) && b.same_set(a, tol),
            (KnownFix::Points(a), KnownFix::Points(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(p, q)| (p - q).norm() <= tol)
            }
            _ => false,
        }
    }

    /// Some point of the set.
    pub fn representative(&self) -> Option<Vector> {
        match self {
            KnownFix::Affine(a) => Some(a.anchor().clone()),
            KnownFix::Points(ps) => ps.first().cloned(),
        }
    }
}

/// A map `R^d -> R^d` plus what is known about it.
#[derive(Clone)]
pub struct Operator {
    map: Arc<dyn Map>,
    dim: usize,
    lipschitz: Option<f64>,
    firm: bool,
    known_fix: Option<KnownFix>,
    label: String,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Operator")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .field("firmly_nonexpansive", &self.firm)
            .field("known_fix", &self.known_fix)
            .finish()
    }
}

impl Operator {
    pub fn new(dim: usize, label: impl Into<String>, map: impl Map + 'static) -> Self {
        Operator {
            map: Arc::new(map),
            dim,
            lipschitz: None,
            firm: false,
            known_fix: None,
            label: label.into(),
        }
    }

    pub fn from_fn<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Vector) -> Result<Vector> + Send + Sync + 'static,
    {
        Operator::new(dim, label, FnMap(f))
    }

    pub fn with_lipschitz(mut self, bound: f64) -> Self {
        self.lipschitz = Some(bound);
        self
    }

    pub fn firmly_nonexpansive(mut self) -> Self {
        self.firm = true;
        self
    }

    pub fn with_known_fix(mut self, fix: KnownFix) -> Self {
        self.known_fix = Some(fix);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn is_firmly_nonexpansive(&self) -> bool {
        self.firm
    }

    pub fn known_fix(&self) -> Option<&KnownFix> {
        self.known_fix.as_ref()
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        check_dims(self.dim, x.len())?;
        self.map.apply(x)
    }

    /// `|Tx - x|`.
    pub fn displacement(&self, x: &Vector) -> Result<f64> {
        Ok((self.apply(x)? - x).norm())
    }

    pub fn identity(dim: usize) -> Self {
        Operator::from_fn(dim, "id", |x| Ok(x.clone()))
            .with_lipschitz(1.0)
            .firmly_nonexpansive()
            .with_known_fix(KnownFix::Affine(AffineSet::whole_space(dim)))
    }

    /// `x -> M x + b`. The fixed-point set is attached when `M` is
    /// nonexpansive and the set is nonempty.
    pub fn affine(m: Matrix, b: Vector) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid("affine operator needs a square matrix"));
        }
        check_dims(m.nrows(), b.len())?;
        let dim = b.len();
        let lip = operator_norm(&m);
        let fix = if lip <= 1.0 + 1e-10 {
            solve_affine_fixed_set(&m, &b)?
        } else {
            None
        };
        let mut op = Operator::from_fn(dim, "affine", move |x| Ok(&m * x + &b)).with_lipschitz(lip);
        if let Some(set) = fix {
            op = op.with_known_fix(KnownFix::Affine(set));
        }
        Ok(op)
    }

    /// Rotation of the plane by `angle` radians.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let m = Matrix::from_row_slice(2, 2, &[c, -s, s, c]);
        Operator::affine(m, Vector::zeros(2))
            .expect("rotation is well formed")
            .with_lipschitz(1.0)
            .with_label(format!("rot({angle})"))
    }

    /// The constant map `x -> u`.
    pub fn constant(u: Vector) -> Self {
        let dim = u.len();
        let fix = KnownFix::Points(vec![u.clone()]);
        Operator::from_fn(dim, "const", move |_| Ok(u.clone()))
            .with_lipschitz(0.0)
            .with_known_fix(fix)
    }
}

/// `a ∘ b`.
pub fn compose(a: &Operator, b: &Operator) -> Result<Operator> {
    check_dims(a.dim, b.dim)?;
    let (fa, fb) = (a.map.clone(), b.map.clone());
    let mut op = Operator::from_fn(a.dim, format!("{}∘{}", a.label, b.label), move |x| {
        fa.apply(&fb.apply(x)?)
    });
    if let (Some(la), Some(lb)) = (a.lipschitz, b.lipschitz) {
        op = op.with_lipschitz(la * lb);
    }
    if let (Some(fa), Some(fb)) = (&a.known_fix, &b.known_fix) {
        if fa.same_as(fb, 1e-9) {
            op = op.with_known_fix(fa.clone());
        }
    }
    Ok(op)
}

/// `x -> sum_i w_i T_i x` with positive weights summing to one.
pub fn convex_combination(ops: &[Operator], weights: &[f64]) -> Result<Operator> {
    if ops.is_empty() || ops.len() != weights.len() {
        return Err(Error::invalid("need one weight per operator and at least one operator"));
    }
    let dim = ops[0].dim;
    for op in ops {
        check_dims(dim, op.dim)?;
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::invalid("convex combination weights must be positive"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "convex combination weights sum to {sum}, not 1"
        )));
    }
    let maps: Vec<Arc<dyn Map>> = ops.iter().map(|o| o.map.clone()).collect();
    let w = weights.to_vec();
    let label = format!(
        "Σ[{}]",
        ops.iter().map(|o| o.label.as_str()).collect::<Vec<_>>().join(",")
    );
    let mut op = Operator::from_fn(dim, label, move |x| {
        let mut acc = Vector::zeros(x.len());
        for (m, wi) in maps.iter().zip(&w) {
            acc.axpy(*wi, &m.apply(x)?, 1.0);
        }
        Ok(acc)
    });
    if ops.iter().all(|o| o.lipschitz.is_some()) {
        let l = ops
            .iter()
            .zip(weights)
            .map(|(o, w)| w * o.lipschitz.unwrap())
            .sum();
        op = op.with_lipschitz(l);
    }
    if ops.iter().all(|o| o.firm) {
        op = op.firmly_nonexpansive();
    }
    if let Some(first) = &ops[0].known_fix {
        if ops
            .iter()
            .all(|o| o.known_fix.as_ref().is_some_and(|k| k.same_as(first, 1e-9)))
        {
            op = op.with_known_fix(first.clone());
        }
    }
    Ok(op)
}

/// `x -> (1 - λ) x + λ T x`, `λ ∈ (0, 1)`.
pub fn averaged(t: &Operator, lambda: f64) -> Result<Operator> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("averaging weight {lambda} not in (0,1)")));
    }
    let inner = t.map.clone();
    let mut op = Operator::from_fn(t.dim, format!("avg({},{lambda})", t.label), move |x| {
        let mut y = inner.apply(x)? * lambda;
        y.axpy(1.0 - lambda, x, 1.0);
        Ok(y)
    });
    if let Some(l) = t.lipschitz {
        op = op.with_lipschitz(1.0 - lambda + lambda * l);
        if t.firm || (l <= 1.0 && lambda <= 0.5) {
            op = op.firmly_nonexpansive();
        }
    }
    if let Some(fix) = &t.known_fix {
        op = op.with_known_fix(fix.clone());
    }
    Ok(op)
}

/// An `α`-contraction. `α = 0` is allowed so constant anchors can be
/// declared with their exact modulus.
#[derive(Clone, Debug)]
pub struct ContractionSpec {
    base: Operator,
    alpha: f64,
}

impl ContractionSpec {
    pub fn new(base: Operator, alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::NonContraction(format!("modulus {alpha} not in [0,1)")));
        }
        if let Some(l) = base.lipschitz {
            if l > alpha + 1e-12 {
                return Err(Error::NonContraction(format!(
                    "declared Lipschitz bound {l} exceeds modulus {alpha}"
                )));
            }
        }
        let base = base.with_lipschitz(alpha);
        Ok(ContractionSpec { base, alpha })
    }

    /// `x -> M x + b` with `|M| <= alpha`.
    pub fn affine(alpha: f64, m: Matrix, b: Vector) -> Result<Self> {
        let norm = operator_norm(&m);
        if norm > alpha + 1e-12 {
            return Err(Error::NonContraction(format!(
                "operator norm {norm} exceeds modulus {alpha}"
            )));
        }
        let dim = b.len();
        check_dims(m.nrows(), dim)?;
        let op = Operator::from_fn(dim, "contraction_affine", move |x| Ok(&m * x + &b));
        ContractionSpec::new(op, alpha)
    }

    pub fn constant(u: Vector) -> Self {
        ContractionSpec::new(Operator::constant(u), 0.0).expect("constant maps contract")
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn operator(&self) -> &Operator {
        &self.base
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        self.base.apply(x)
    }
}

pub type ModulusWitness = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A Meir-Keeler contraction with an optional `ε -> δ(ε)` witness.
#[derive(Clone)]
pub struct MeirKeelerSpec {
    base: Operator,
    modulus_witness: Option<ModulusWitness>,
}

impl fmt::Debug for MeirKeelerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeirKeelerSpec")
            .field("base", &self.base)
            .field("has_witness", &self.modulus_witness.is_some())
            .finish()
    }
}

impl MeirKeelerSpec {
    pub fn new(base: Operator, modulus_witness: Option<ModulusWitness>) -> Self {
        MeirKeelerSpec {
            base,
            modulus_witness,
        }
    }

    /// `x -> a + (x - c)(1 - s/(2(1+s)))`, `s = |x - c|`.
    ///
    /// The radial profile has derivative one at `s = 0`, so the map is not a
    /// strict contraction near `c`, yet it shrinks every distance strictly.
    pub fn radial(anchor: Vector, center: Vector) -> Result<Self> {
        check_dims(anchor.len(), center.len())?;
        let dim = anchor.len();
        let op = Operator::from_fn(dim, "mkc_radial", move |x| {
            let v = x - &center;
            let s = v.norm();
            Ok(&anchor + v * radial_factor(s))
        })
        .with_lipschitz(1.0);
        Ok(MeirKeelerSpec::new(op, Some(Arc::new(radial_delta))))
    }

    pub fn operator(&self) -> &Operator {
        &self.base
    }

    pub fn witness(&self) -> Option<&ModulusWitness> {
        self.modulus_witness.as_ref()
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        self.base.apply(x)
    }
}

/// Scaling factor `phi(s) = 1 - s/(2(1+s))` of the radial map.
pub fn radial_factor(s: f64) -> f64 {
    1.0 - s / (2.0 * (1.0 + s))
}

/// The Jacobian of the radial map has norm `phi(s)`, which decreases in `s`.
/// On a segment of length `e`, at most half lies within `e/4` of the center,
/// so distances near `e` shrink by at least `(1 + phi(e/4))/2`.
fn radial_delta(eps: f64) -> f64 {
    let k = radial_factor(eps / 4.0);
    0.5 * eps * (1.0 - k) / (1.0 + k)
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    pub bound: f64,
    pub max_ratio: f64,
    pub trials: usize,
    pub pass: bool,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
}

/// Largest sampled `|Tx - Ty| / |x - y|` against `bound + tol`.
pub fn check_lipschitz(
    t: &Operator,
    bound: f64,
    sampler: &mut dyn PairSampler,
    trials: usize,
    tol: f64,
) -> Result<LipschitzReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let mut max_ratio = 0.0_f64;
    let mut worst = None;
    for _ in 0..trials {
        let (x, y) = sampler.pair(t.dim);
        let d = (&x - &y).norm();
        if d < MIN_PAIR_DISTANCE {
            continue;
        }
        let ratio = (t.apply(&x)? - t.apply(&y)?).norm() / d;
        if ratio > max_ratio {
            max_ratio = ratio;
            worst = Some((x.iter().copied().collect(), y.iter().copied().collect()));
        }
    }
    Ok(LipschitzReport {
        bound,
        max_ratio,
        trials,
        pass: max_ratio <= bound + tol,
        worst_pair: worst,
    })
}

pub fn check_nonexpansive(
    t: &Operator,
    sampler: &mut dyn PairSampler,
    trials: usize,
    tol: f64,
) -> Result<LipschitzReport> {
    check_lipschitz(t, 1.0, sampler, trials, tol)
}

pub fn check_contraction(
    f: &ContractionSpec,
    sampler: &mut dyn PairSampler,
    trials: usize,
    tol: f64,
) -> Result<LipschitzReport> {
    check_lipschitz(&f.base, f.alpha, sampler, trials, tol)
}

#[derive(Clone, Debug, Serialize)]
pub struct AttractingReport {
    pub min_gap: f64,
    pub samples_used: usize,
    pub skipped_near_fix: usize,
    pub pass: bool,
    pub worst_point: Option<Vec<f64>>,
}

/// Minimum of `|x - p| - |Tx - p|` over sampled `x` outside `Fix(T)` and
/// the supplied fixed points `p`.
pub fn check_attracting(
    t: &Operator,
    fix_points: &[Vector],
    sampler: &mut dyn PairSampler,
    trials: usize,
    tol: f64,
) -> Result<AttractingReport> {
    if fix_points.is_empty() || trials == 0 {
        return Err(Error::invalid("need fixed points and at least one trial"));
    }
    for p in fix_points {
        let r = t.displacement(p)?;
        if r > FIX_TOL * (1.0 + p.norm()) {
            return Err(Error::invalid(format!(
                "supplied point is not fixed (displacement {r:e})"
            )));
        }
    }
    let mut min_gap = f64::INFINITY;
    let mut used = 0;
    let mut skipped = 0;
    let mut worst = None;
    for _ in 0..trials {
        let x = sampler.point(t.dim);
        let tx = t.apply(&x)?;
        if (&tx - &x).norm() < ATTRACTING_MIN_DISPLACEMENT {
            skipped += 1;
            continue;
        }
        used += 1;
        for p in fix_points {
            let gap = (&x - p).norm() - (&tx - p).norm();
            if gap < min_gap {
                min_gap = gap;
                worst = Some(x.iter().copied().collect());
            }
        }
    }
    Ok(AttractingReport {
        min_gap,
        samples_used: used,
        skipped_near_fix: skipped,
        pass: used > 0 && min_gap > tol,
        worst_point: worst,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MkcStatus {
    Pass,
    Fail,
    WitnessRequired,
}

#[derive(Clone, Debug, Serialize)]
pub struct MkcEpsilonRow {
    pub eps: f64,
    pub delta: f64,
    pub pairs_tested: usize,
    pub max_image_distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MkcViolation {
    pub eps: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub image_distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeirKeelerReport {
    pub status: MkcStatus,
    pub rows: Vec<MkcEpsilonRow>,
    pub first_violation: Option<MkcViolation>,
}

/// For each `ε`, samples pairs with `|x - y| < ε + δ(ε)` and checks
/// `|Φx - Φy| < ε`.
pub fn check_meir_keeler(
    phi: &MeirKeelerSpec,
    eps_grid: &[f64],
    sampler: &mut dyn PairSampler,
    trials: usize,
) -> Result<MeirKeelerReport> {
    if eps_grid.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("epsilon grid must be positive"));
    }
    let Some(witness) = &phi.modulus_witness else {
        return Ok(MeirKeelerReport {
            status: MkcStatus::WitnessRequired,
            rows: Vec::new(),
            first_violation: None,
        });
    };
    let dim = phi.base.dim;
    let mut rows = Vec::with_capacity(eps_grid.len());
    let mut first_violation = None;
    for &eps in eps_grid {
        let delta = witness(eps);
        if !(delta > 0.0) {
            return Err(Error::invalid(format!("witness returned δ = {delta} for ε = {eps}")));
        }
        let mut max_image = 0.0_f64;
        let mut tested = 0;
        for _ in 0..trials {
            let (x, y) = sampler.pair_within(dim, eps + delta);
            if (&x - &y).norm() >= eps + delta {
                continue;
            }
            tested += 1;
            let img = (phi.apply(&x)? - phi.apply(&y)?).norm();
            max_image = max_image.max(img);
            if img >= eps && first_violation.is_none() {
                first_violation = Some(MkcViolation {
                    eps,
                    x: x.iter().copied().collect(),
                    y: y.iter().copied().collect(),
                    image_distance: img,
                });
            }
        }
        rows.push(MkcEpsilonRow {
            eps,
            delta,
            pairs_tested: tested,
            max_image_distance: max_image,
        });
    }
    let status = if first_violation.is_some() {
        MkcStatus::Fail
    } else {
        MkcStatus::Pass
    };
    Ok(MeirKeelerReport {
        status,
        rows,
        first_violation,
    })
}

/// Largest relative residual `|Tp - p| / (1 + |p|)` over declared fixed
/// points; affine sets are probed at `samples` random points within
/// `radius` of their anchor.
pub fn check_known_fix<R: rand::Rng + ?Sized>(
    t: &Operator,
    rng: &mut R,
    samples: usize,
    radius: f64,
) -> Result<Option<f64>> {
    let Some(fix) = &t.known_fix else {
        return Ok(None);
    };
    let points: Vec<Vector> = match fix {
        KnownFix::Points(ps) => ps.clone(),
        KnownFix::Affine(a) => (0..samples.max(1))
            .map(|_| {
                let coeffs: Vec<f64> = (0..a.dim_subspace())
                    .map(|_| rng.gen_range(-radius..=radius))
                    .collect();
                a.point_at(&coeffs).expect("coefficient count matches")
            })
            .collect(),
    };
    let mut worst = 0.0_f64;
    for p in &points {
        worst = worst.max(t.displacement(p)? / (1.0 + p.norm()));
    }
    Ok(Some(worst))
}
