//! Checks on a finished run: the variational inequality characterizing the
//! limit, the H2,p tail quantity, the scalar recursion that controls
//! `|x_n - p|^2`, and residual series.

use rand::Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::convex_sets::ConvexSet;
use crate::error::{Error, Result};
use crate::hilbert::{check_dims, Vector};
use crate::operators::Operator;
use crate::sampling;

const DYKSTRA_TOL: f64 = 1e-14;
const DYKSTRA_MAX: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FixSetSpec {
    Set(ConvexSet),
    Intersection(Vec<ConvexSet>),
    Points(Vec<Vec<f64>>),
}

/// A description of the common fixed point set `F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FixSetSpec", into = "FixSetSpec")]
pub enum FixSet {
    Set(ConvexSet),
    /// Projection by Dykstra's algorithm.
    Intersection(Vec<ConvexSet>),
    /// A finite set (not convex in general; only used for isolated fixed points).
    Points(Vec<Vector>),
}

impl TryFrom<FixSetSpec> for FixSet {
    type Error = Error;

    fn try_from(spec: FixSetSpec) -> Result<Self> {
        let out = match spec {
            FixSetSpec::Set(s) => FixSet::Set(s),
            FixSetSpec::Intersection(sets) => {
                let first = sets
                    .first()
                    .ok_or_else(|| Error::invalid("intersection needs at least one set"))?;
                for s in &sets {
                    check_dims(first.dim(), s.dim())?;
                }
                FixSet::Intersection(sets)
            }
            FixSetSpec::Points(pts) => {
                let first = pts.first().ok_or_else(|| Error::invalid("point list is empty"))?;
                for p in &pts {
                    check_dims(first.len(), p.len())?;
                }
                FixSet::Points(pts.into_iter().map(Vector::from_vec).collect())
            }
        };
        Ok(out)
    }
}

impl From<FixSet> for FixSetSpec {
    fn from(f: FixSet) -> Self {
        match f {
            FixSet::Set(s) => FixSetSpec::Set(s),
            FixSet::Intersection(s) => FixSetSpec::Intersection(s),
            FixSet::Points(p) => FixSetSpec::Points(p.into_iter().map(|v| v.iter().copied().collect()).collect()),
        }
    }
}

impl FixSet {
    pub fn dim(&self) -> usize {
        match self {
            FixSet::Set(s) => s.dim(),
            FixSet::Intersection(s) => s[0].dim(),
            FixSet::Points(p) => p[0].len(),
        }
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        check_dims(self.dim(), x.len())?;
        match self {
            FixSet::Set(s) => s.project(x),
            FixSet::Intersection(sets) => dykstra(sets, x),
            FixSet::Points(pts) => Ok(pts
                .iter()
                .min_by(|a, b| (*a - x).norm().total_cmp(&(*b - x).norm()))
                .expect("nonempty")
                .clone()),
        }
    }

    pub fn distance(&self, x: &Vector) -> Result<f64> {
        Ok((self.project(x)? - x).norm())
    }

    /// `sup { <w, p> : p in F }` when it can be computed exactly.
    fn support(&self, w: &Vector) -> Result<Option<f64>> {
        match self {
            FixSet::Set(s) => s.support(w).map(Some),
            FixSet::Points(pts) => Ok(Some(pts.iter().map(|p| p.dot(w)).fold(f64::NEG_INFINITY, f64::max))),
            FixSet::Intersection(_) => Ok(None),
        }
    }

    /// Points of `F`: random points of a ball of radius `radius` around the
    /// point of `F` closest to the origin, projected onto `F`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize, radius: f64) -> Result<Vec<Vector>> {
        match self {
            FixSet::Set(s) => Ok((0..count).map(|_| s.sample(rng, radius)).collect()),
            FixSet::Points(p) => Ok(p.clone()),
            FixSet::Intersection(sets) => {
                let base = dykstra(sets, &Vector::zeros(self.dim()))?;
                (0..count)
                    .map(|_| dykstra(sets, &sampling::in_ball(rng, &base, radius)))
                    .collect()
            }
        }
    }
}

/// Dykstra's alternating projections onto an intersection of convex sets.
pub fn dykstra(sets: &[ConvexSet], x: &Vector) -> Result<Vector> {
    let mut y = x.clone();
    let mut incr = vec![Vector::zeros(x.len()); sets.len()];
    for _ in 0..DYKSTRA_MAX {
        let prev = y.clone();
        for (s, p) in sets.iter().zip(incr.iter_mut()) {
            let z = s.project(&(&y + &*p))?;
            *p += &y - &z;
            y = z;
        }
        if (&y - &prev).norm() <= DYKSTRA_TOL * (1.0 + y.norm()) {
            return Ok(y);
        }
    }
    Err(Error::invalid(
        "alternating projections did not settle; the intersection may be empty",
    ))
}

fn null_if_infinite<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_finite() => s.serialize_some(x),
        _ => s.serialize_none(),
    }
}

/// Outcome of the check `max_{p ∈ F} <x - f(x), x - p> <= tol` at a candidate limit.
#[derive(Clone, Debug, Serialize)]
pub struct LimitReport {
    pub x_tilde: Vec<f64>,
    /// Largest value of `<x - f(x), x - p>`; `null` when unbounded.
    #[serde(serialize_with = "null_if_infinite")]
    pub vi_max_violation: Option<f64>,
    /// Size of the component of `x - f(x)` along an affine `F`.
    pub direction_residual: Option<f64>,
    /// Whether the supremum was computed exactly or over samples.
    pub exact: bool,
    pub samples: usize,
    pub tol: f64,
    pub distance_to_f: f64,
    pub fixres: Option<f64>,
    pub h2p_tail: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViOptions {
    #[serde(default = "default_vi_tol")]
    pub tol: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_vi_tol() -> f64 {
    1e-6
}
fn default_samples() -> usize {
    sampling::DEFAULT_TRIALS
}
fn default_radius() -> f64 {
    10.0
}
fn default_seed() -> u64 {
    sampling::DEFAULT_SEED
}

impl Default for ViOptions {
    fn default() -> Self {
        ViOptions {
            tol: default_vi_tol(),
            samples: default_samples(),
            radius: default_radius(),
            seed: default_seed(),
        }
    }
}

/// Checks the variational inequality that singles out the limit of the
/// iteration among the points of `F`.
///
/// An affine `F` is unbounded in its directions, so the check reduces to the
/// component of `w = x - f(x)` along those directions plus one inequality at
/// the anchor. Sets with a finite support function are maximized exactly;
/// intersections are sampled.
pub fn check_vi_limit(x_tilde: &Vector, f: &Operator, fix: &FixSet, opts: &ViOptions) -> Result<LimitReport> {
    check_dims(fix.dim(), x_tilde.len())?;
    let w = x_tilde - f.apply(x_tilde)?;
    let affine = match fix {
        FixSet::Set(s) => s.as_affine(),
        _ => None,
    };
    let mut direction_residual = None;
    let mut exact = true;
    let mut samples = 0;
    let value = if let Some(a) = affine {
        let dr = a.direction_component(&w)?.norm();
        direction_residual = Some(dr);
        w.dot(&(x_tilde - a.anchor()))
    } else if let Some(sup) = fix.support(&(-&w))? {
        w.dot(x_tilde) + sup
    } else {
        exact = false;
        let mut rng = sampling::rng(opts.seed);
        let mut pts = fix.sample(&mut rng, opts.samples, opts.radius)?;
        pts.push(fix.project(x_tilde)?);
        samples = pts.len();
        pts.iter().map(|p| w.dot(&(x_tilde - p))).fold(f64::NEG_INFINITY, f64::max)
    };
    let pass = value <= opts.tol && direction_residual.is_none_or(|d| d <= opts.tol);
    Ok(LimitReport {
        x_tilde: x_tilde.iter().copied().collect(),
        vi_max_violation: Some(value),
        direction_residual,
        exact,
        samples,
        tol: opts.tol,
        distance_to_f: fix.distance(x_tilde)?,
        fixres: None,
        h2p_tail: None,
        pass,
    })
}

/// `max <f(p) - p, x_n - p>` over the last `tail_fraction` of the iterates.
/// H2,p asks for the limsup of this quantity to be nonpositive.
pub fn h2p_tail(iterates: &[Vector], f: &Operator, p: &Vector, tail_fraction: f64) -> Result<f64> {
    if iterates.is_empty() {
        return Err(Error::invalid("no iterates"));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::invalid("tail fraction must lie in (0,1]"));
    }
    check_dims(p.len(), iterates[0].len())?;
    let v = f.apply(p)? - p;
    let start = ((iterates.len() as f64) * (1.0 - tail_fraction)).floor() as usize;
    Ok(iterates[start.min(iterates.len() - 1)..]
        .iter()
        .map(|x| v.dot(&(x - p)))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `s_{n+1} = (1 - α_n) s_n + α_n β_n + α_n γ_n`, returning `s_0 .. s_len`.
pub fn xu_recursion(
    s0: f64,
    alpha: impl Fn(usize) -> f64,
    beta: impl Fn(usize) -> f64,
    gamma: impl Fn(usize) -> f64,
    len: usize,
) -> Vec<f64> {
    let mut s = Vec::with_capacity(len + 1);
    s.push(s0);
    let mut cur = s0;
    for n in 0..len {
        let a = alpha(n);
        cur = (1.0 - a) * cur + a * beta(n) + a * gamma(n);
        s.push(cur);
    }
    s
}

/// First index where `actual` exceeds `envelope` by more than `tol`.
pub fn first_excess(actual: &[f64], envelope: &[f64], tol: f64) -> Option<usize> {
    actual
        .iter()
        .zip(envelope)
        .position(|(a, e)| *a > e + tol)
}

/// `|x_{n+shift} - x_n|` for every `n` where both exist.
pub fn residual_series(iterates: &[Vector], shift: usize) -> Vec<f64> {
    if shift == 0 || iterates.len() <= shift {
        return Vec::new();
    }
    iterates
        .iter()
        .zip(&iterates[shift..])
        .map(|(a, b)| (b - a).norm())
        .collect()
}
