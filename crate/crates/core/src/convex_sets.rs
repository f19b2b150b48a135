//! Closed convex sets with exact metric projections.
//!
//! In a Hilbert space the sunny nonexpansive retraction onto a closed convex
//! set is the metric projection, characterized by the obtuse-angle condition
//! `<x - P x, y - P x> <= 0` for every `y` in the set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{check_dims, vector, AffineSet, Vector};
use crate::operators::{KnownFix, Map, Operator};
use crate::sampling;

pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// JSON description of a convex set, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexSetSpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x : <normal, x> <= offset}`
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// `{x : <normal, x> = offset}`
    Hyperplane { normal: Vec<f64>, offset: f64 },
    Affine {
        anchor: Vec<f64>,
        #[serde(default)]
        basis: Vec<Vec<f64>>,
    },
    /// Probability simplex `{x >= 0, sum x = 1}`.
    Simplex { dim: usize },
    WholeSpace { dim: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Box { lo: Vector, hi: Vector },
    Ball { center: Vector, radius: f64 },
    Halfspace { normal: Vector, offset: f64 },
    Hyperplane { normal: Vector, offset: f64 },
    Affine(AffineSet),
    Simplex { dim: usize },
    WholeSpace { dim: usize },
}

/// A nonempty closed convex subset of `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConvexSetSpec", into = "ConvexSetSpec")]
pub struct ConvexSet {
    shape: Shape,
}

impl TryFrom<ConvexSetSpec> for ConvexSet {
    type Error = Error;

    fn try_from(spec: ConvexSetSpec) -> Result<Self> {
        match spec {
            ConvexSetSpec::Box { lo, hi } => ConvexSet::boxed(vector(lo)?, vector(hi)?),
            ConvexSetSpec::Ball { center, radius } => ConvexSet::ball(vector(center)?, radius),
            ConvexSetSpec::Halfspace { normal, offset } => {
                ConvexSet::halfspace(vector(normal)?, offset)
            }
            ConvexSetSpec::Hyperplane { normal, offset } => {
                ConvexSet::hyperplane(vector(normal)?, offset)
            }
            ConvexSetSpec::Affine { anchor, basis } => {
                let set = AffineSet::try_from(crate::hilbert::AffineSetSpec { anchor, basis })?;
                Ok(ConvexSet::affine(set))
            }
            ConvexSetSpec::Simplex { dim } => ConvexSet::simplex(dim),
            ConvexSetSpec::WholeSpace { dim } => ConvexSet::whole_space(dim),
        }
    }
}

fn coords(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

impl From<ConvexSet> for ConvexSetSpec {
    fn from(set: ConvexSet) -> Self {
        match set.shape {
            Shape::Box { lo, hi } => ConvexSetSpec::Box {
                lo: coords(&lo),
                hi: coords(&hi),
            },
            Shape::Ball { center, radius } => ConvexSetSpec::Ball {
                center: coords(&center),
                radius,
            },
            Shape::Halfspace { normal, offset } => ConvexSetSpec::Halfspace {
                normal: coords(&normal),
                offset,
            },
            Shape::Hyperplane { normal, offset } => ConvexSetSpec::Hyperplane {
                normal: coords(&normal),
                offset,
            },
            Shape::Affine(a) => {
                let spec = crate::hilbert::AffineSetSpec::from(a);
                ConvexSetSpec::Affine {
                    anchor: spec.anchor,
                    basis: spec.basis,
                }
            }
            Shape::Simplex { dim } => ConvexSetSpec::Simplex { dim },
            Shape::WholeSpace { dim } => ConvexSetSpec::WholeSpace { dim },
        }
    }
}

impl ConvexSet {
    pub fn boxed(lo: Vector, hi: Vector) -> Result<Self> {
        check_dims(lo.len(), hi.len())?;
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::invalid("box requires lo <= hi componentwise"));
        }
        Ok(ConvexSet {
            shape: Shape::Box { lo, hi },
        })
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::invalid("ball radius must be finite and nonnegative"));
        }
        Ok(ConvexSet {
            shape: Shape::Ball { center, radius },
        })
    }

    pub fn unit_ball(dim: usize) -> Self {
        ConvexSet {
            shape: Shape::Ball {
                center: Vector::zeros(dim),
                radius: 1.0,
            },
        }
    }

    pub fn halfspace(normal: Vector, offset: f64) -> Result<Self> {
        if normal.norm() == 0.0 || !offset.is_finite() {
            return Err(Error::invalid("halfspace needs a nonzero normal and finite offset"));
        }
        Ok(ConvexSet {
            shape: Shape::Halfspace { normal, offset },
        })
    }

    pub fn hyperplane(normal: Vector, offset: f64) -> Result<Self> {
        if normal.norm() == 0.0 || !offset.is_finite() {
            return Err(Error::invalid("hyperplane needs a nonzero normal and finite offset"));
        }
        Ok(ConvexSet {
            shape: Shape::Hyperplane { normal, offset },
        })
    }

    pub fn affine(set: AffineSet) -> Self {
        ConvexSet {
            shape: Shape::Affine(set),
        }
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("simplex dimension must be positive"));
        }
        Ok(ConvexSet {
            shape: Shape::Simplex { dim },
        })
    }

    pub fn whole_space(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(ConvexSet {
            shape: Shape::WholeSpace { dim },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Box { lo, .. } => lo.len(),
            Shape::Ball { center, .. } => center.len(),
            Shape::Halfspace { normal, .. } | Shape::Hyperplane { normal, .. } => normal.len(),
            Shape::Affine(a) => a.dim(),
            Shape::Simplex { dim } | Shape::WholeSpace { dim } => *dim,
        }
    }

    pub fn kind(&self) -> &'static str {
        match &self.shape {
            Shape::Box { .. } => "box",
            Shape::Ball { .. } => "ball",
            Shape::Halfspace { .. } => "halfspace",
            Shape::Hyperplane { .. } => "hyperplane",
            Shape::Affine(_) => "affine",
            Shape::Simplex { .. } => "simplex",
            Shape::WholeSpace { .. } => "whole_space",
        }
    }

    /// The set as an affine subspace, when it is one.
    pub fn as_affine(&self) -> Option<AffineSet> {
        match &self.shape {
            Shape::Affine(a) => Some(a.clone()),
            Shape::WholeSpace { dim } => Some(AffineSet::whole_space(*dim)),
            Shape::Hyperplane { normal, offset } => {
                let d = normal.len();
                let unit = normal / normal.norm();
                let point = &unit * (offset / normal.norm());
                // Directions: complete `unit` to a basis and drop it.
                let dirs: Vec<Vector> = (0..d)
                    .map(|i| {
                        let mut e = Vector::zeros(d);
                        e[i] = 1.0;
                        &e - &unit * unit[i]
                    })
                    .collect();
                AffineSet::new(point, &dirs).ok()
            }
            Shape::Box { lo, hi } if lo == hi => Some(AffineSet::point(lo.clone())),
            Shape::Ball { center, radius } if *radius == 0.0 => {
                Some(AffineSet::point(center.clone()))
            }
            _ => None,
        }
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        check_dims(self.dim(), x.len())?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &Vector) -> Vector {
        match &self.shape {
            Shape::Box { lo, hi } => {
                Vector::from_fn(x.len(), |i, _| x[i].clamp(lo[i], hi[i]))
            }
            Shape::Ball { center, radius } => {
                let offset = x - center;
                let dist = offset.norm();
                if dist <= *radius {
                    x.clone()
                } else {
                    center + offset * (radius / dist)
                }
            }
            Shape::Halfspace { normal, offset } => {
                let excess = normal.dot(x) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x - normal * (excess / normal.norm_squared())
                }
            }
            Shape::Hyperplane { normal, offset } => {
                let excess = normal.dot(x) - offset;
                x - normal * (excess / normal.norm_squared())
            }
            Shape::Affine(a) => a.project(x).expect("dimension checked"),
            Shape::Simplex { .. } => project_simplex(x),
            Shape::WholeSpace { .. } => x.clone(),
        }
    }

    pub fn distance(&self, x: &Vector) -> Result<f64> {
        Ok((x - self.project(x)?).norm())
    }

    /// `true` iff the distance from `x` to the set is at most `tol`.
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        x.len() == self.dim() && (x - self.project_unchecked(x)).norm() <= tol
    }

    /// `sup { <w, p> : p in set }`; `+inf` when unbounded in direction `w`.
    pub fn support(&self, w: &Vector) -> Result<f64> {
        check_dims(self.dim(), w.len())?;
        let tiny = 1e-14 * (1.0 + w.norm());
        Ok(match &self.shape {
            Shape::Box { lo, hi } => (0..w.len())
                .map(|i| (w[i] * lo[i]).max(w[i] * hi[i]))
                .sum(),
            Shape::Ball { center, radius } => w.dot(center) + radius * w.norm(),
            Shape::Simplex { .. } => w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Shape::Halfspace { normal, offset } => {
                // Bounded only along nonnegative multiples of the normal.
                let lambda = w.dot(normal) / normal.norm_squared();
                if lambda >= 0.0 && (w - normal * lambda).norm() <= tiny {
                    lambda * offset
                } else {
                    f64::INFINITY
                }
            }
            Shape::Hyperplane { .. } | Shape::Affine(_) | Shape::WholeSpace { .. } => {
                let a = self.as_affine().expect("affine kinds");
                if a.direction_component(w)?.norm() <= tiny {
                    w.dot(a.anchor())
                } else {
                    f64::INFINITY
                }
            }
        })
    }

    /// A random point of the set. Unbounded sets are sampled near the point
    /// of the set closest to the origin, within `radius`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, radius: f64) -> Vector {
        match &self.shape {
            Shape::Box { lo, hi } => Vector::from_fn(lo.len(), |i, _| {
                if lo[i] == hi[i] {
                    lo[i]
                } else {
                    rng.gen_range(lo[i]..=hi[i])
                }
            }),
            Shape::Ball { center, radius: r } => sampling::in_ball(rng, center, *r),
            Shape::Simplex { dim } => {
                let e = Vector::from_fn(*dim, |_, _| -(1.0 - rng.gen::<f64>()).ln());
                let s = e.sum();
                e / s
            }
            _ => {
                let base = self.project_unchecked(&Vector::zeros(self.dim()));
                let p = sampling::in_ball(rng, &base, radius);
                self.project_unchecked(&p)
            }
        }
    }
}

/// Euclidean projection onto the probability simplex by sorting and
/// thresholding.
fn project_simplex(x: &Vector) -> Vector {
    let mut sorted: Vec<f64> = x.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (k as f64 + 1.0);
        if v - t > 0.0 {
            theta = t;
        }
    }
    x.map(|c| (c - theta).max(0.0))
}

struct Projection(ConvexSet);

impl Map for Projection {
    fn apply(&self, x: &Vector) -> Result<Vector> {
        Ok(self.0.project_unchecked(x))
    }
}

/// The metric projection as a firmly nonexpansive operator.
pub fn projection_operator(set: &ConvexSet) -> Operator {
    let mut op = Operator::new(
        set.dim(),
        format!("P[{}]", set.kind()),
        Projection(set.clone()),
    )
    .with_lipschitz(1.0)
    .firmly_nonexpansive();
    if let Some(a) = set.as_affine() {
        op = op.with_known_fix(KnownFix::Affine(a));
    }
    op
}
