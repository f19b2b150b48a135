//! Seeded point and pair sources for the randomized property checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::hilbert::Vector;

pub const DEFAULT_SEED: u64 = 0x5eed_0f_1e1d;
pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_TOL: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform direction on the unit sphere of `R^dim`.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let g = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n > 1e-12 {
            return g / n;
        }
    }
}

/// Uniform point in the closed ball of the given center and radius.
pub fn in_ball<R: Rng + ?Sized>(rng: &mut R, center: &Vector, radius: f64) -> Vector {
    let dim = center.len();
    let u: f64 = rng.gen();
    let r = radius * u.powf(1.0 / dim as f64);
    center + unit_direction(rng, dim) * r
}

/// Source of sample points and point pairs.
pub trait PairSampler {
    fn point(&mut self, dim: usize) -> Vector;

    fn pair(&mut self, dim: usize) -> (Vector, Vector) {
        (self.point(dim), self.point(dim))
    }

    /// A pair at distance strictly less than `radius`.
    fn pair_within(&mut self, dim: usize, radius: f64) -> (Vector, Vector);
}

/// Uniform samples from the box `[lo, hi]^dim`.
#[derive(Debug, Clone)]
pub struct BoxSampler {
    rng: ChaCha8Rng,
    lo: f64,
    hi: f64,
}

impl BoxSampler {
    pub fn new(seed: u64, lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "empty sampling box");
        BoxSampler {
            rng: rng(seed),
            lo,
            hi,
        }
    }

    /// Box `[-radius, radius]^dim`.
    pub fn symmetric(seed: u64, radius: f64) -> Self {
        Self::new(seed, -radius, radius)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

impl PairSampler for BoxSampler {
    fn point(&mut self, dim: usize) -> Vector {
        let (lo, hi) = (self.lo, self.hi);
        Vector::from_fn(dim, |_, _| self.rng.gen_range(lo..=hi))
    }

    fn pair_within(&mut self, dim: usize, radius: f64) -> (Vector, Vector) {
        let x = self.point(dim);
        let step = unit_direction(&mut self.rng, dim) * (radius * self.rng.gen::<f64>());
        let (lo, hi) = (self.lo, self.hi);
        // Clamping into the box can only shrink the distance.
        let y = (&x + step).map(|c| c.clamp(lo, hi));
        (x, y)
    }
}

/// Replays an explicit list of points; pairs are consecutive entries.
#[derive(Debug, Clone)]
pub struct PointListSampler {
    points: Vec<Vector>,
    next: usize,
}

impl PointListSampler {
    pub fn new(points: Vec<Vector>) -> Self {
        assert!(!points.is_empty(), "point list sampler needs points");
        PointListSampler { points, next: 0 }
    }
}

impl PairSampler for PointListSampler {
    fn point(&mut self, dim: usize) -> Vector {
        let p = self.points[self.next % self.points.len()].clone();
        self.next += 1;
        assert_eq!(p.len(), dim, "sample point has the wrong dimension");
        p
    }

    fn pair_within(&mut self, dim: usize, radius: f64) -> (Vector, Vector) {
        for _ in 0..self.points.len() {
            let (x, y) = self.pair(dim);
            if (&x - &y).norm() < radius {
                return (x, y);
            }
        }
        let x = self.point(dim);
        (x.clone(), x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_sampler_is_deterministic() {
        let mut a = BoxSampler::symmetric(7, 2.0);
        let mut b = BoxSampler::symmetric(7, 2.0);
        for _ in 0..10 {
            assert_eq!(a.point(3), b.point(3));
        }
    }

    #[test]
    fn pairs_within_radius() {
        let mut s = BoxSampler::new(1, 0.0, 1.0);
        for _ in 0..1000 {
            let (x, y) = s.pair_within(2, 0.1);
            assert!((&x - &y).norm() < 0.1);
            assert!(y.iter().all(|c| (0.0..=1.0).contains(c)));
        }
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut r = rng(3);
        let c = Vector::from_vec(vec![1.0, -1.0, 0.5]);
        for _ in 0..500 {
            assert!((in_ball(&mut r, &c, 0.7) - &c).norm() <= 0.7 + 1e-12);
        }
    }
}
