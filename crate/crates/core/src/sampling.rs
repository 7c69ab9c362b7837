//! Deterministic point sets in a closed ball.
//!
//! * `n = 1`: uniform grid including both endpoints.
//! * `n = 2, 3`: tensor grid over the bounding cube, restricted to the ball.
//! * `n > 3` (or when the tensor grid exceeds the point budget): shifted
//!   Halton points mapped into the ball via a Gaussian direction and a
//!   `u^(1/n)` radius.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Hard cap on the number of sample points.
pub const MAX_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone)]
enum Layout {
    Grid1 {
        lo: f64,
        hi: f64,
        count: usize,
    },
    Tensor {
        per_axis: usize,
        total: usize,
    },
    Halton {
        count: usize,
        bases: Vec<u64>,
        shift: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct BallSampler {
    center: DVector<f64>,
    radius: f64,
    layout: Layout,
}

impl BallSampler {
    /// `per_axis >= 2` is assumed; `budget` is clamped to [`MAX_SAMPLES`].
    pub fn new(
        center: &DVector<f64>,
        radius: f64,
        per_axis: usize,
        budget: usize,
        seed: u64,
    ) -> Self {
        let n = center.len();
        let budget = budget.clamp(1, MAX_SAMPLES);
        let tensor_total = (per_axis as u64)
            .checked_pow(n as u32)
            .filter(|&t| t <= budget as u64);
        let layout = match (n, tensor_total) {
            (1, _) => Layout::Grid1 {
                lo: center[0] - radius,
                hi: center[0] + radius,
                count: per_axis.min(budget).max(2),
            },
            (2 | 3, Some(total)) => Layout::Tensor {
                per_axis,
                total: total as usize,
            },
            _ => {
                let count = tensor_total.map_or(budget, |t| t as usize);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let shift = (0..=n).map(|_| rng.random::<f64>()).collect();
                Layout::Halton {
                    count,
                    bases: first_primes(n + 1),
                    shift,
                }
            }
        };
        Self {
            center: center.clone(),
            radius,
            layout,
        }
    }

    /// Number of candidate indices; [`point`](Self::point) may reject some.
    pub fn candidates(&self) -> usize {
        match &self.layout {
            Layout::Grid1 { count, .. } => *count,
            Layout::Tensor { total, .. } => *total,
            Layout::Halton { count, .. } => *count,
        }
    }

    /// The `k`-th sample, or `None` when a tensor-grid node lies outside the ball.
    pub fn point(&self, k: usize) -> Option<DVector<f64>> {
        match &self.layout {
            Layout::Grid1 { lo, hi, count } => {
                let x = if k + 1 == *count {
                    *hi
                } else {
                    lo + (hi - lo) * (k as f64) / ((*count - 1) as f64)
                };
                Some(DVector::from_element(1, x))
            }
            Layout::Tensor { per_axis, .. } => {
                let n = self.center.len();
                let mut rest = k;
                let mut offset = DVector::zeros(n);
                for i in 0..n {
                    let digit = rest % per_axis;
                    rest /= per_axis;
                    offset[i] =
                        -self.radius + 2.0 * self.radius * digit as f64 / (*per_axis - 1) as f64;
                }
                if offset.norm() > self.radius {
                    return None;
                }
                Some(&self.center + offset)
            }
            Layout::Halton { bases, shift, .. } => {
                let n = self.center.len();
                let normal = Normal::standard();
                let u = |i: usize| {
                    let raw = radical_inverse(k as u64 + 1, bases[i]) + shift[i];
                    (raw - raw.floor()).clamp(1e-12, 1.0 - 1e-12)
                };
                let dir = DVector::from_fn(n, |i, _| normal.inverse_cdf(u(i)));
                let norm = dir.norm();
                if norm == 0.0 || !norm.is_finite() {
                    return Some(self.center.clone());
                }
                let scale = self.radius * u(n).powf(1.0 / n as f64) / norm;
                Some(&self.center + dir * scale)
            }
        }
    }
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * factor;
        index /= base;
        factor *= inv;
    }
    value
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_both_endpoints() {
        let s = BallSampler::new(&DVector::from_element(1, 2.0), 0.5, 1001, MAX_SAMPLES, 42);
        assert_eq!(s.candidates(), 1001);
        assert_eq!(s.point(0).unwrap()[0], 1.5);
        assert_eq!(s.point(1000).unwrap()[0], 2.5);
        assert_eq!(s.point(500).unwrap()[0], 2.0);
    }

    #[test]
    fn tensor_points_stay_in_ball() {
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let s = BallSampler::new(&c, 0.7, 9, MAX_SAMPLES, 1);
        assert_eq!(s.candidates(), 729);
        let inside: Vec<_> = (0..s.candidates()).filter_map(|k| s.point(k)).collect();
        assert!(inside.len() > 729 / 3);
        assert!(inside.iter().all(|p| (p - &c).norm() <= 0.7 + 1e-12));
    }

    #[test]
    fn halton_points_stay_in_ball_and_are_seeded() {
        let c = DVector::from_element(8, 0.25);
        let a = BallSampler::new(&c, 2.0, 5, 2000, 7);
        let b = BallSampler::new(&c, 2.0, 5, 2000, 7);
        let other = BallSampler::new(&c, 2.0, 5, 2000, 8);
        assert_eq!(a.candidates(), 2000);
        for k in 0..2000 {
            let p = a.point(k).unwrap();
            assert!((&p - &c).norm() <= 2.0 + 1e-12);
            assert_eq!(p, b.point(k).unwrap());
        }
        assert_ne!(a.point(3), other.point(3));
    }

    #[test]
    fn primes() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }
}
