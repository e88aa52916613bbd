//! The preset car trajectory: a two-term Lissajous base with a seeded
//! low-frequency perturbation per axis. Position is a closed-form function
//! of the step index, so episodes can be replayed and checked exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub amp: f64,
    pub omega: f64,
    pub phase: f64,
}

impl Wave {
    fn eval(&self, k: f64) -> f64 {
        self.amp * (self.omega * k + self.phase).sin()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    center: Vec2,
    x_terms: Vec<Wave>,
    y_terms: Vec<Wave>,
}

impl TrajectorySpec {
    /// The default wandering course: incommensurate Lissajous frequencies
    /// plus two seeded slow drift terms per axis. Amplitudes keep the car
    /// inside the map and its per-step displacement well under the drone's
    /// velocity limit.
    pub fn chaotic(center: Vec2, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perturb = |rng: &mut ChaCha8Rng| Wave {
            amp: rng.gen_range(0.15..0.30),
            omega: rng.gen_range(0.004..0.011),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        };
        let x_terms = vec![
            Wave { amp: 2.6, omega: 0.017, phase: 0.3 },
            Wave { amp: 0.9, omega: 0.039, phase: 1.9 },
            perturb(&mut rng),
            perturb(&mut rng),
        ];
        let y_terms = vec![
            Wave { amp: 2.2, omega: 0.023, phase: 4.1 },
            Wave { amp: 1.0, omega: 0.031, phase: 0.7 },
            perturb(&mut rng),
            perturb(&mut rng),
        ];
        Self {
            center,
            x_terms,
            y_terms,
        }
    }

    /// A car that never moves; useful for convergence tests.
    pub fn stationary(position: Vec2) -> Self {
        Self {
            center: position,
            x_terms: Vec::new(),
            y_terms: Vec::new(),
        }
    }

    pub fn from_terms(center: Vec2, x_terms: Vec<Wave>, y_terms: Vec<Wave>) -> Self {
        Self {
            center,
            x_terms,
            y_terms,
        }
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn terms(&self) -> (&[Wave], &[Wave]) {
        (&self.x_terms, &self.y_terms)
    }

    /// Car position at step `k`.
    pub fn position(&self, k: u64) -> Vec2 {
        let k = k as f64;
        Vec2 {
            x: self.center.x + self.x_terms.iter().map(|w| w.eval(k)).sum::<f64>(),
            y: self.center.y + self.y_terms.iter().map(|w| w.eval(k)).sum::<f64>(),
        }
    }

    /// Heading at step `k`: direction of travel into the next step, or 0 for
    /// a stationary course.
    pub fn heading(&self, k: u64) -> f64 {
        let here = self.position(k);
        let next = self.position(k + 1);
        let (dx, dy) = (next.x - here.x, next.y - here.y);
        if dx == 0.0 && dy == 0.0 {
            0.0
        } else {
            dy.atan2(dx)
        }
    }

    /// Largest per-step displacement over a horizon; used to sanity-check a
    /// course against the drone's velocity limit.
    pub fn max_step_displacement(&self, steps: u64) -> f64 {
        (0..steps)
            .map(|k| {
                let a = self.position(k);
                let b = self.position(k + 1);
                ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn position_matches_closed_form_oracle() {
        let traj = TrajectorySpec::chaotic(Vec2 { x: 8.0, y: 8.0 }, 99);
        let (x_terms, y_terms) = traj.terms();
        for k in [0u64, 1, 17, 250, 499] {
            let got = traj.position(k);
            // Independent evaluation of the closed form.
            let kf = k as f64;
            let ex: f64 = 8.0
                + x_terms
                    .iter()
                    .map(|w| w.amp * (w.omega * kf + w.phase).sin())
                    .sum::<f64>();
            let ey: f64 = 8.0
                + y_terms
                    .iter()
                    .map(|w| w.amp * (w.omega * kf + w.phase).sin())
                    .sum::<f64>();
            assert_eq!(got.x, ex);
            assert_eq!(got.y, ey);
        }
    }

    #[test]
    fn stationary_course_never_moves() {
        let traj = TrajectorySpec::stationary(Vec2 { x: 3.0, y: 5.0 });
        for k in 0..100 {
            assert_eq!(traj.position(k), Vec2 { x: 3.0, y: 5.0 });
        }
        assert_eq!(traj.heading(10), 0.0);
    }

    #[test]
    fn default_course_stays_in_map_and_under_speed_limit() {
        for seed in 0..5 {
            let traj = TrajectorySpec::chaotic(Vec2 { x: 8.0, y: 8.0 }, seed);
            for k in 0..2000 {
                let p = traj.position(k);
                assert!((0.0..16.0).contains(&p.x), "x {} at step {k}", p.x);
                assert!((0.0..16.0).contains(&p.y), "y {} at step {k}", p.y);
            }
            let v = traj.max_step_displacement(2000);
            assert!(v < 0.2, "max displacement {v} seed {seed}");
        }
    }

    #[test]
    fn same_seed_same_course() {
        let a = TrajectorySpec::chaotic(Vec2 { x: 8.0, y: 8.0 }, 4);
        let b = TrajectorySpec::chaotic(Vec2 { x: 8.0, y: 8.0 }, 4);
        assert_eq!(a, b);
    }
}
