//! Comparison-principle barrier: a 1D supersolution profile
//! `phi_tilde = q_eps(g_delta(x1) + int_0^t lambda + 2t/delta - gamma)`
//! that must stay above the solution while the ordering holds at t = 0.
//!
//! The profile function g is even with g(0) = 0, 0 <= g'' <= 2, and
//! g(s) = |s| - 1/2 exactly for |s| >= 7/8 (hence for |s| >= 1). It is built
//! by integrating a quintic-smoothstep trapezoid for g'': zero on [0, 1/8],
//! ramp up over [1/8, 3/8], plateau 2 on [3/8, 5/8], ramp down over
//! [5/8, 7/8]. The ramps are symmetric about 1/2, which forces
//! `int u g'' = 1/2 int g''` and with it the exact affine tail.

use crate::error::Error;
use crate::field::{Grid, ScalarField};
use crate::initial::Shape;
use crate::model::q_profile;
use serde::{Deserialize, Serialize};

const U1: f64 = 0.125;
const U2: f64 = 0.375;
const U3: f64 = 0.625;
const U4: f64 = 0.875;
const W: f64 = 0.25;

/// Quintic smoothstep and its first two antiderivatives.
#[inline]
fn smooth(x: f64) -> f64 {
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}
#[inline]
fn smooth_i1(x: f64) -> f64 {
    // int_0^x smooth
    x * x * x * x * (2.5 - 3.0 * x + x * x)
}
#[inline]
fn smooth_i2(x: f64) -> f64 {
    // int_0^x smooth_i1
    x * x * x * x * x * (0.5 - 0.5 * x + x * x / 7.0)
}

pub fn g_second(s: f64) -> f64 {
    let u = s.abs();
    if u <= U1 || u >= U4 {
        0.0
    } else if u < U2 {
        2.0 * smooth((u - U1) / W)
    } else if u <= U3 {
        2.0
    } else {
        2.0 * smooth((U4 - u) / W)
    }
}

pub fn g_prime(s: f64) -> f64 {
    let u = s.abs();
    let v = if u <= U1 {
        0.0
    } else if u < U2 {
        2.0 * W * smooth_i1((u - U1) / W)
    } else if u <= U3 {
        0.25 + 2.0 * (u - U2)
    } else if u < U4 {
        1.0 - 2.0 * W * smooth_i1((U4 - u) / W)
    } else {
        1.0
    };
    if s < 0.0 {
        -v
    } else {
        v
    }
}

/// The barrier profile function (see module docs).
pub fn g(s: f64) -> f64 {
    let u = s.abs();
    if u <= U1 {
        0.0
    } else if u < U2 {
        2.0 * W * W * smooth_i2((u - U1) / W)
    } else if u <= U3 {
        let d = u - U2;
        1.0 / 56.0 + 0.25 * d + d * d
    } else if u < U4 {
        3.0 / 8.0 - (U4 - u) + 2.0 * W * W * smooth_i2((U4 - u) / W)
    } else {
        u - 0.5
    }
}

/// Assert the stated properties of g on a sample grid; returns violations.
pub fn check_g_properties() -> Vec<String> {
    let mut bad = Vec::new();
    if g(0.0) != 0.0 {
        bad.push(format!("g(0) = {} != 0", g(0.0)));
    }
    for i in 0..=4000 {
        let s = -2.0 + i as f64 * 0.001;
        if (g(s) - g(-s)).abs() > 0.0 {
            bad.push(format!("g not even at s = {s}"));
        }
        let gpp = g_second(s);
        if !(0.0..=2.0 + 1e-15).contains(&gpp) {
            bad.push(format!("g'' = {gpp} outside [0,2] at s = {s}"));
        }
        if s.abs() >= 1.0 && (g(s) - (s.abs() - 0.5)).abs() > 1e-15 {
            bad.push(format!("g(s) != |s|-1/2 at s = {s}: {}", g(s)));
        }
        // consistency of the closed-form derivative chain
        let h = 1e-6;
        let fd = (g(s + h) - g(s - h)) / (2.0 * h);
        if (fd - g_prime(s)).abs() > 1e-8 {
            bad.push(format!("g' mismatch at s = {s}: {fd} vs {}", g_prime(s)));
        }
    }
    bad.truncate(8);
    bad
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    pub gamma: f64,
    pub delta: f64,
}

impl BarrierConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.delta > 0.0 && self.gamma > self.delta) {
            return Err(Error::Config {
                field: "diagnostics.barrier".into(),
                constraint: "0 < delta < gamma".into(),
            });
        }
        Ok(())
    }

    /// The comparison needs the shape inside the slab `|x1 - 1/2| < gamma/2`,
    /// far from the barrier wall at x1 = 0.
    pub fn check_confinement(&self, shape: &Shape) -> Result<(), Error> {
        let half = self.gamma / 2.0;
        let ok = match shape {
            Shape::Ball(b) => (b.center[0] - 0.5).abs() + b.radius < half,
            Shape::BallUnion { balls } => balls
                .iter()
                .all(|b| (b.center[0] - 0.5).abs() + b.radius < half),
            Shape::Ellipsoid { center, semi_axes } => {
                (center[0] - 0.5).abs() + semi_axes[0] < half
            }
            Shape::Slab {
                axis,
                center,
                half_width,
            } => *axis != 0 || (center - 0.5).abs() + half_width < half,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "barrier test needs the shape inside |x1 - 1/2| < gamma/2 = {half}"
            )))
        }
    }

    /// Barrier front position `g_delta(x1) + L + 2t/delta - gamma` where `L`
    /// is the accumulated multiplier integral; x1 is taken as the signed
    /// torus offset from the wall plane x1 = 0.
    #[inline]
    pub fn front(&self, x1: f64, int_lambda: f64, t: f64) -> f64 {
        let s = Grid::wrap_delta(x1, 0.0);
        self.delta * g(s / self.delta) + int_lambda + 2.0 * t / self.delta - self.gamma
    }

    /// `min_x (phi_tilde - phi)` over the grid at one instant.
    pub fn margin(&self, phi: &ScalarField, eps: f64, int_lambda: f64, t: f64) -> f64 {
        let grid = phi.grid();
        let n = grid.n();
        let h = grid.spacing();
        // phi_tilde depends on x1 only: precompute per leading index
        let stride = n.pow((grid.dim() - 1) as u32);
        let mut min_margin = f64::INFINITY;
        for i in 0..n {
            let tilde = q_profile(self.front(i as f64 * h, int_lambda, t), eps);
            let base = i * stride;
            for v in &phi.values()[base..base + stride] {
                let m = tilde - v;
                if m < min_margin {
                    min_margin = m;
                }
            }
        }
        min_margin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_properties_hold() {
        let bad = check_g_properties();
        assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn g_values() {
        assert_eq!(g(0.0), 0.0);
        assert_eq!(g(1.0), 0.5);
        assert_eq!(g(-1.0), 0.5);
        assert_eq!(g(2.5), 2.0);
        assert!((g(0.5) - (1.0 / 56.0 + 0.25 * 0.125 + 0.125 * 0.125)).abs() < 1e-15);
        // monotone increasing on [0, inf)
        let mut prev = -1.0;
        for i in 0..300 {
            let v = g(i as f64 * 0.01);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn confinement_check() {
        let cfg = BarrierConfig {
            gamma: 0.1,
            delta: 0.05,
        };
        let ok = Shape::Ball(crate::initial::Ball {
            center: vec![0.5, 0.5],
            radius: 0.04,
        });
        assert!(cfg.check_confinement(&ok).is_ok());
        let too_big = Shape::Ball(crate::initial::Ball {
            center: vec![0.5, 0.5],
            radius: 0.2,
        });
        assert!(cfg.check_confinement(&too_big).is_err());
    }

    #[test]
    fn initial_margin_nonnegative_for_confined_disk() {
        let g2 = Grid::new(2, 256).unwrap();
        let eps = 0.02;
        let shape = Shape::Ball(crate::initial::Ball {
            center: vec![0.5, 0.5],
            radius: 0.04,
        });
        let pd = crate::initial::build_phi0(&shape, g2, eps, 0.2).unwrap();
        let cfg = BarrierConfig {
            gamma: 0.1,
            delta: 0.05,
        };
        let m0 = cfg.margin(&pd.phi0, eps, 0.0, 0.0);
        assert!(m0 >= 0.0, "initial ordering violated: margin {m0}");
    }
}
