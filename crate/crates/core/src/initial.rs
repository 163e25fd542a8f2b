//! Signed-distance-based construction of well-prepared initial data: a tanh
//! profile of the clamped signed distance to an analytic shape, with the
//! gradient/potential balance checked discretely.

use crate::diagnostics;
use crate::error::Error;
use crate::field::{self, Grid, ScalarField};
use crate::model::{k_antideriv, q_profile};
use serde::{Deserialize, Serialize};

/// Minimum clearance between a shape and the faces of the fundamental cell.
pub const SHAPE_MARGIN: f64 = 0.05;
/// Minimum gap (beyond tangency) between components of a ball union.
pub const UNION_GAP: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Analytic initial geometries. Every shape must sit inside `(0,1)^d` with
/// margin [`SHAPE_MARGIN`] to the cell faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Ball(Ball),
    BallUnion { balls: Vec<Ball> },
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
    Slab { axis: usize, center: f64, half_width: f64 },
}

impl Shape {
    /// Validate dimension consistency, cell margins, and pairwise
    /// disjointness for unions.
    pub fn validate(&self, dim: usize) -> Result<(), Error> {
        let check_ball = |b: &Ball| -> Result<(), Error> {
            if b.center.len() != dim {
                return Err(Error::Geometry(format!(
                    "ball center has {} coordinates, grid dim is {dim}",
                    b.center.len()
                )));
            }
            if !(b.radius > 0.0) {
                return Err(Error::Geometry("ball radius must be positive".into()));
            }
            for (a, &c) in b.center.iter().enumerate() {
                if c - b.radius < SHAPE_MARGIN || c + b.radius > 1.0 - SHAPE_MARGIN {
                    return Err(Error::Geometry(format!(
                        "ball exceeds margin {SHAPE_MARGIN} to cell faces on axis {a}"
                    )));
                }
            }
            Ok(())
        };
        match self {
            Shape::Ball(b) => check_ball(b),
            Shape::BallUnion { balls } => {
                if balls.is_empty() {
                    return Err(Error::Geometry("empty ball union".into()));
                }
                for b in balls {
                    check_ball(b)?;
                }
                for (i, a) in balls.iter().enumerate() {
                    for b in &balls[i + 1..] {
                        let dist: f64 = a
                            .center
                            .iter()
                            .zip(&b.center)
                            .map(|(&x, &y)| (x - y) * (x - y))
                            .sum::<f64>()
                            .sqrt();
                        if dist <= a.radius + b.radius + UNION_GAP {
                            return Err(Error::Geometry(format!(
                                "union components too close: centers {dist} apart, need > {}",
                                a.radius + b.radius + UNION_GAP
                            )));
                        }
                    }
                }
                Ok(())
            }
            Shape::Ellipsoid { center, semi_axes } => {
                if center.len() != dim || semi_axes.len() != dim {
                    return Err(Error::Geometry(
                        "ellipsoid center/semi-axes must match grid dim".into(),
                    ));
                }
                if semi_axes.iter().any(|&a| !(a > 0.0)) {
                    return Err(Error::Geometry("semi-axes must be positive".into()));
                }
                for (a, (&c, &s)) in center.iter().zip(semi_axes).enumerate() {
                    if c - s < SHAPE_MARGIN || c + s > 1.0 - SHAPE_MARGIN {
                        return Err(Error::Geometry(format!(
                            "ellipsoid exceeds margin {SHAPE_MARGIN} on axis {a}"
                        )));
                    }
                }
                Ok(())
            }
            Shape::Slab {
                axis,
                center,
                half_width,
            } => {
                if *axis >= dim {
                    return Err(Error::Geometry(format!("slab axis {axis} >= dim {dim}")));
                }
                if !(*half_width > 0.0) {
                    return Err(Error::Geometry("slab half-width must be positive".into()));
                }
                if center - half_width < SHAPE_MARGIN || center + half_width > 1.0 - SHAPE_MARGIN
                {
                    return Err(Error::Geometry(format!(
                        "slab exceeds margin {SHAPE_MARGIN} on axis {axis}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// A point on or inside the shape, used as the default center for
    /// level-set radius sampling.
    pub fn reference_center(&self) -> Vec<f64> {
        match self {
            Shape::Ball(b) => b.center.clone(),
            Shape::BallUnion { balls } => balls[0].center.clone(),
            Shape::Ellipsoid { center, .. } => center.clone(),
            Shape::Slab { axis, center, .. } => {
                let mut c = vec![0.5; 3];
                c[*axis] = *center;
                c
            }
        }
    }
}

/// Signed distance: positive inside, negative outside, zero on the boundary,
/// 1-Lipschitz. Distances are minimized over the 3^d nearest lattice
/// translates, so values are correct on the torus for shapes contained in one
/// fundamental cell.
pub fn signed_distance(shape: &Shape, x: &[f64]) -> f64 {
    match shape {
        Shape::Ball(b) => b.radius - torus_dist(x, &b.center),
        Shape::BallUnion { balls } => balls
            .iter()
            .map(|b| b.radius - torus_dist(x, &b.center))
            .fold(f64::NEG_INFINITY, f64::max),
        Shape::Slab {
            axis,
            center,
            half_width,
        } => half_width - Grid::wrap_delta(x[*axis], *center).abs(),
        Shape::Ellipsoid { center, semi_axes } => {
            // nearest periodic image of x relative to the center
            let rel: Vec<f64> = x
                .iter()
                .zip(center)
                .map(|(&xi, &ci)| Grid::wrap_delta(xi, ci))
                .collect();
            ellipsoid_signed_distance(&rel, semi_axes)
        }
    }
}

fn torus_dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .map(|(&xi, &ci)| {
            let d = Grid::wrap_delta(xi, ci);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Distance from `rel` (coordinates relative to the center) to the ellipsoid
/// with the given semi-axes, positive inside. The foot point satisfies
/// `y_i = a_i^2 rel_i / (t + a_i^2)` with `F(t) = sum (a_i rel_i/(t+a_i^2))^2
/// = 1`; `F` is strictly decreasing on `(-a_min^2, inf)`, so the largest root
/// is found by bisection. Components are nudged off exact axis planes by
/// `1e-9 a_i` first; the distance function is 1-Lipschitz, so the answer
/// moves by at most 1e-9.
fn ellipsoid_signed_distance(rel: &[f64], axes: &[f64]) -> f64 {
    let inside_val: f64 = rel
        .iter()
        .zip(axes)
        .map(|(&x, &a)| (x / a) * (x / a))
        .sum::<f64>();
    let y: Vec<f64> = rel
        .iter()
        .zip(axes)
        .map(|(&x, &a)| x.abs().max(1e-9 * a))
        .collect();
    let f = |t: f64| -> f64 {
        y.iter()
            .zip(axes)
            .map(|(&x, &a)| {
                let s = a * x / (t + a * a);
                s * s
            })
            .sum::<f64>()
            - 1.0
    };
    let a_min = axes.iter().cloned().fold(f64::INFINITY, f64::min);
    let a_max = axes.iter().cloned().fold(0.0f64, f64::max);
    let r: f64 = y.iter().map(|&x| x * x).sum::<f64>().sqrt();
    // F -> +inf as t -> -a_min^2 from above (every y_i > 0), F -> 0 at +inf
    let mut lo = -a_min * a_min + 0.5 * a_min * y[argmin(axes)];
    while f(lo) <= 0.0 {
        lo = -a_min * a_min + 0.5 * (lo + a_min * a_min);
    }
    let mut hi = a_max * (r + a_max);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..128 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let dist2: f64 = y
        .iter()
        .zip(axes)
        .map(|(&x, &a)| {
            let foot = a * a * x / (t + a * a);
            (x - foot) * (x - foot)
        })
        .sum();
    let dist = dist2.sqrt();
    if inside_val <= 1.0 {
        dist
    } else {
        -dist
    }
}

fn argmin(axes: &[f64]) -> usize {
    let mut best = 0;
    for (i, &a) in axes.iter().enumerate() {
        if a < axes[best] {
            best = i;
        }
    }
    best
}

/// Smooth clamp `b * tanh(r/b)`: odd, strictly increasing, `|result| < b`,
/// derivative in (0, 1]. Replaces the piecewise truncated distance with one
/// closed form; the identity deficit is below `|r|^3 / b^2`.
#[inline]
pub fn clamp(r: f64, b: f64) -> f64 {
    b * (r / b).tanh()
}

/// Default clamp width `max(10 eps, 0.05)`.
pub fn default_clamp_width(eps: f64) -> f64 {
    (10.0 * eps).max(0.05)
}

/// Initial field plus the quantities fixed at construction time.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub phi0: ScalarField,
    /// Reference mass `int k(phi0)`, computed once with the run quadrature.
    pub m0: f64,
    pub clamp_width: f64,
    pub shape: Shape,
    /// Surface energy `E_S(0)`; the mass-deficit bound is derived from it.
    pub surface_energy0: f64,
}

/// Build `phi0 = q_eps(clamp(signed_distance))` on the grid and record `m0`
/// and `E_S(0)`.
pub fn build_phi0(shape: &Shape, grid: Grid, eps: f64, b: f64) -> Result<PreparedData, Error> {
    shape.validate(grid.dim())?;
    let h = grid.spacing();
    if h > eps / 4.0 {
        return Err(Error::Resolution {
            h,
            limit: eps / 4.0,
        });
    }
    debug_assert!(b >= 10.0 * eps, "clamp width below 10*eps");
    let phi0 = ScalarField::from_fn(grid, |x| q_profile(clamp(signed_distance(shape, x), b), eps));
    debug_assert!(phi0.max_abs() < 1.0);
    let m0 = field::integrate_map(&phi0, k_antideriv);
    let e_s = diagnostics::surface_energy(&phi0, eps);
    Ok(PreparedData {
        phi0,
        m0,
        clamp_width: b,
        shape: shape.clone(),
        surface_energy0: e_s,
    })
}

/// Supremum of the discrete discrepancy density
/// `eps |grad phi0|^2 / 2 - W(phi0)/eps` using the centered gradient.
/// Nonpositive (up to stencil error) certifies well-prepared data.
pub fn verify_well_prepared(pd: &PreparedData, eps: f64) -> f64 {
    let (_, sup, _, _) = diagnostics::discrepancy(&pd.phi0, eps);
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ball(center: &[f64], radius: f64) -> Shape {
        Shape::Ball(Ball {
            center: center.to_vec(),
            radius,
        })
    }

    #[test]
    fn ball_signed_distance() {
        let s = ball(&[0.5, 0.5], 0.2);
        assert_abs_diff_eq!(signed_distance(&s, &[0.5, 0.5]), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(signed_distance(&s, &[0.7, 0.5]), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(signed_distance(&s, &[0.9, 0.5]), -0.2, epsilon = 1e-15);
        // periodic wrap: the image across the boundary is the nearest one
        assert_abs_diff_eq!(
            signed_distance(&s, &[0.05, 0.5]),
            -(0.45f64.min(0.55) - 0.2),
            epsilon = 1e-15
        );
    }

    #[test]
    fn union_signed_distance_against_brute_force() {
        let s = Shape::BallUnion {
            balls: vec![
                Ball {
                    center: vec![0.3, 0.3],
                    radius: 0.12,
                },
                Ball {
                    center: vec![0.7, 0.65],
                    radius: 0.18,
                },
            ],
        };
        // brute-force oracle: min distance to finely sampled boundary points,
        // signed by membership
        let boundary_dist = |x: &[f64]| -> f64 {
            let mut best = f64::INFINITY;
            for (c, r) in [([0.3, 0.3], 0.12), ([0.7, 0.65], 0.18)] {
                for k in 0..20000 {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / 20000.0;
                    let p = [c[0] + r * th.cos(), c[1] + r * th.sin()];
                    let d = ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt();
                    best = best.min(d);
                }
            }
            best
        };
        for x in [[0.5, 0.45], [0.31, 0.32], [0.85, 0.65], [0.55, 0.8]] {
            let sd = signed_distance(&s, &x);
            let inside = ((x[0] - 0.3f64).powi(2) + (x[1] - 0.3).powi(2)).sqrt() < 0.12
                || ((x[0] - 0.7f64).powi(2) + (x[1] - 0.65).powi(2)).sqrt() < 0.18;
            let oracle = if inside {
                boundary_dist(&x)
            } else {
                -boundary_dist(&x)
            };
            assert_abs_diff_eq!(sd, oracle, epsilon = 1e-4);
        }
    }

    #[test]
    fn slab_signed_distance() {
        let s = Shape::Slab {
            axis: 0,
            center: 0.5,
            half_width: 0.25,
        };
        assert_abs_diff_eq!(signed_distance(&s, &[0.5]), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(signed_distance(&s, &[0.75]), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(signed_distance(&s, &[0.0]), -0.25, epsilon = 1e-15);
    }

    #[test]
    fn ellipsoid_signed_distance_against_sampled_boundary() {
        let s = Shape::Ellipsoid {
            center: vec![0.5, 0.5],
            semi_axes: vec![0.3, 0.15],
        };
        let oracle = |x: &[f64]| -> f64 {
            let mut best = f64::INFINITY;
            for k in 0..400000 {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 400000.0;
                let p = [0.5 + 0.3 * th.cos(), 0.5 + 0.15 * th.sin()];
                best = best.min(((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt());
            }
            let inside =
                ((x[0] - 0.5) / 0.3).powi(2) + ((x[1] - 0.5) / 0.15).powi(2) < 1.0;
            if inside {
                best
            } else {
                -best
            }
        };
        for x in [
            [0.5, 0.5],
            [0.72, 0.5],
            [0.5, 0.61],
            [0.62, 0.58],
            [0.35, 0.44],
            [0.9, 0.9],
        ] {
            assert_abs_diff_eq!(signed_distance(&s, &x), oracle(&x), epsilon = 2e-5);
        }
    }

    #[test]
    fn clamp_properties() {
        let b = 0.2;
        assert_eq!(clamp(0.0, b), 0.0);
        // |clamp(r,b) - r| <= |r|^3 / b^2 for |r| <= b/10 (tanh Taylor remainder)
        for i in 1..=10 {
            let r = b / 10.0 * i as f64 / 10.0;
            assert!((clamp(r, b) - r).abs() <= r.powi(3) / (b * b));
            assert_abs_diff_eq!(clamp(-r, b), -clamp(r, b), epsilon = 0.0);
        }
        assert!(clamp(10.0 * b, b) >= 0.9999 * b);
        assert!(clamp(1e6, b) <= b); // saturates to b at f64 precision
        let mut prev = f64::NEG_INFINITY;
        for i in -50..=50 {
            let v = clamp(i as f64 * 0.02, b);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn shape_margins_enforced() {
        assert!(ball(&[0.5, 0.5], 0.46).validate(2).is_err());
        assert!(ball(&[0.5, 0.5], 0.44).validate(2).is_ok());
        assert!(ball(&[0.08, 0.5], 0.05).validate(2).is_err());
        let too_close = Shape::BallUnion {
            balls: vec![
                Ball {
                    center: vec![0.3, 0.5],
                    radius: 0.1,
                },
                Ball {
                    center: vec![0.51, 0.5],
                    radius: 0.1,
                },
            ],
        };
        assert!(too_close.validate(2).is_err());
    }

    #[test]
    fn build_phi0_disk() {
        let g = Grid::new(2, 256).unwrap();
        let eps = 0.02;
        let pd = build_phi0(&ball(&[0.5, 0.5], 0.25), g, eps, 0.2).unwrap();
        // zero on the interface: the node at (0.75, 0.5) lies exactly on it
        let idx = g.flat_index(&[192, 128]);
        assert_abs_diff_eq!(pd.phi0.values()[idx], 0.0, epsilon = 1e-12);
        // deep inside (depth >= b) approaches +1
        let center = g.flat_index(&[128, 128]);
        assert!(pd.phi0.values()[center] > 1.0 - 1e-6);
        assert!(pd.phi0.max_abs() < 1.0);
        // resolution gate
        assert!(matches!(
            build_phi0(&ball(&[0.5, 0.5], 0.25), Grid::new(2, 16).unwrap(), 0.005, 0.05),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn slab_interface_energy_is_two_sigma() {
        // two flat interfaces of unit area each carry sigma of surface energy
        let g = Grid::new(1, 512).unwrap();
        let eps = 0.02;
        let s = Shape::Slab {
            axis: 0,
            center: 0.5,
            half_width: 0.25,
        };
        let pd = build_phi0(&s, g, eps, default_clamp_width(eps)).unwrap();
        let sigma = crate::model::sigma();
        assert!(
            (pd.surface_energy0 / sigma - 2.0).abs() <= 0.01,
            "E_S(0)/sigma = {}",
            pd.surface_energy0 / sigma
        );
    }

    #[test]
    fn m0_negates_under_complement() {
        let g = Grid::new(2, 128).unwrap();
        let eps = 0.04;
        let pd = build_phi0(&ball(&[0.5, 0.5], 0.2), g, eps, 0.4).unwrap();
        let complement = ScalarField::from_values(
            g,
            pd.phi0.values().iter().map(|&v| -v).collect(),
        )
        .unwrap();
        let m_c = field::integrate_map(&complement, k_antideriv);
        assert_abs_diff_eq!(m_c, -pd.m0, epsilon = 1e-10);
    }

    #[test]
    fn analytic_equipartition_is_exact_and_clamp_one_sided() {
        // 1D tanh profile with the analytic chain-rule derivative: the
        // discrepancy vanishes identically; clamping scales the gradient side
        // down, making it nonpositive.
        let eps = 0.02;
        let b = 0.25;
        for i in 0..2000 {
            let r = -1.0 + i as f64 * 0.001;
            let q = q_profile(r, eps);
            let qr = (1.0 - q * q) / eps; // |d r| = 1
            let xi = eps * qr * qr / 2.0 - crate::model::well_w(q) / eps;
            assert!(xi.abs() <= 1e-11, "unclamped xi {xi} at r={r}");
            let qc = q_profile(clamp(r, b), eps);
            let dclamp = 1.0 / (r / b).cosh().powi(2);
            let qcr = (1.0 - qc * qc) / eps * dclamp;
            let xic = eps * qcr * qcr / 2.0 - crate::model::well_w(qc) / eps;
            assert!(xic <= 1e-14, "clamped xi {xic} at r={r}");
        }
    }

    #[test]
    fn discrete_gradient_bounded_by_lipschitz_constant() {
        let g = Grid::new(2, 256).unwrap();
        let eps = 0.02;
        let b = 0.2;
        let s = ball(&[0.5, 0.5], 0.25);
        let clamped = ScalarField::from_fn(g, |x| clamp(signed_distance(&s, x), b));
        let grad = field::gradient(&clamped);
        let h = g.spacing();
        let mut max_norm = 0.0f64;
        for flat in 0..g.len() {
            let gx = grad.component(0).values()[flat];
            let gy = grad.component(1).values()[flat];
            max_norm = max_norm.max((gx * gx + gy * gy).sqrt());
        }
        assert!(
            max_norm <= 1.0 + 10.0 * h / eps * h,
            "|grad| = {max_norm} exceeds 1 + stencil tolerance"
        );
    }

    #[test]
    fn well_prepared_refinement_on_unclamped_profile() {
        // On the raw (unclamped) tanh of the signed distance the analytic
        // discrepancy vanishes a.e., so the discrete supremum is pure stencil
        // error and decays at second order.
        let eps = 0.02;
        let sup_at = |n: usize| -> f64 {
            let g = Grid::new(2, n).unwrap();
            let s = ball(&[0.5, 0.5], 0.25);
            let phi = ScalarField::from_fn(g, |x| q_profile(signed_distance(&s, x), eps));
            let (_, sup, _, _) = diagnostics::discrepancy(&phi, eps);
            sup
        };
        let coarse = sup_at(256);
        let fine = sup_at(512);
        let ratio = coarse / fine;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "sup xi refinement ratio {ratio} (coarse {coarse}, fine {fine})"
        );
    }

    #[test]
    fn clamped_data_verifies_well_prepared() {
        let g = Grid::new(2, 256).unwrap();
        let eps = 0.02;
        let pd = build_phi0(&ball(&[0.5, 0.5], 0.25), g, eps, 0.2).unwrap();
        let sup = verify_well_prepared(&pd, eps);
        assert!(sup <= 1e-12, "clamped initial data has positive xi: {sup}");
    }
}
