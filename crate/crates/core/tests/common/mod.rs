//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{UnitQuaternion, Vector2};

pub const CRANK: f64 = 0.3;
pub const COUPLER: f64 = 0.2;
pub const ROCKER: f64 = 0.25;
pub const GROUND: Vector2<f64> = Vector2::new(0.4, 0.0);

/// Closed-form planar four-bar position solution for crank angle `theta`.
/// `upper` selects the assembly branch with the coupler joint on the left
/// of the crank-tip-to-ground line (the `+y` branch at `theta = 0`).
#[derive(Debug, Clone, Copy)]
pub struct FourBarPose {
    pub a: Vector2<f64>,
    pub b: Vector2<f64>,
    pub coupler_angle: f64,
    pub rocker_angle: f64,
}

pub fn fourbar_pose(theta: f64, upper: bool) -> Option<FourBarPose> {
    let a = Vector2::new(CRANK * theta.cos(), CRANK * theta.sin());
    let d_vec = GROUND - a;
    let d = d_vec.norm();
    let along = (COUPLER * COUPLER - ROCKER * ROCKER + d * d) / (2.0 * d);
    let h2 = COUPLER * COUPLER - along * along;
    if h2 < 0.0 {
        return None;
    }
    let e = d_vec / d;
    let left = Vector2::new(-e.y, e.x);
    let sign = if upper { 1.0 } else { -1.0 };
    let b = a + e * along + left * (sign * h2.sqrt());
    Some(FourBarPose {
        a,
        b,
        coupler_angle: (b.y - a.y).atan2(b.x - a.x),
        rocker_angle: (b.y - GROUND.y).atan2(b.x - GROUND.x),
    })
}

/// Rotation angle about +z of a quaternion that only rotates about z.
pub fn planar_angle(q: &UnitQuaternion<f64>) -> f64 {
    2.0 * q.k.atan2(q.w)
}

pub fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % std::f64::consts::TAU;
    if d > std::f64::consts::PI {
        d -= std::f64::consts::TAU;
    } else if d < -std::f64::consts::PI {
        d += std::f64::consts::TAU;
    }
    d.abs()
}
