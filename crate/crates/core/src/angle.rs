//! Angle helpers shared across modules.

use std::f64::consts::{PI, TAU};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Wraps a waveplate orientation into `[0, π)`.
pub fn wrap_half_turn(x: f64) -> f64 {
    let y = x.rem_euclid(PI);
    // rem_euclid can return exactly PI for tiny negative inputs
    if y >= PI {
        0.0
    } else {
        y
    }
}

/// Smallest signed difference `a - b` on the circle, in `(-π, π]`.
pub fn phase_difference(a: f64, b: f64) -> f64 {
    wrap_phase(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_phase(0.3 + 4.0 * TAU) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn wrap_half_turn_range() {
        assert_eq!(wrap_half_turn(0.0), 0.0);
        assert!((wrap_half_turn(PI + 0.25) - 0.25).abs() < 1e-15);
        assert!(wrap_half_turn(-1e-18) < PI);
    }

    #[test]
    fn difference_across_branch_cut() {
        let d = phase_difference(PI - 0.1, -PI + 0.1);
        assert!((d + 0.2).abs() < 1e-12);
    }
}
