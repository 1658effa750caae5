//! Time-dependent driving schedules and disorder sampling.

mod sampling;

pub use sampling::{realization_seed, sample_disorder};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::CouplingPoint;

/// How the exponential protocol's onsite energy is continued past `t*/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VbProfile {
    /// `Vb(t) = J0 sqrt(J2(2t) / J0)` with the closed form evaluated at `2t`
    /// for all `t`; saturates slightly above `J0`.
    #[default]
    AsPrinted,
    /// `Vb(t) = Vb(t* - t)`: the as-printed curve mirrored about `t*/2`.
    TimeSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Protocol {
    Cosine,
    Exponential {
        alpha: f64,
        #[serde(default)]
        vb: VbProfile,
    },
    /// Piecewise-linear ramps for the plain edge-pumping chain; onsite
    /// energies are zero.
    ThreeStep { t_op: f64, j1_0: f64, j2_0: f64 },
    /// Constant Hamiltonian.
    Frozen { point: CouplingPoint },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Cosine => "cosine",
            Protocol::Exponential { .. } => "exponential",
            Protocol::ThreeStep { .. } => "three-step",
            Protocol::Frozen { .. } => "frozen",
        }
    }
}

/// A protocol bound to an energy scale and a total time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    pub protocol: Protocol,
    pub j0: f64,
    pub t_star: f64,
}

/// Evaluation times within this relative distance outside `[0, t*]` are
/// clamped rather than rejected, so Runge-Kutta substeps may land on `t*`
/// with rounding noise.
const RANGE_SLACK: f64 = 1e-12;

impl DriveSchedule {
    pub fn new(protocol: Protocol, j0: f64, t_star: f64) -> Result<Self> {
        if !(j0.is_finite() && j0 > 0.0) {
            return Err(invalid("j0", format!("must be finite and > 0, got {j0}")));
        }
        if !(t_star.is_finite() && t_star > 0.0) {
            return Err(invalid("t_star", format!("must be finite and > 0, got {t_star}")));
        }
        match protocol {
            Protocol::Exponential { alpha, .. } if !(alpha.is_finite() && alpha > 0.0) => {
                return Err(invalid("alpha", format!("must be finite and > 0, got {alpha}")));
            }
            Protocol::ThreeStep { t_op, j1_0, j2_0 } => {
                if !(t_op > 0.0 && t_op <= 0.5 * t_star) {
                    return Err(invalid("t_op", format!("need 0 < t_op <= t*/2, got t_op = {t_op}, t* = {t_star}")));
                }
                if !(j2_0 >= 0.0 && j1_0 > j2_0 && j1_0.is_finite()) {
                    return Err(invalid("j1_0", format!("need J1_0 > J2_0 >= 0, got ({j1_0}, {j2_0})")));
                }
            }
            Protocol::Frozen { point } => point.validate()?,
            _ => {}
        }
        Ok(Self { protocol, j0, t_star })
    }

    pub fn cosine(j0: f64, t_star: f64) -> Result<Self> {
        Self::new(Protocol::Cosine, j0, t_star)
    }

    pub fn exponential(j0: f64, t_star: f64, alpha: f64) -> Result<Self> {
        Self::new(
            Protocol::Exponential {
                alpha,
                vb: VbProfile::AsPrinted,
            },
            j0,
            t_star,
        )
    }

    /// Three-step schedule; `J0` is taken as `J1_0`.
    pub fn three_step(t_star: f64, t_op: f64, j1_0: f64, j2_0: f64) -> Result<Self> {
        Self::new(Protocol::ThreeStep { t_op, j1_0, j2_0 }, j1_0, t_star)
    }

    pub fn frozen(point: CouplingPoint, t_star: f64) -> Result<Self> {
        Self::new(Protocol::Frozen { point }, 1.0, t_star)
    }

    /// Same protocol with a different total time.
    pub fn with_t_star(&self, t_star: f64) -> Result<Self> {
        Self::new(self.protocol, self.j0, t_star)
    }

    /// Couplings, onsite energies and their time derivatives at `t`.
    pub fn at(&self, t: f64) -> Result<CouplingPoint> {
        let slack = RANGE_SLACK * self.t_star;
        if !(t >= -slack && t <= self.t_star + slack) {
            return Err(Error::TimeOutOfRange { t, t_star: self.t_star });
        }
        let t = t.clamp(0.0, self.t_star);
        Ok(match self.protocol {
            Protocol::Cosine => cosine_schedule(t, self.j0, self.t_star),
            Protocol::Exponential { alpha, vb } => exponential_point(t, self.j0, self.t_star, alpha, vb),
            Protocol::ThreeStep { t_op, j1_0, j2_0 } => three_step_point(t, self.t_star, t_op, j1_0, j2_0),
            Protocol::Frozen { point } => CouplingPoint::new(point.j1, point.j2, point.va, point.vb),
        })
    }
}

fn check_time(t: f64, t_star: f64) -> Result<()> {
    if t_star > 0.0 && (0.0..=t_star).contains(&t) {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange { t, t_star })
    }
}

/// `J1 = (J0/2)(1 + cos pi t/t*)`, `J2 = (J0/2)(1 - cos pi t/t*)`,
/// `Vb = -Va = J0 sin(pi t/t*)`. The caller guarantees `0 <= t <= t*`.
fn cosine_schedule(t: f64, j0: f64, t_star: f64) -> CouplingPoint {
    let w = PI / t_star;
    let (s, c) = (w * t).sin_cos();
    let vb = j0 * s;
    CouplingPoint {
        j1: 0.5 * j0 * (1.0 + c),
        j2: 0.5 * j0 * (1.0 - c),
        va: -vb,
        vb,
        dj1_dt: -0.5 * j0 * w * s,
        dj2_dt: 0.5 * j0 * w * s,
        dva_dt: -j0 * w * c,
        dvb_dt: j0 * w * c,
    }
}

/// Cosine schedule at `t`.
pub fn cosine_at(t: f64, j0: f64, t_star: f64) -> Result<CouplingPoint> {
    check_time(t, t_star)?;
    Ok(cosine_schedule(t, j0, t_star))
}

/// Exponential schedule at `t` with the as-printed onsite profile.
pub fn exponential_at(t: f64, j0: f64, t_star: f64, alpha: f64) -> Result<CouplingPoint> {
    check_time(t, t_star)?;
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("must be > 0, got {alpha}")));
    }
    Ok(exponential_point(t, j0, t_star, alpha, VbProfile::AsPrinted))
}

/// Three-step schedule at `t`.
pub fn three_step_at(t: f64, t_star: f64, t_op: f64, j1_0: f64, j2_0: f64) -> Result<CouplingPoint> {
    check_time(t, t_star)?;
    DriveSchedule::three_step(t_star, t_op, j1_0, j2_0)?.at(t)
}

/// `g(s) = (1 - e^{-alpha s/t*}) / (1 - e^{-alpha})` and `dg/ds`.
fn exp_ramp(s: f64, t_star: f64, alpha: f64) -> (f64, f64) {
    let denom = -(-alpha).exp_m1();
    let x = -alpha * s / t_star;
    (-x.exp_m1() / denom, alpha / t_star * x.exp() / denom)
}

fn exponential_point(t: f64, j0: f64, t_star: f64, alpha: f64, profile: VbProfile) -> CouplingPoint {
    let (g2, dg2) = exp_ramp(t, t_star, alpha);
    let (g1, dg1) = exp_ramp(t_star - t, t_star, alpha);
    // Vb = J0 sqrt(g(2 tau)) with tau = t, or min(t, t* - t) when mirrored.
    let (tau, dtau) = match profile {
        VbProfile::AsPrinted => (t, 1.0),
        VbProfile::TimeSymmetric if t <= 0.5 * t_star => (t, 1.0),
        VbProfile::TimeSymmetric => (t_star - t, -1.0),
    };
    let (gv, dgv) = exp_ramp(2.0 * tau, t_star, alpha);
    let vb = j0 * gv.max(0.0).sqrt();
    // d/dt sqrt(g(2 tau)) = g'(2 tau) tau' / sqrt(g); infinite at tau = 0.
    let dvb = if gv > 0.0 {
        j0 * dgv * dtau / gv.sqrt()
    } else {
        f64::INFINITY * dtau
    };
    CouplingPoint {
        j1: j0 * g1,
        j2: j0 * g2,
        va: -vb,
        vb,
        dj1_dt: -j0 * dg1,
        dj2_dt: j0 * dg2,
        dva_dt: -dvb,
        dvb_dt: dvb,
    }
}

fn three_step_point(t: f64, t_star: f64, t_op: f64, j1_0: f64, j2_0: f64) -> CouplingPoint {
    let slope = (j1_0 - j2_0) / t_op;
    let (j1, dj1) = if t <= t_star - t_op {
        (j1_0, 0.0)
    } else {
        (slope * t_star * (1.0 - t / t_star), -slope)
    };
    let (j2, dj2) = if t <= t_op { (j2_0 + slope * t, slope) } else { (j1_0, 0.0) };
    CouplingPoint {
        j1,
        j2,
        dj1_dt: dj1,
        dj2_dt: dj2,
        ..CouplingPoint::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn cosine_endpoints_and_midpoint() {
        let s = DriveSchedule::cosine(1.0, 10.0).unwrap();
        let p = s.at(0.0).unwrap();
        assert_eq!((p.j1, p.j2, p.vb), (1.0, 0.0, 0.0));
        let p = s.at(5.0).unwrap();
        assert_abs_diff_eq!(p.j1, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.j2, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.vb, 1.0, epsilon = 1e-15);
        let p = s.at(10.0).unwrap();
        assert_abs_diff_eq!(p.j1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.j2, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.vb, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn exponential_endpoints() {
        let s = DriveSchedule::exponential(1.0, 100.0, 3.2).unwrap();
        let p = s.at(0.0).unwrap();
        assert_eq!((p.j1, p.j2, p.vb), (1.0, 0.0, 0.0));
        let p = s.at(100.0).unwrap();
        assert_abs_diff_eq!(p.j1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.j2, 1.0, epsilon = 1e-15);
        let expected = ((1.0 - (-6.4f64).exp()) / (1.0 - (-3.2f64).exp())).sqrt();
        assert_relative_eq!(p.vb, expected, max_relative = 1e-14);
        assert_abs_diff_eq!(p.vb, 1.0202, epsilon = 5e-5);
        assert_eq!(p.va, -p.vb);
    }

    #[test]
    fn exponential_small_alpha_is_linear() {
        let s = DriveSchedule::exponential(1.0, 1.0, 1e-9).unwrap();
        let p = s.at(0.5).unwrap();
        assert_abs_diff_eq!(p.j1, 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(p.j2, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn time_symmetric_profile_mirrors() {
        let s = DriveSchedule::new(
            Protocol::Exponential {
                alpha: 3.2,
                vb: VbProfile::TimeSymmetric,
            },
            1.0,
            50.0,
        )
        .unwrap();
        for t in [1.0, 7.5, 20.0] {
            let a = s.at(t).unwrap();
            let b = s.at(50.0 - t).unwrap();
            assert_relative_eq!(a.vb, b.vb, max_relative = 1e-13);
            assert_relative_eq!(a.dvb_dt, -b.dvb_dt, max_relative = 1e-12);
        }
        assert_abs_diff_eq!(s.at(50.0).unwrap().vb, 0.0, epsilon = 1e-7);
    }

    #[test]
    fn exponential_derivative_diverges_at_start() {
        let s = DriveSchedule::exponential(1.0, 10.0, 3.0).unwrap();
        assert!(s.at(0.0).unwrap().dvb_dt.is_infinite());
        assert!(s.at(1e-3).unwrap().dvb_dt.is_finite());
    }

    #[test]
    fn three_step_pieces() {
        let s = DriveSchedule::three_step(10.0, 2.0, 1.0, 0.2).unwrap();
        let p = s.at(0.0).unwrap();
        assert_eq!((p.j1, p.j2), (1.0, 0.2));
        for t in [2.0, 5.0, 8.0] {
            let p = s.at(t).unwrap();
            assert_abs_diff_eq!(p.j1, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(p.j2, 1.0, epsilon = 1e-15);
        }
        let p = s.at(10.0).unwrap();
        assert_abs_diff_eq!(p.j1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.j2, 1.0, epsilon = 1e-15);
        let p = s.at(9.0).unwrap();
        assert_abs_diff_eq!(p.j1, 0.4, epsilon = 1e-14);
        assert_eq!((p.va, p.vb), (0.0, 0.0));
    }

    #[test]
    fn three_step_rejects_long_ramp() {
        assert!(DriveSchedule::three_step(10.0, 6.0, 1.0, 0.0).is_err());
        assert!(DriveSchedule::three_step(10.0, 2.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn out_of_range_times() {
        let s = DriveSchedule::cosine(1.0, 10.0).unwrap();
        assert!(matches!(s.at(-0.1), Err(Error::TimeOutOfRange { .. })));
        assert!(s.at(10.1).is_err());
        assert!(s.at(10.0 + 1e-13).is_ok());
        assert!(cosine_at(11.0, 1.0, 10.0).is_err());
        assert!(exponential_at(-1.0, 1.0, 10.0, 3.2).is_err());
    }

    #[test]
    fn free_functions_agree_with_schedule() {
        let s = DriveSchedule::exponential(1.0, 40.0, 2.5).unwrap();
        assert_eq!(exponential_at(13.0, 1.0, 40.0, 2.5).unwrap(), s.at(13.0).unwrap());
        let s = DriveSchedule::cosine(1.0, 40.0).unwrap();
        assert_eq!(cosine_at(13.0, 1.0, 40.0).unwrap(), s.at(13.0).unwrap());
        let s = DriveSchedule::three_step(40.0, 5.0, 1.0, 0.1).unwrap();
        assert_eq!(three_step_at(37.0, 40.0, 5.0, 1.0, 0.1).unwrap(), s.at(37.0).unwrap());
    }

    #[test]
    fn invalid_construction() {
        assert!(DriveSchedule::cosine(1.0, 0.0).is_err());
        assert!(DriveSchedule::cosine(0.0, 1.0).is_err());
        assert!(DriveSchedule::exponential(1.0, 1.0, 0.0).is_err());
        assert!(DriveSchedule::exponential(1.0, 1.0, f64::NAN).is_err());
    }
}
