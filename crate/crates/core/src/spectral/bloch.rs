use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::lattice::CouplingPoint;

/// Band energies `(E-, E+)` of the two-band Bloch Hamiltonian.
///
/// For `Vb = -Va` this is `±sqrt(Va² + J1² + J2² + 2 J1 J2 cos k)`; other
/// onsite pairs shift both bands by `(Va + Vb) / 2`.
pub fn dispersion(k: f64, c: &CouplingPoint) -> (f64, f64) {
    let mean = 0.5 * (c.va + c.vb);
    let half = 0.5 * (c.va - c.vb);
    let off_sq = c.j1 * c.j1 + c.j2 * c.j2 + 2.0 * c.j1 * c.j2 * k.cos();
    let r = (half * half + off_sq.max(0.0)).sqrt();
    (mean - r, mean + r)
}

/// `H(k) = d · sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DVector {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

pub fn d_vector(k: f64, c: &CouplingPoint) -> DVector {
    DVector {
        dx: c.j1 + c.j2 * k.cos(),
        dy: c.j2 * k.sin(),
        dz: c.va,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    pub value: i32,
    /// Accumulated angle divided by `2 pi`, before rounding.
    pub raw: f64,
}

/// Signed number of times `(dx, dy)` encircles the origin as `k` crosses the
/// Brillouin zone, from wrapped angle increments on an `n_k`-point grid.
pub fn winding_number(c: &CouplingPoint, n_k: usize) -> Result<Winding> {
    if n_k < 3 {
        return Err(Error::WindingUndefined(format!("grid of {n_k} points is too coarse")));
    }
    let scale = c.j1.abs().max(c.j2.abs());
    if (c.j1 - c.j2).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::WindingUndefined(format!(
            "J1 = J2 = {} puts the origin on the d-vector loop",
            c.j1
        )));
    }
    let angle = |i: usize| {
        let d = d_vector(TAU * i as f64 / n_k as f64, c);
        d.dy.atan2(d.dx)
    };
    let mut total = 0.0;
    let mut prev = angle(0);
    for i in 1..=n_k {
        let next = angle(i % n_k);
        let mut step = next - prev;
        if step > PI {
            step -= TAU;
        } else if step <= -PI {
            step += TAU;
        }
        total += step;
        prev = next;
    }
    let raw = total / TAU;
    let value = raw.round();
    if (raw - value).abs() > 1e-3 {
        return Err(Error::WindingUndefined(format!(
            "raw winding {raw} is not near an integer; refine the k grid"
        )));
    }
    Ok(Winding {
        value: value as i32,
        raw,
    })
}
