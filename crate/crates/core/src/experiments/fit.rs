use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Least-squares cubic `c3 x³ + c2 x² + c1 x + c0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicFit {
    /// `[c3, c2, c1, c0]`.
    pub coefficients: [f64; 4],
    pub residual_rms: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl CubicFit {
    pub fn predict(&self, x: f64) -> f64 {
        let [c3, c2, c1, c0] = self.coefficients;
        ((c3 * x + c2) * x + c1) * x + c0
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.xs.iter().zip(&self.ys).map(|(&x, &y)| y - self.predict(x)).collect()
    }

    /// `max_j |a_j · r| / ||a_j||` over the design columns `1, x, x², x³`,
    /// divided by `||y||`. Zero at the exact least-squares optimum.
    pub fn normal_equation_error(&self) -> f64 {
        let r = self.residuals();
        let ynorm = self.ys.iter().map(|y| y * y).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        (0..4)
            .map(|p| {
                let col: Vec<f64> = self.xs.iter().map(|x| x.powi(p)).collect();
                let cn = col.iter().map(|c| c * c).sum::<f64>().sqrt();
                col.iter().zip(&r).map(|(c, r)| c * r).sum::<f64>().abs() / cn
            })
            .fold(0.0, f64::max)
            / ynorm
    }
}

/// Ordinary least squares on the Vandermonde basis. The abscissae are
/// centered and scaled before solving and the coefficients mapped back.
pub fn cubic_fit(xs: &[f64], ys: &[f64]) -> Result<CubicFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            what: "cubic fit samples",
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(invalid("samples", "non-finite sample"));
    }
    let mut distinct = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::RankDeficient(distinct.len()));
    }
    let n = xs.len();
    let mid = 0.5 * (distinct[0] + distinct[distinct.len() - 1]);
    let half = 0.5 * (distinct[distinct.len() - 1] - distinct[0]);
    let a = DMatrix::from_fn(n, 4, |i, p| ((xs[i] - mid) / half).powi(p as i32));
    let y = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let d = svd
        .solve(&y, 1e-14)
        .map_err(|e| invalid("samples", format!("least-squares solve failed: {e}")))?;

    // p(x) = sum_k d_k u^k with u = (x - mid) / half; expand in powers of x.
    let mut c = [0.0f64; 4];
    for k in 0..4 {
        let scale = d[k] / half.powi(k as i32);
        for j in 0..=k {
            c[j] += scale * binomial(k, j) as f64 * (-mid).powi((k - j) as i32);
        }
    }
    let coefficients = [c[3], c[2], c[1], c[0]];
    let mut fit = CubicFit {
        coefficients,
        residual_rms: 0.0,
        xs: xs.to_vec(),
        ys: ys.to_vec(),
    };
    let r = fit.residuals();
    fit.residual_rms = (r.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    Ok(fit)
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
