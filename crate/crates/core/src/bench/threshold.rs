//! Threshold estimation from logical error rates at several distances.
//!
//! Near threshold the rates are fitted to `A + B·x + C·x²` with
//! `x = (p − p_th)·d^(1/ν)`. For fixed `(p_th, ν)` the coefficients follow
//! from weighted linear least squares, so only the two nonlinear parameters
//! are searched, on a grid refined around the best cell.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use super::stats::{wilson_interval, Z_95};
use crate::error::{Error, Result};

pub const ANSATZ: &str = "A + B*x + C*x^2, x = (p - p_th) * d^(1/nu)";
pub const DEFAULT_WINDOW: f64 = 0.3;
pub const DEFAULT_BOOTSTRAP: usize = 200;
const NU_RANGE: (f64, f64) = (0.3, 3.0);
const GRID: usize = 41;
const REFINEMENTS: usize = 4;
/// Lower limit on a point's standard error, so exact zeros keep a finite
/// weight.
const SIGMA_FLOOR: f64 = 1e-4;

/// One measured logical error rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdPoint {
    pub distance: usize,
    pub p: f64,
    pub logical_errors: u64,
    pub shots: u64,
}

impl ThresholdPoint {
    pub fn rate(&self) -> f64 {
        self.logical_errors as f64 / self.shots as f64
    }

    fn sigma(&self) -> f64 {
        let (lo, hi) = wilson_interval(self.logical_errors, self.shots, Z_95).unwrap_or((0.0, 1.0));
        ((hi - lo) / (2.0 * Z_95)).max(SIGMA_FLOOR)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ThresholdOptions {
    /// Relative half-width of the fit window around the crossing.
    pub window: f64,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            window: DEFAULT_WINDOW,
            bootstrap: DEFAULT_BOOTSTRAP,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdFit {
    pub p_th: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub nu: f64,
    pub coefficients: [f64; 3],
    /// Mean crossing of consecutive-distance curves, the window centre.
    pub crossing: f64,
    pub window: (f64, f64),
    /// Whether too few points fell in the window and all points were used.
    pub window_fallback: bool,
    pub points_used: usize,
    pub bootstrap: usize,
    pub ansatz: &'static str,
    pub residual: f64,
}

/// Crossing points of consecutive distances, interpolated linearly in `p`
/// where the larger distance stops being better.
pub fn crossings(points: &[ThresholdPoint]) -> Vec<f64> {
    let mut distances: Vec<usize> = points.iter().map(|q| q.distance).collect();
    distances.sort_unstable();
    distances.dedup();
    let curve = |d: usize| {
        let mut c: Vec<(f64, f64)> = points
            .iter()
            .filter(|q| q.distance == d)
            .map(|q| (q.p, q.rate()))
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    };
    let mut out = Vec::new();
    for pair in distances.windows(2) {
        let (small, large) = (curve(pair[0]), curve(pair[1]));
        let diffs: Vec<(f64, f64)> = small
            .iter()
            .filter_map(|&(p, r)| {
                large
                    .iter()
                    .find(|&&(q, _)| q == p)
                    .map(|&(_, r2)| (p, r2 - r))
            })
            .collect();
        for w in diffs.windows(2) {
            let ((p0, d0), (p1, d1)) = (w[0], w[1]);
            if d0 <= 0.0 && d1 > 0.0 {
                out.push(p0 + (p1 - p0) * (-d0) / (d1 - d0));
                break;
            }
        }
    }
    out
}

/// Weighted least-squares coefficients and residual for fixed `(p_th, nu)`.
fn fit_linear(data: &[(f64, f64, f64, f64)], p_th: f64, nu: f64) -> Option<([f64; 3], f64)> {
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for &(d, p, y, w) in data {
        let x = (p - p_th) * d.powf(1.0 / nu);
        let row = [1.0, x, x * x];
        for i in 0..3 {
            atb[i] += w * row[i] * y;
            for j in 0..3 {
                ata[i][j] += w * row[i] * row[j];
            }
        }
    }
    let c = solve3(ata, atb)?;
    let residual = data
        .iter()
        .map(|&(d, p, y, w)| {
            let x = (p - p_th) * d.powf(1.0 / nu);
            let r = y - (c[0] + c[1] * x + c[2] * x * x);
            w * r * r
        })
        .sum();
    Some((c, residual))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Grid search over `(p_th, nu)`, refined around the best cell.
fn fit(data: &[(f64, f64, f64, f64)], p_range: (f64, f64)) -> Option<(f64, f64, [f64; 3], f64)> {
    let (mut p_lo, mut p_hi) = p_range;
    let (mut nu_lo, mut nu_hi) = NU_RANGE;
    let mut best: Option<(f64, f64, [f64; 3], f64)> = None;
    for _ in 0..REFINEMENTS {
        for i in 0..GRID {
            let p_th = p_lo + (p_hi - p_lo) * i as f64 / (GRID - 1) as f64;
            for j in 0..GRID {
                let nu = nu_lo + (nu_hi - nu_lo) * j as f64 / (GRID - 1) as f64;
                if let Some((c, r)) = fit_linear(data, p_th, nu) {
                    if best.is_none_or(|b| r < b.3) {
                        best = Some((p_th, nu, c, r));
                    }
                }
            }
        }
        let (p_th, nu, _, _) = best?;
        let dp = 2.0 * (p_hi - p_lo) / (GRID - 1) as f64;
        let dn = 2.0 * (nu_hi - nu_lo) / (GRID - 1) as f64;
        (p_lo, p_hi) = ((p_th - dp).max(p_range.0), (p_th + dp).min(p_range.1));
        (nu_lo, nu_hi) = ((nu - dn).max(NU_RANGE.0), (nu + dn).min(NU_RANGE.1));
    }
    best
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Fits the threshold and a parametric bootstrap interval, resampling each
/// point's error count from a binomial at its measured rate.
pub fn estimate_threshold(points: &[ThresholdPoint], opts: &ThresholdOptions) -> Result<ThresholdFit> {
    let fail = |m: String| Err(Error::Estimation(m));
    if points.iter().any(|q| q.shots == 0 || q.logical_errors > q.shots) {
        return fail("every point needs shots > 0 and errors <= shots".into());
    }
    let n_d = distinct(points.iter().map(|q| q.distance as f64));
    let n_p = distinct(points.iter().map(|q| q.p));
    if n_d < 3 || n_p < 4 {
        return fail(format!(
            "need at least 3 distances and 4 error rates, got {n_d} and {n_p}"
        ));
    }
    let cross = crossings(points);
    if cross.is_empty() {
        return fail("no crossing in the data range".into());
    }
    let crossing = cross.iter().sum::<f64>() / cross.len() as f64;
    let window = (crossing * (1.0 - opts.window), crossing * (1.0 + opts.window));
    let mut used: Vec<ThresholdPoint> = points
        .iter()
        .copied()
        .filter(|q| q.p >= window.0 && q.p <= window.1)
        .collect();
    let window_fallback = distinct(used.iter().map(|q| q.p)) < 3
        || distinct(used.iter().map(|q| q.distance as f64)) < 3;
    if window_fallback {
        used = points.to_vec();
    }
    let p_range = used
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| (lo.min(q.p), hi.max(q.p)));
    let to_data = |pts: &[ThresholdPoint]| -> Vec<(f64, f64, f64, f64)> {
        pts.iter()
            .map(|q| (q.distance as f64, q.p, q.rate(), 1.0 / q.sigma().powi(2)))
            .collect()
    };
    let Some((p_th, nu, coefficients, residual)) = fit(&to_data(&used), p_range) else {
        return fail("least-squares fit is singular".into());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut samples = Vec::with_capacity(opts.bootstrap);
    for _ in 0..opts.bootstrap {
        let resampled: Vec<ThresholdPoint> = used
            .iter()
            .map(|q| {
                let k = Binomial::new(q.shots, q.rate())
                    .map(|b| b.sample(&mut rng))
                    .unwrap_or(q.logical_errors);
                ThresholdPoint {
                    logical_errors: k,
                    ..*q
                }
            })
            .collect();
        if let Some((p, ..)) = fit(&to_data(&resampled), p_range) {
            samples.push(p);
        }
    }
    let (ci_low, ci_high) = if samples.is_empty() {
        (p_th, p_th)
    } else {
        samples.sort_by(f64::total_cmp);
        let at = |q: f64| samples[((samples.len() - 1) as f64 * q).round() as usize];
        (at(0.025), at(0.975))
    };
    Ok(ThresholdFit {
        p_th,
        ci_low,
        ci_high,
        nu,
        coefficients,
        crossing,
        window,
        window_fallback,
        points_used: used.len(),
        bootstrap: samples.len(),
        ansatz: ANSATZ,
        residual,
    })
}
