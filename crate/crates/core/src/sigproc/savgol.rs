use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SavGolConfig {
    /// Window length in samples (odd).
    pub w: usize,
    /// Polynomial degree.
    pub p: usize,
}

impl Default for SavGolConfig {
    fn default() -> Self {
        SavGolConfig { w: 101, p: 2 }
    }
}

impl SavGolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "Savitzky-Golay window must be odd, got {}",
                self.w
            )));
        }
        if self.p >= self.w {
            return Err(Error::InvalidConfig(format!(
                "polynomial degree {} must be below the window length {}",
                self.p, self.w
            )));
        }
        Ok(())
    }
}

/// Solves `a x = b` in place (Gaussian elimination with partial pivoting).
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Weights `h` such that `sum_j h[j] y[j]` is the value at abscissa `at` of the
/// degree-`p` least-squares fit through `(x_j, y_j)`, for `x_j = j - center`.
fn fit_row(len: usize, center: f64, p: usize, at: f64) -> Vec<f64> {
    // scale abscissae to [-1, 1] so the normal equations stay well conditioned
    let scale = (len as f64 / 2.0).max(1.0);
    let xs: Vec<f64> = (0..len).map(|j| (j as f64 - center) / scale).collect();
    let x0 = (at - center) / scale;
    let d = p + 1;
    let mut gram = vec![vec![0.0; d]; d];
    for &x in &xs {
        let mut pw = vec![1.0; 2 * d - 1];
        for i in 1..pw.len() {
            pw[i] = pw[i - 1] * x;
        }
        for r in 0..d {
            for c in 0..d {
                gram[r][c] += pw[r + c];
            }
        }
    }
    // h_j = v(x0)^T G^{-1} v(x_j); solve G u = v(x0) once
    let v0: Vec<f64> = (0..d).map(|i| x0.powi(i as i32)).collect();
    let u = solve(gram, v0);
    xs.iter()
        .map(|&x| {
            let mut pw = 1.0;
            let mut s = 0.0;
            for ui in &u {
                s += ui * pw;
                pw *= x;
            }
            s
        })
        .collect()
}

/// Central-point weights of the degree-`p` least-squares fit over `w` points.
pub fn savgol_coefficients(cfg: &SavGolConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let h = (cfg.w / 2) as f64;
    let mut c = fit_row(cfg.w, h, cfg.p, h);
    // symmetrize away rounding noise
    for i in 0..cfg.w / 2 {
        let m = 0.5 * (c[i] + c[cfg.w - 1 - i]);
        c[i] = m;
        c[cfg.w - 1 - i] = m;
    }
    Ok(c)
}

/// Savitzky-Golay smoothing. Points closer than `w / 2` to either end are
/// evaluated from a degree-`p` fit over the part of their window that exists,
/// `[i - w/2, i + w/2]` clipped to the signal (widened inward if that leaves
/// fewer than `p + 1` samples).
pub fn savgol_smooth(signal: &[f64], cfg: &SavGolConfig) -> Result<Vec<f64>> {
    let coeffs = savgol_coefficients(cfg)?;
    let n = signal.len();
    let w = cfg.w;
    if n < w {
        return Err(Error::TooShort { needed: w, got: n });
    }
    let half = w / 2;
    let mut out = vec![0.0; n];
    for i in half..n - half {
        out[i] = coeffs
            .iter()
            .zip(&signal[i - half..=i + half])
            .map(|(c, x)| c * x)
            .sum();
    }
    let edge = |i: usize| {
        let mut lo = i.saturating_sub(half);
        let mut hi = (i + half + 1).min(n);
        let need = cfg.p + 1;
        if hi - lo < need {
            if lo == 0 {
                hi = need;
            } else {
                lo = n - need;
            }
        }
        let center = (lo + hi - 1) as f64 / 2.0 - lo as f64;
        let row = fit_row(hi - lo, center, cfg.p, (i - lo) as f64);
        row.iter().zip(&signal[lo..hi]).map(|(c, x)| c * x).sum::<f64>()
    };
    for i in 0..half {
        out[i] = edge(i);
        out[n - 1 - i] = edge(n - 1 - i);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_point_quadratic_weights() {
        let c = savgol_coefficients(&SavGolConfig { w: 5, p: 2 }).unwrap();
        let want = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|x| x / 35.0);
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn moving_average() {
        let c = savgol_coefficients(&SavGolConfig { w: 3, p: 0 }).unwrap();
        for x in c {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for (w, p) in [(5, 2), (7, 3), (101, 2), (21, 4), (9, 0), (11, 6)] {
            let c = savgol_coefficients(&SavGolConfig { w, p }).unwrap();
            assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12, "w={w} p={p}");
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(savgol_coefficients(&SavGolConfig { w: 4, p: 2 }).is_err());
        assert!(savgol_coefficients(&SavGolConfig { w: 5, p: 5 }).is_err());
        assert!(savgol_smooth(&[1.0; 4], &SavGolConfig { w: 5, p: 2 }).is_err());
    }

    #[test]
    fn quadratic_is_fixed_point() {
        let y: Vec<f64> = (0..400)
            .map(|i| {
                let x = i as f64 / 100.0;
                2.0 * x * x - 3.0 * x + 1.0
            })
            .collect();
        let s = savgol_smooth(&y, &SavGolConfig::default()).unwrap();
        let err = y.iter().zip(&s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn constant_unchanged() {
        let s = savgol_smooth(&[5.0; 30], &SavGolConfig { w: 7, p: 2 }).unwrap();
        assert!(s.iter().all(|x| (x - 5.0).abs() < 1e-12));
    }
}
