//! Eigenvalues of small unsymmetric matrices: Householder reduction to upper
//! Hessenberg form followed by Francis double-shift QR.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

/// All eigenvalues of a real square matrix, unordered.
pub fn real_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Eigenvalue>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch { expected: n, got: m.ncols() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Degenerate("non-finite matrix entry".into()));
    }
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    hessenberg(&mut h);
    hqr(&mut h)
}

/// Smallest eigenvalue whose imaginary part is at most `imag_tol` times the
/// spectral radius.
pub fn smallest_real_eigenvalue(m: &DMatrix<f64>, imag_tol: f64) -> Result<f64> {
    let eig = real_eigenvalues(m)?;
    let radius = eig.iter().map(|e| e.re.hypot(e.im)).fold(0.0_f64, f64::max);
    let cutoff = imag_tol * radius.max(f64::MIN_POSITIVE);
    eig.iter().filter(|e| e.im.abs() <= cutoff).map(|e| e.re).min_by(|a, b| a.total_cmp(b)).ok_or_else(|| Error::SolverFailure {
        reason: "no real eigenvalue".into(),
        iterations: 0,
        residual: f64::NAN,
    })
}

fn hessenberg(h: &mut [Vec<f64>]) {
    let n = h.len();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[i][j];
            }
            f /= hh;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for row in h.iter_mut().take(high + 1) {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * row[j];
            }
            f /= hh;
            for j in m..=high {
                row[j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m][m - 1] = scale * g;
    }
}

#[allow(clippy::many_single_char_names)]
fn hqr(h: &mut [Vec<f64>]) -> Result<Vec<Eigenvalue>> {
    let nn = h.len();
    let eps = f64::EPSILON;
    let mut wr = vec![0.0; nn];
    let mut wi = vec![0.0; nn];
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z): (f64, f64, f64, f64, f64);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i][j].abs();
        }
    }

    let mut en = nn as isize - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let max_total = 60 * nn.max(1);
    while en >= 0 {
        let n = en as usize;
        let mut l = n;
        while l > 0 {
            s = h[l - 1][l - 1].abs() + h[l][l].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[l][l - 1].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            h[n][n] += exshift;
            wr[n] = h[n][n];
            wi[n] = 0.0;
            en -= 1;
            iter = 0;
        } else if l + 1 == n {
            let w = h[n][n - 1] * h[n - 1][n];
            p = (h[n - 1][n - 1] - h[n][n]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[n][n] += exshift;
            h[n - 1][n - 1] += exshift;
            let x = h[n][n];
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                wr[n - 1] = x + z;
                wr[n] = wr[n - 1];
                if z != 0.0 {
                    wr[n] = x - w / z;
                }
                wi[n - 1] = 0.0;
                wi[n] = 0.0;
            } else {
                wr[n - 1] = x + p;
                wr[n] = x + p;
                wi[n - 1] = z;
                wi[n] = -z;
            }
            en -= 2;
            iter = 0;
        } else {
            let mut x = h[n][n];
            let mut y = h[n - 1][n - 1];
            let mut w = h[n][n - 1] * h[n - 1][n];

            if iter == 10 {
                exshift += x;
                for i in 0..=n {
                    h[i][i] -= x;
                }
                s = h[n][n - 1].abs() + h[n - 1][n - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=n {
                        h[i][i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total += 1;
            if total > max_total {
                return Err(Error::SolverFailure { reason: "QR iteration did not converge".into(), iterations: total, residual: h[n][n - 1].abs() });
            }

            let mut m = n - 2;
            loop {
                z = h[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[m + 1][m] + h[m][m + 1];
                q = h[m + 1][m + 1] - z - r - s;
                r = h[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[m][m - 1].abs() * (q.abs() + r.abs()) < eps * (p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs())) {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                h[i][i - 2] = 0.0;
                if i > m + 2 {
                    h[i][i - 3] = 0.0;
                }
            }

            for k in m..n {
                let notlast = k != n - 1;
                if k != m {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if notlast { h[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[k][k - 1] = -s * x;
                    } else if l != m {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[k][j] + q * h[k + 1][j];
                        if notlast {
                            p += r * h[k + 2][j];
                            h[k + 2][j] -= p * z;
                        }
                        h[k][j] -= p * x;
                        h[k + 1][j] -= p * y;
                    }

                    let upper = n.min(k + 3);
                    for row in h.iter_mut().take(upper + 1) {
                        p = x * row[k] + y * row[k + 1];
                        if notlast {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k] -= p;
                        row[k + 1] -= p * q;
                    }
                }
            }
        }
    }

    Ok(wr.into_iter().zip(wi).map(|(re, im)| Eigenvalue { re, im }).collect())
}
