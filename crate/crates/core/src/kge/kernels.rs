//! Per-family composition `φ(h, r)` and its reverse-mode derivative.
//!
//! Scores are `γ⟨φ, t⟩` (bilinear) or `−γ‖φ − t‖` (distance); everything
//! family-specific lives in these two functions.

use super::ModelFamily;
use crate::scalar::Scalar;

/// Rotation matrix of the (not necessarily unit) quaternion `q`, i.e. the
/// rotation of `q / |q|`. Returns the zero matrix for `q = 0`.
#[inline]
fn quat_rotation<S: Scalar>(q: &[S]) -> ([[S; 3]; 3], S) {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let n = w * w + x * x + y * y + z * z;
    let two = S::lit(2.0);
    if n == S::zero() {
        return ([[S::zero(); 3]; 3], n);
    }
    let a = [
        [w * w + x * x - y * y - z * z, two * (x * y - w * z), two * (x * z + w * y)],
        [two * (x * y + w * z), w * w - x * x + y * y - z * z, two * (y * z - w * x)],
        [two * (x * z - w * y), two * (y * z + w * x), w * w - x * x - y * y + z * z],
    ];
    let mut r = [[S::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = a[i][j] / n;
        }
    }
    (r, n)
}

/// `∂A/∂q_k` for the unnormalized rotation numerator `A(q)`.
#[inline]
fn quat_numerator_partials<S: Scalar>(q: &[S]) -> [[[S; 3]; 3]; 4] {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let two = S::lit(2.0);
    let m = |a: [[S; 3]; 3]| {
        let mut o = a;
        for row in o.iter_mut() {
            for v in row.iter_mut() {
                *v = two * *v;
            }
        }
        o
    };
    [
        m([[w, -z, y], [z, w, -x], [-y, x, w]]),
        m([[x, y, z], [y, -x, -w], [z, w, -x]]),
        m([[-y, x, w], [x, y, z], [-w, z, -y]]),
        m([[-z, -w, x], [w, -z, y], [x, y, z]]),
    ]
}

/// Writes `φ(src, rel)` into `out` (length `phi_width`).
pub(crate) fn compose<S: Scalar>(family: ModelFamily, dim: usize, src: &[S], rel: &[S], out: &mut [S]) {
    match family {
        ModelFamily::TransE => {
            for i in 0..dim {
                out[i] = src[i] + rel[i];
            }
        }
        ModelFamily::Cp => {
            for i in 0..dim {
                out[i] = src[i] * rel[i];
            }
        }
        ModelFamily::ComplEx => {
            for i in 0..dim {
                let (a, b) = (src[2 * i], src[2 * i + 1]);
                let (c, d) = (rel[2 * i], rel[2 * i + 1]);
                out[2 * i] = a * c - b * d;
                out[2 * i + 1] = a * d + b * c;
            }
        }
        ModelFamily::Rescal => {
            for v in out[..dim].iter_mut() {
                *v = S::zero();
            }
            for i in 0..dim {
                let hi = src[i];
                let row = &rel[i * dim..(i + 1) * dim];
                for j in 0..dim {
                    out[j] += hi * row[j];
                }
            }
        }
        ModelFamily::RotatE => {
            for i in 0..dim {
                let (a, b) = (src[2 * i], src[2 * i + 1]);
                let (s, c) = rel[i].sin_cos();
                out[2 * i] = a * c - b * s;
                out[2 * i + 1] = a * s + b * c;
            }
        }
        ModelFamily::RotE => {
            let trans = &rel[dim..];
            for i in 0..dim {
                let (a, b) = (src[2 * i], src[2 * i + 1]);
                let (s, c) = rel[i].sin_cos();
                out[2 * i] = a * c - b * s + trans[2 * i];
                out[2 * i + 1] = a * s + b * c + trans[2 * i + 1];
            }
        }
        ModelFamily::QuatE => {
            for i in 0..dim {
                let h = &src[4 * i..4 * i + 4];
                let q = &rel[4 * i..4 * i + 4];
                let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
                let o = &mut out[4 * i..4 * i + 4];
                if norm == S::zero() {
                    o.fill(S::zero());
                    continue;
                }
                let (w, x, y, z) = (q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm);
                let (a, b, c, d) = (h[0], h[1], h[2], h[3]);
                o[0] = a * w - b * x - c * y - d * z;
                o[1] = a * x + b * w + c * z - d * y;
                o[2] = a * y - b * z + c * w + d * x;
                o[3] = a * z + b * y - c * x + d * w;
            }
        }
        ModelFamily::UniBiO2 => {
            for i in 0..dim {
                let (h0, h1) = (src[2 * i], src[2 * i + 1]);
                let (theta, sigma) = (rel[2 * i], rel[2 * i + 1]);
                let (s, c) = theta.sin_cos();
                // σ Rᵀ h with R = [[c, −s], [s, c]]
                out[2 * i] = sigma * (c * h0 + s * h1);
                out[2 * i + 1] = sigma * (-s * h0 + c * h1);
            }
        }
        ModelFamily::UniBiO3 => {
            for i in 0..dim {
                let h = &src[3 * i..3 * i + 3];
                let q = &rel[5 * i..5 * i + 4];
                let sigma = rel[5 * i + 4];
                let (r, _) = quat_rotation(q);
                for j in 0..3 {
                    out[3 * i + j] = sigma * (r[0][j] * h[0] + r[1][j] * h[1] + r[2][j] * h[2]);
                }
            }
        }
    }
}

/// Accumulates `∂L/∂src` and `∂L/∂rel` given `∂L/∂φ`.
pub(crate) fn compose_backward<S: Scalar>(
    family: ModelFamily,
    dim: usize,
    src: &[S],
    rel: &[S],
    dphi: &[S],
    dsrc: &mut [S],
    drel: &mut [S],
) {
    match family {
        ModelFamily::TransE => {
            for i in 0..dim {
                dsrc[i] += dphi[i];
                drel[i] += dphi[i];
            }
        }
        ModelFamily::Cp => {
            for i in 0..dim {
                dsrc[i] += dphi[i] * rel[i];
                drel[i] += dphi[i] * src[i];
            }
        }
        ModelFamily::ComplEx => {
            for i in 0..dim {
                let (a, b) = (src[2 * i], src[2 * i + 1]);
                let (c, d) = (rel[2 * i], rel[2 * i + 1]);
                let (gr, gi) = (dphi[2 * i], dphi[2 * i + 1]);
                dsrc[2 * i] += gr * c + gi * d;
                dsrc[2 * i + 1] += -gr * d + gi * c;
                drel[2 * i] += gr * a + gi * b;
                drel[2 * i + 1] += -gr * b + gi * a;
            }
        }
        ModelFamily::Rescal => {
            for i in 0..dim {
                let row = &rel[i * dim..(i + 1) * dim];
                let mut acc = S::zero();
                for j in 0..dim {
                    acc += row[j] * dphi[j];
                }
                dsrc[i] += acc;
                let hi = src[i];
                let drow = &mut drel[i * dim..(i + 1) * dim];
                for j in 0..dim {
                    drow[j] += hi * dphi[j];
                }
            }
        }
        ModelFamily::RotatE | ModelFamily::RotE => {
            for i in 0..dim {
                let (a, b) = (src[2 * i], src[2 * i + 1]);
                let (s, c) = rel[i].sin_cos();
                let (gr, gi) = (dphi[2 * i], dphi[2 * i + 1]);
                dsrc[2 * i] += gr * c + gi * s;
                dsrc[2 * i + 1] += -gr * s + gi * c;
                // d/dθ of (a c − b s, a s + b c) = (−a s − b c, a c − b s)
                drel[i] += gr * (-a * s - b * c) + gi * (a * c - b * s);
            }
            if family == ModelFamily::RotE {
                for k in 0..2 * dim {
                    drel[dim + k] += dphi[k];
                }
            }
        }
        ModelFamily::QuatE => {
            for i in 0..dim {
                let h = &src[4 * i..4 * i + 4];
                let q = &rel[4 * i..4 * i + 4];
                let g = &dphi[4 * i..4 * i + 4];
                let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
                if norm == S::zero() {
                    continue;
                }
                let p = [q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm];
                let (w, x, y, z) = (p[0], p[1], p[2], p[3]);
                let (a, b, c, d) = (h[0], h[1], h[2], h[3]);
                let g4 = |v: [S; 4]| g[0] * v[0] + g[1] * v[1] + g[2] * v[2] + g[3] * v[3];
                let dh = &mut dsrc[4 * i..4 * i + 4];
                dh[0] += g4([w, x, y, z]);
                dh[1] += g4([-x, w, -z, y]);
                dh[2] += g4([-y, z, w, -x]);
                dh[3] += g4([-z, -y, x, w]);
                let dp = [g4([a, b, c, d]), g4([-b, a, d, -c]), g4([-c, -d, a, b]), g4([-d, c, -b, a])];
                // through p = q / |q|: (dp − p (p·dp)) / |q|
                let proj = p[0] * dp[0] + p[1] * dp[1] + p[2] * dp[2] + p[3] * dp[3];
                let dq = &mut drel[4 * i..4 * i + 4];
                for k in 0..4 {
                    dq[k] += (dp[k] - p[k] * proj) / norm;
                }
            }
        }
        ModelFamily::UniBiO2 => {
            for i in 0..dim {
                let (h0, h1) = (src[2 * i], src[2 * i + 1]);
                let (theta, sigma) = (rel[2 * i], rel[2 * i + 1]);
                let (s, c) = theta.sin_cos();
                let (g0, g1) = (dphi[2 * i], dphi[2 * i + 1]);
                let (u0, u1) = (c * h0 + s * h1, -s * h0 + c * h1);
                dsrc[2 * i] += sigma * (c * g0 - s * g1);
                dsrc[2 * i + 1] += sigma * (s * g0 + c * g1);
                drel[2 * i] += sigma * (u1 * g0 - u0 * g1);
                drel[2 * i + 1] += u0 * g0 + u1 * g1;
            }
        }
        ModelFamily::UniBiO3 => {
            for i in 0..dim {
                let h = &src[3 * i..3 * i + 3];
                let q = &rel[5 * i..5 * i + 4];
                let sigma = rel[5 * i + 4];
                let g = &dphi[3 * i..3 * i + 3];
                let (r, n) = quat_rotation(q);
                if n == S::zero() {
                    continue;
                }
                let mut dsigma = S::zero();
                for a in 0..3 {
                    let mut acc = S::zero();
                    for j in 0..3 {
                        acc += r[a][j] * g[j];
                        dsigma += r[a][j] * h[a] * g[j];
                    }
                    dsrc[3 * i + a] += sigma * acc;
                }
                drel[5 * i + 4] += dsigma;
                // dR_aj = σ h_a g_j;  ∂R/∂q_k = (∂A/∂q_k − 2 q_k R) / n
                let partials = quat_numerator_partials(q);
                let two = S::lit(2.0);
                for k in 0..4 {
                    let mut acc = S::zero();
                    for a in 0..3 {
                        for j in 0..3 {
                            let dr = (partials[k][a][j] - two * q[k] * r[a][j]) / n;
                            acc += sigma * h[a] * g[j] * dr;
                        }
                    }
                    drel[5 * i + k] += acc;
                }
            }
        }
    }
}
