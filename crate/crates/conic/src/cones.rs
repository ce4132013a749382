//! Euclidean projections onto the cones used by the backends.

use faer::{Mat, Side};

use crate::standard::ConeLayout;

/// Projects `(t, x)` onto the second-order cone in place.
pub fn project_soc(v: &mut [f64]) {
    let t = v[0];
    let nx = v[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
    if nx <= t {
        return;
    }
    if nx <= -t {
        v.iter_mut().for_each(|a| *a = 0.0);
        return;
    }
    let alpha = 0.5 * (t + nx);
    v[0] = alpha;
    let s = alpha / nx;
    v[1..].iter_mut().for_each(|a| *a *= s);
}

/// Symmetric eigendecomposition of a small dense matrix by cyclic Jacobi
/// rotations. `a` is row-major and is destroyed; eigenvectors are returned as
/// columns of the row-major `vecs`.
pub fn jacobi_eigen(a: &mut [f64], n: usize, vals: &mut [f64], vecs: &mut [f64]) {
    vecs.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        vecs[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        vals.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    for _sweep in 0..50 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = vecs[k * n + p];
                    let vkq = vecs[k * n + q];
                    vecs[k * n + p] = c * vkp - s * vkq;
                    vecs[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    for i in 0..n {
        vals[i] = a[i * n + i];
    }
}

const JACOBI_MAX_DIM: usize = 8;

/// Reusable buffers for PSD projections.
#[derive(Default)]
pub struct PsdWork {
    full: Vec<f64>,
    vals: Vec<f64>,
    vecs: Vec<f64>,
}

/// Projects a scaled lower-triangle vector (see [`crate::standard`]) onto the
/// PSD cone of dimension `d` in place.
pub fn project_psd(v: &mut [f64], d: usize, work: &mut PsdWork) {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    if d == 1 {
        v[0] = v[0].max(0.0);
        return;
    }
    if d <= JACOBI_MAX_DIM {
        work.full.resize(d * d, 0.0);
        work.vals.resize(d, 0.0);
        work.vecs.resize(d * d, 0.0);
        let mut k = 0;
        for j in 0..d {
            for i in j..d {
                let s = if i == j { v[k] } else { v[k] * inv };
                work.full[i * d + j] = s;
                work.full[j * d + i] = s;
                k += 1;
            }
        }
        if (0..d).all(|i| work.full[i * d + i] >= 0.0) && small_is_psd_fast(&work.full, d) {
            return;
        }
        jacobi_eigen(&mut work.full, d, &mut work.vals, &mut work.vecs);
        rebuild_packed(v, d, &work.vals, |i, e| work.vecs[i * d + e]);
        return;
    }
    let mut m = Mat::<f64>::zeros(d, d);
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            m[(i, j)] = if i == j { v[k] } else { v[k] * inv };
            k += 1;
        }
    }
    let Ok(evd) = m.self_adjoint_eigen(Side::Lower) else {
        // leave the block untouched; the next iteration retries
        return;
    };
    let s = evd.S();
    let u = evd.U();
    let vals: Vec<f64> = (0..d).map(|i| s[i]).collect();
    if vals.iter().all(|&l| l >= 0.0) {
        return;
    }
    let pos: Vec<usize> = (0..d).filter(|&e| vals[e] > 0.0).collect();
    // X₊ = U diag(λ₊) Uᵀ computed from the positive part only
    let mut scaled = Mat::<f64>::zeros(d, pos.len());
    for (c, &e) in pos.iter().enumerate() {
        let w = vals[e].sqrt();
        for i in 0..d {
            scaled[(i, c)] = u[(i, e)] * w;
        }
    }
    let prod = &scaled * scaled.transpose();
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            v[k] = if i == j { prod[(i, j)] } else { prod[(i, j)] * std::f64::consts::SQRT_2 };
            k += 1;
        }
    }
}

/// Cholesky attempt as a cheap PSD certificate for tiny blocks.
fn small_is_psd_fast(a: &[f64], d: usize) -> bool {
    let mut l = [0.0f64; JACOBI_MAX_DIM * JACOBI_MAX_DIM];
    for j in 0..d {
        let mut s = a[j * d + j];
        for k in 0..j {
            s -= l[j * d + k] * l[j * d + k];
        }
        if s <= 0.0 {
            return false;
        }
        let ljj = s.sqrt();
        l[j * d + j] = ljj;
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = s / ljj;
        }
    }
    true
}

fn rebuild_packed(v: &mut [f64], d: usize, vals: &[f64], vec: impl Fn(usize, usize) -> f64) {
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            let mut acc = 0.0;
            for (e, &l) in vals.iter().enumerate() {
                if l > 0.0 {
                    acc += l * vec(i, e) * vec(j, e);
                }
            }
            v[k] = if i == j { acc } else { acc * std::f64::consts::SQRT_2 };
            k += 1;
        }
    }
}

/// Projects a stacked vector onto the dual cone `K*` of `layout`
/// (the zero cone's dual is the whole space).
pub fn project_dual(y: &mut [f64], layout: &ConeLayout, work: &mut PsdWork) {
    let mut off = layout.zero;
    for v in &mut y[off..off + layout.nonneg] {
        *v = v.max(0.0);
    }
    off += layout.nonneg;
    for &q in &layout.soc {
        project_soc(&mut y[off..off + q]);
        off += q;
    }
    for &d in &layout.psd {
        let len = d * (d + 1) / 2;
        project_psd(&mut y[off..off + len], d, work);
        off += len;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soc_projection_cases() {
        let mut inside = [2.0, 1.0, 1.0];
        project_soc(&mut inside);
        assert_eq!(inside, [2.0, 1.0, 1.0]);
        let mut polar = [-5.0, 3.0, 4.0];
        project_soc(&mut polar);
        assert_eq!(polar, [0.0, 0.0, 0.0]);
        let mut mid = [0.0, 3.0, 4.0];
        project_soc(&mut mid);
        assert!((mid[0] - 2.5).abs() < 1e-15);
        assert!((mid[1] - 1.5).abs() < 1e-15 && (mid[2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn jacobi_reconstructs() {
        let n = 4;
        let orig = [4.0, 1.0, -2.0, 0.5, 1.0, 3.0, 0.0, 1.0, -2.0, 0.0, -1.0, 2.0, 0.5, 1.0, 2.0, 0.0];
        let mut a = orig;
        let mut vals = [0.0; 4];
        let mut vecs = [0.0; 16];
        jacobi_eigen(&mut a, n, &mut vals, &mut vecs);
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|e| vals[e] * vecs[i * n + e] * vecs[j * n + e]).sum();
                assert!((r - orig[i * n + j]).abs() < 1e-12);
            }
        }
    }

    fn packed(full: &[f64], d: usize) -> Vec<f64> {
        let mut v = Vec::new();
        for j in 0..d {
            for i in j..d {
                v.push(if i == j { full[i * d + j] } else { full[i * d + j] * std::f64::consts::SQRT_2 });
            }
        }
        v
    }

    #[test]
    fn psd_projection_small_and_large_agree() {
        // [[1, 2],[2, 1]] has eigenvalues 3, -1; projection = 1.5·[[1,1],[1,1]]
        let mut v = packed(&[1.0, 2.0, 2.0, 1.0], 2);
        project_psd(&mut v, 2, &mut PsdWork::default());
        let want = packed(&[1.5, 1.5, 1.5, 1.5], 2);
        for (a, b) in v.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        // same matrix embedded block-diagonally in a size above the Jacobi cutoff
        let d = 12;
        let mut full = vec![0.0; d * d];
        full[0] = 1.0;
        full[1] = 2.0;
        full[d] = 2.0;
        full[d + 1] = 1.0;
        for i in 2..d {
            full[i * d + i] = -(i as f64);
        }
        let mut v = packed(&full, d);
        project_psd(&mut v, d, &mut PsdWork::default());
        let mut want_full = vec![0.0; d * d];
        want_full[0] = 1.5;
        want_full[1] = 1.5;
        want_full[d] = 1.5;
        want_full[d + 1] = 1.5;
        for (a, b) in v.iter().zip(packed(&want_full, d)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
