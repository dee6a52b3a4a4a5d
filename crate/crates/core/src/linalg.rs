//! Dense row-major kernels for the batched network passes.
//!
//! Summation order is fixed, so results are bit-reproducible for a given
//! build. The inner loops are register-blocked over four rows and 32
//! columns so that the compiler keeps the accumulators in vector registers.

const MR: usize = 6;
const NR: usize = 32;

/// Depth of one pass over `b`; a `KC x NR` panel stays resident in L1.
const KC: usize = 256;

/// `c[m x n] += a[m x k] * b[k x n]`, all row-major. Each output sums its
/// products in increasing `k` order.
pub fn gemm_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let n_full = n - n % NR;
    let m_full = m - m % MR;
    let mut p0 = 0;
    while p0 < k {
        let p1 = (p0 + KC).min(k);
        let mut j = 0;
        while j < n_full {
            let mut i = 0;
            while i < m_full {
                block_rows::<MR>(a, b, c, i, j, p0, p1, k, n);
                i += MR;
            }
            while i < m {
                block_rows::<1>(a, b, c, i, j, p0, p1, k, n);
                i += 1;
            }
            j += NR;
        }
        if n_full < n {
            tail_cols(a, b, c, m, n_full, p0, p1, k, n);
        }
        p0 = p1;
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn block_rows<const R: usize>(
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
    i0: usize,
    j0: usize,
    p0: usize,
    p1: usize,
    k: usize,
    n: usize,
) {
    #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
    {
        assert!((i0 + R) * n <= c.len() && (i0 + R) * k <= a.len() && p1 * n <= b.len());
        assert!(j0 + NR <= n && p1 <= k);
        // SAFETY: the asserts above bound every pointer offset used.
        unsafe { avx512::block::<R>(a.as_ptr(), b.as_ptr(), c.as_mut_ptr(), i0, j0, p0, p1, k, n) }
    }
    #[cfg(not(all(target_arch = "x86_64", target_feature = "avx512f")))]
    block::<R>(a, b, c, i0, j0, p0, p1, k, n)
}

#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
mod avx512 {
    use super::NR;
    use core::arch::x86_64::*;

    const L: usize = NR / 8;

    /// Same arithmetic as the portable kernel (separate multiply and add,
    /// same order), so both paths give identical bits.
    #[inline(always)]
    #[allow(clippy::too_many_arguments)]
    pub(super) unsafe fn block<const R: usize>(
        a: *const f64,
        b: *const f64,
        c: *mut f64,
        i0: usize,
        j0: usize,
        p0: usize,
        p1: usize,
        k: usize,
        n: usize,
    ) {
        let mut acc = [[_mm512_setzero_pd(); L]; R];
        let mut arow = [a; R];
        for r in 0..R {
            let cp = c.add((i0 + r) * n + j0);
            for q in 0..L {
                acc[r][q] = _mm512_loadu_pd(cp.add(8 * q));
            }
            arow[r] = a.add((i0 + r) * k);
        }
        let mut bp = b.add(p0 * n + j0);
        for p in p0..p1 {
            let mut bv = [_mm512_setzero_pd(); L];
            for q in 0..L {
                bv[q] = _mm512_loadu_pd(bp.add(8 * q));
            }
            for r in 0..R {
                let av = _mm512_set1_pd(*arow[r].add(p));
                for q in 0..L {
                    acc[r][q] = _mm512_add_pd(acc[r][q], _mm512_mul_pd(av, bv[q]));
                }
            }
            bp = bp.add(n);
        }
        for r in 0..R {
            let cp = c.add((i0 + r) * n + j0);
            for q in 0..L {
                _mm512_storeu_pd(cp.add(8 * q), acc[r][q]);
            }
        }
    }
}

#[allow(dead_code)]
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn block<const R: usize>(
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
    i0: usize,
    j0: usize,
    p0: usize,
    p1: usize,
    k: usize,
    n: usize,
) {
    let mut acc = [[0.0f64; NR]; R];
    for (r, row) in acc.iter_mut().enumerate() {
        row.copy_from_slice(&c[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR]);
    }
    for p in p0..p1 {
        let brow: &[f64; NR] = b[p * n + j0..p * n + j0 + NR].try_into().unwrap();
        for r in 0..R {
            let av = a[(i0 + r) * k + p];
            for q in 0..NR {
                acc[r][q] += av * brow[q];
            }
        }
    }
    for (r, row) in acc.iter().enumerate() {
        c[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR].copy_from_slice(row);
    }
}

#[allow(clippy::too_many_arguments)]
fn tail_cols(a: &[f64], b: &[f64], c: &mut [f64], m: usize, j0: usize, p0: usize, p1: usize, k: usize, n: usize) {
    for i in 0..m {
        for p in p0..p1 {
            let av = a[i * k + p];
            for j in j0..n {
                c[i * n + j] += av * b[p * n + j];
            }
        }
    }
}

/// `out[n x m] = a[m x n]^T`.
pub fn transpose(a: &[f64], out: &mut [f64], m: usize, n: usize) {
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
}

/// Column sums of `a[m x n]` added into `out[n]`.
pub fn col_sums_acc(a: &[f64], out: &mut [f64], m: usize, n: usize) {
    for i in 0..m {
        for (o, v) in out.iter_mut().zip(&a[i * n..(i + 1) * n]) {
            *o += v;
        }
    }
}
