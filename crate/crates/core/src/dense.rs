//! Allocation-free kernels on small row-major square matrices, used in the
//! filter hot loops.

/// `out = a * b`.
#[inline]
pub(crate) fn matmul(a: &[f64], b: &[f64], out: &mut [f64], n: usize) {
    out[..n * n].fill(0.0);
    for i in 0..n {
        let row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            for (o, &bkj) in row.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
}

/// `out = m * s * m^T + add` for symmetric `s` and `add`; `tmp` is scratch.
#[inline]
pub(crate) fn sandwich_add(
    m: &[f64],
    s: &[f64],
    add: &[f64],
    out: &mut [f64],
    tmp: &mut [f64],
    n: usize,
) {
    matmul(m, s, tmp, n);
    for i in 0..n {
        let ti = &tmp[i * n..(i + 1) * n];
        for j in i..n {
            let mj = &m[j * n..(j + 1) * n];
            let mut acc = add[i * n + j];
            for (x, y) in ti.iter().zip(mj) {
                acc += x * y;
            }
            out[i * n + j] = acc;
            out[j * n + i] = acc;
        }
    }
}

pub(crate) fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; n * m.ncols()];
    for i in 0..n {
        for j in 0..m.ncols() {
            out[i * m.ncols() + j] = m[(i, j)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_nalgebra(m: &[f64], n: usize) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(n, n, m)
    }

    #[test]
    fn sandwich_matches_nalgebra() {
        let m = [1.0, 2.0, 0.5, -1.0];
        let s = [2.0, 0.3, 0.3, 1.0];
        let add = [0.1, 0.0, 0.0, 0.2];
        let mut out = [0.0; 4];
        let mut tmp = [0.0; 4];
        sandwich_add(&m, &s, &add, &mut out, &mut tmp, 2);
        let (mm, ss, aa) = (to_nalgebra(&m, 2), to_nalgebra(&s, 2), to_nalgebra(&add, 2));
        let expect = &mm * ss * mm.transpose() + aa;
        for (x, y) in from_nalgebra(&expect).iter().zip(out) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
