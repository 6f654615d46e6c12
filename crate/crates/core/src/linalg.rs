//! Dense symmetric positive-definite solves.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let scale = (0..n)
        .map(|i| a[[i, i]].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > scale * 1e-14) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves `H v = rhs` for symmetric positive-definite `H`, refining once
/// against the residual.
pub fn spd_solve(h: &Array2<f64>, rhs: &Array1<f64>) -> Result<Array1<f64>> {
    if rhs.len() != h.nrows() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            got: rhs.len(),
        });
    }
    let asym = h
        .indexed_iter()
        .map(|((i, j), &v)| (v - h[[j, i]]).abs())
        .fold(0.0, f64::max);
    let scale = h.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if asym > 1e-10 * scale.max(1.0) {
        return Err(Error::Data(format!(
            "matrix is not symmetric (max |H - Hᵀ| = {asym:e})"
        )));
    }
    let l = cholesky(h)?;
    let mut x = cholesky_solve(&l, rhs);
    let residual = rhs - &h.dot(&x);
    x += &cholesky_solve(&l, &residual);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_returns_rhs() {
        let h = Array2::<f64>::eye(4);
        let b = array![1.0, -2.0, 3.0, 0.5];
        assert_eq!(spd_solve(&h, &b).unwrap(), b);
    }

    #[test]
    fn diagonal_solve() {
        let h = array![[2.0, 0.0], [0.0, 4.0]];
        let v = spd_solve(&h, &array![2.0, 4.0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_is_detected() {
        let h = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            spd_solve(&h, &array![1.0, 1.0]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn asymmetric_is_rejected() {
        let h = array![[2.0, 1.0], [0.0, 2.0]];
        assert!(spd_solve(&h, &array![1.0, 1.0]).is_err());
    }
}
