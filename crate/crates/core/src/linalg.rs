//! Small dense symmetric eigenvalue solver (cyclic Jacobi).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// All eigenvalues of a symmetric matrix, ascending.
///
/// Cyclic Jacobi rotations until the off-diagonal Frobenius mass drops
/// below `1e-15` of the full norm. Intended for the `2K x 2K` side
/// information covariances, so `n` stays small.
pub fn eigenvalues_symmetric(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: matrix.ncols() });
    }
    let norm = matrix.norm();
    let asym = (matrix - matrix.transpose()).amax();
    if asym > 1e-10 * norm.max(1.0) {
        return Err(Error::InvalidArgument(format!("matrix is not symmetric (max |A - A^T| = {asym:e})")));
    }

    let mut a = (matrix + matrix.transpose()) * 0.5;
    let target = 1e-15 * norm;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| 2.0 * a[(p, q)] * a[(p, q)])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = c * arp - s * arq;
                    a[(r, q)] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[(p, r)];
                    let aqr = a[(q, r)];
                    a[(p, r)] = c * apr - s * aqr;
                    a[(q, r)] = s * apr + c * aqr;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(eigenvalues_symmetric(&DMatrix::identity(4, 4)).unwrap(), vec![1.0; 4]);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0]));
        assert_eq!(eigenvalues_symmetric(&d).unwrap(), vec![-1.0, 3.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = eigenvalues_symmetric(&m).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-15 && (e[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_and_non_square() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(eigenvalues_symmetric(&m).is_err());
        assert!(eigenvalues_symmetric(&DMatrix::zeros(2, 3)).is_err());
    }

    proptest! {
        #[test]
        fn agrees_with_nalgebra(n in 1usize..24, entries in proptest::collection::vec(-3.0f64..3.0, 576)) {
            let m = DMatrix::from_fn(n, n, |r, c| {
                let (lo, hi) = if r <= c { (r, c) } else { (c, r) };
                entries[lo * 24 + hi]
            });
            let ours = eigenvalues_symmetric(&m).unwrap();
            let mut reference: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            let scale = m.norm().max(1.0);
            for (a, b) in ours.iter().zip(&reference) {
                prop_assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
            }
        }
    }
}
