//! Small dense linear-algebra helpers shared by the metric operations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Determinant: cofactor expansion for n <= 4, LU with partial pivoting above.
pub fn det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => det3(m, [0, 1, 2], [0, 1, 2]),
        4 => {
            let rows = [1, 2, 3];
            let mut acc = 0.0;
            let mut sign = 1.0;
            for col in 0..4 {
                let cols: Vec<usize> = (0..4).filter(|&c| c != col).collect();
                let minor = det3(m, rows, [cols[0], cols[1], cols[2]]);
                acc += sign * m[(0, col)] * minor;
                sign = -sign;
            }
            acc
        }
        _ => m.clone().lu().determinant(),
    }
}

fn det3(m: &DMatrix<f64>, r: [usize; 3], c: [usize; 3]) -> f64 {
    m[(r[0], c[0])] * (m[(r[1], c[1])] * m[(r[2], c[2])] - m[(r[1], c[2])] * m[(r[2], c[1])])
        - m[(r[0], c[1])] * (m[(r[1], c[0])] * m[(r[2], c[2])] - m[(r[1], c[2])] * m[(r[2], c[0])])
        + m[(r[0], c[2])] * (m[(r[1], c[0])] * m[(r[2], c[1])] - m[(r[1], c[1])] * m[(r[2], c[0])])
}

/// Inverse via LU; the caller is responsible for conditioning guards.
pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone().lu().try_inverse().ok_or(Error::NearSingular {
        det: det(m),
        floor: 0.0,
    })
}

/// Eigenvalues and eigenvectors of a (numerically symmetrized) matrix,
/// sorted by |eigenvalue| ascending.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .abs()
            .partial_cmp(&eig.eigenvalues[b].abs())
            .expect("eigenvalues are finite")
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (values, vectors)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_small_matches_lu() {
        for n in 1..=5 {
            let m = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3 + 1) as f64).sin());
            let lu = m.clone().lu().determinant();
            let scale = lu.abs().max(1.0);
            assert!((det(&m) - lu).abs() < 1e-10 * scale, "n={n}");
        }
    }

    #[test]
    fn eigen_sorted_by_magnitude() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -0.1, 1.0]));
        let (values, vectors) = sym_eigen_sorted(&m);
        assert!((values[0] - -0.1).abs() < 1e-14);
        assert!((vectors[0][1].abs() - 1.0).abs() < 1e-14);
    }
}
