//! Classical (Torgerson) multidimensional scaling of geodesic distances.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GeodesicMatrix;

const SYMMETRY_TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// `-1/2 H S H` with `S` the elementwise square of `d` and `H` the centering matrix.
pub fn double_center_finite(d: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = d.nrows();
    if d.ncols() != n {
        return Err(Error::param("distances", "matrix is not square"));
    }
    if let Some(x) = d.iter().find(|x| !x.is_finite()) {
        return Err(Error::param(
            "distances",
            format!("entry {x} is not finite; fix graph connectivity before embedding"),
        ));
    }
    let s = d.mapv(|x| x * x);
    let nf = n as f64;
    let row_mean: Vec<f64> = (0..n).map(|i| s.row(i).sum() / nf).collect();
    let col_mean: Vec<f64> = (0..n).map(|j| s.column(j).sum() / nf).collect();
    let grand = row_mean.iter().sum::<f64>() / nf;
    let mut tau = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = -0.5 * (s[[i, j]] - row_mean[i] - col_mean[j] + grand);
            tau[[i, j]] = v;
            tau[[j, i]] = v;
        }
    }
    Ok(tau)
}

pub fn double_center(d: &GeodesicMatrix) -> Result<Array2<f64>> {
    double_center_finite(d.to_finite()?.view())
}

/// Eigenpairs of a symmetric matrix; `vectors` holds one eigenvector per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[[i, j]] * a[[i, j]];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition.
///
/// Eigenvalues are sorted in descending order and each eigenvector is signed
/// so that its entry of largest magnitude is positive.
pub fn eig_sym(m: ArrayView2<'_, f64>) -> Result<SymmetricEigen> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::param("matrix", "matrix is not square"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("matrix", "matrix contains non-finite values"));
    }
    let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for i in 0..n {
        for j in i + 1..n {
            let dev = (m[[i, j]] - m[[j, i]]).abs();
            if dev > SYMMETRY_TOLERANCE * scale.max(1.0) {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    deviation: dev,
                });
            }
        }
    }

    let mut a = m.to_owned();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = avg;
            a[[j, i]] = avg;
        }
    }
    let mut v = Array2::<f64>::eye(n);
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= f64::EPSILON * frob {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        let mut vec = v.column(i).to_owned();
        let lead = vec
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (k, x)| {
                if x.abs() > best.1 {
                    (k, x.abs())
                } else {
                    best
                }
            })
            .0;
        if vec[lead] < 0.0 {
            vec.mapv_inplace(|x| -x);
        }
        vectors.column_mut(col).assign(&vec);
    }
    Ok(SymmetricEigen { values, vectors })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateScaling {
    /// Column m is `sqrt(max(lambda_m, 0)) * v_m`.
    #[default]
    Torgerson,
    /// Column m is the unit eigenvector `v_m`.
    RawEigenvectors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// n x dims
    pub coordinates: Array2<f64>,
    /// Full spectrum, descending.
    pub eigenvalues: Vec<f64>,
    pub explained_variance: Vec<f64>,
    pub scaling: CoordinateScaling,
}

impl Embedding {
    pub fn n_points(&self) -> usize {
        self.coordinates.nrows()
    }

    pub fn dims(&self) -> usize {
        self.coordinates.ncols()
    }

    pub fn axis(&self, m: usize) -> Vec<f64> {
        self.coordinates.column(m).to_vec()
    }
}

/// `max(lambda_m, 0) / sum_k max(lambda_k, 0)`, or zeros for a null spectrum.
pub fn explained_variance(eigenvalues: &[f64], dims: usize) -> Vec<f64> {
    let total: f64 = eigenvalues.iter().map(|l| l.max(0.0)).sum();
    eigenvalues
        .iter()
        .take(dims)
        .map(|l| if total > 0.0 { l.max(0.0) / total } else { 0.0 })
        .collect()
}

pub fn embed_finite(
    d: ArrayView2<'_, f64>,
    dims: usize,
    scaling: CoordinateScaling,
) -> Result<Embedding> {
    let n = d.nrows();
    if dims == 0 || dims > n {
        return Err(Error::param(
            "dims",
            format!("need 1 <= dims <= {n}, got {dims}"),
        ));
    }
    let tau = double_center_finite(d)?;
    let eig = eig_sym(tau.view())?;
    let mut coordinates = Array2::zeros((n, dims));
    for m in 0..dims {
        let factor = match scaling {
            CoordinateScaling::Torgerson => eig.values[m].max(0.0).sqrt(),
            CoordinateScaling::RawEigenvectors => 1.0,
        };
        coordinates
            .column_mut(m)
            .assign(&eig.vectors.column(m).mapv(|x| x * factor));
    }
    let eigenvalues = eig.values.to_vec();
    let explained_variance = explained_variance(&eigenvalues, dims);
    Ok(Embedding {
        coordinates,
        eigenvalues,
        explained_variance,
        scaling,
    })
}

pub fn embed(d: &GeodesicMatrix, dims: usize, scaling: CoordinateScaling) -> Result<Embedding> {
    embed_finite(d.to_finite()?.view(), dims, scaling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairwise(points: &Array2<f64>) -> Array2<f64> {
        let n = points.nrows();
        Array2::from_shape_fn((n, n), |(i, j)| {
            (&points.row(i) - &points.row(j))
                .mapv(|x| x * x)
                .sum()
                .sqrt()
        })
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let x = rng.random_range(-1.0..1.0);
                m[[i, j]] = x;
                m[[j, i]] = x;
            }
        }
        m
    }

    fn spectral_norm_bound(m: &Array2<f64>) -> f64 {
        m.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn two_point_double_centering() {
        let d = 3.0;
        let tau = double_center_finite(array![[0.0, d], [d, 0.0]].view()).unwrap();
        let q = d * d / 4.0;
        assert_eq!(tau, array![[q, -q], [-q, q]]);
        let zero = double_center_finite(Array2::zeros((4, 4)).view()).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn double_centering_recovers_gram_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = Array2::from_shape_fn((20, 3), |_| rng.random_range(-2.0..2.0));
        let tau = double_center_finite(pairwise(&x).view()).unwrap();
        let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
        for mut row in x.rows_mut() {
            row -= &mean;
        }
        let gram = x.dot(&x.t());
        for (a, b) in tau.iter().zip(gram.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
        let norm = spectral_norm_bound(&tau);
        for row in tau.rows() {
            assert!(row.sum().abs() <= 1e-9 * norm);
        }
    }

    #[test]
    fn rejects_infinite_distance() {
        let d = array![[0.0, f64::INFINITY], [f64::INFINITY, 0.0]];
        assert!(double_center_finite(d.view()).is_err());
    }

    #[test]
    fn eigen_examples() {
        let e = eig_sym(Array2::<f64>::eye(4).view()).unwrap();
        assert!(e.values.iter().all(|&l| l == 1.0));
        let e = eig_sym(Array2::from_diag(&array![3.0, 1.0, 2.0]).view()).unwrap();
        assert_eq!(e.values.to_vec(), vec![3.0, 2.0, 1.0]);
        assert_eq!(e.vectors.column(0).to_vec(), vec![1.0, 0.0, 0.0]);
        assert_eq!(e.vectors.column(1).to_vec(), vec![0.0, 0.0, 1.0]);
        assert!(eig_sym(array![[1.0, 2.0], [0.0, 1.0]].view()).is_err());
    }

    /// Top eigenpairs by power iteration on a shifted matrix with deflation.
    fn power_iteration_top(m: &Array2<f64>, count: usize) -> Vec<f64> {
        let n = m.nrows();
        let shift = spectral_norm_bound(m);
        let mut a = m + &(Array2::<f64>::eye(n) * shift);
        let mut out = Vec::new();
        for _ in 0..count {
            let mut v = Array1::from_iter((0..n).map(|i| 1.0 + i as f64 * 1e-3));
            let mut lambda = 0.0;
            for _ in 0..200_000 {
                let w = a.dot(&v);
                let norm = w.dot(&w).sqrt();
                let next = w / norm;
                let new_lambda = next.dot(&a.dot(&next));
                let done = (new_lambda - lambda).abs() < 1e-15 * shift;
                v = next;
                lambda = new_lambda;
                if done {
                    break;
                }
            }
            out.push(lambda - shift);
            let outer = v
                .view()
                .insert_axis(ndarray::Axis(1))
                .dot(&v.view().insert_axis(ndarray::Axis(0)));
            a = a - outer * lambda;
        }
        out
    }

    #[test]
    fn random_symmetric_residuals_and_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let m = random_symmetric(&mut rng, 72);
        let e = eig_sym(m.view()).unwrap();
        let norm = spectral_norm_bound(&m);
        for k in 0..72 {
            let v = e.vectors.column(k);
            let r = m.dot(&v) - &v * e.values[k];
            assert!(r.dot(&r).sqrt() <= 1e-8 * norm);
        }
        let gram = e.vectors.t().dot(&e.vectors);
        for (i, row) in gram.rows().into_iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((x - target).abs() < 1e-9);
            }
        }
        let top = power_iteration_top(&m, 3);
        for (k, t) in top.iter().enumerate() {
            assert!((t - e.values[k]).abs() < 1e-6, "{} vs {}", t, e.values[k]);
        }
    }

    #[test]
    fn equilateral_triangle() {
        let d = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        let emb = embed_finite(d.view(), 3, CoordinateScaling::Torgerson).unwrap();
        assert!((emb.eigenvalues[0] - 0.5).abs() < 1e-12);
        assert!((emb.eigenvalues[1] - 0.5).abs() < 1e-12);
        assert!(emb.eigenvalues[2].abs() < 1e-12);
        let back = pairwise(&emb.coordinates);
        for (a, b) in back.iter().zip(d.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn collinear_points_are_one_dimensional() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let emb = embed_finite(pairwise(&x).view(), 3, CoordinateScaling::Torgerson).unwrap();
        assert!(emb.explained_variance[0] >= 0.99);
        let spread = emb
            .coordinates
            .column(0)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        for m in 1..3 {
            assert!(emb
                .coordinates
                .column(m)
                .iter()
                .all(|v| v.abs() < 1e-6 * spread));
        }
    }

    /// Orthogonal Procrustes: best rotation of `a` onto `b` (both centered),
    /// via the polar factor of `a^T b` computed from a symmetric eigensolve.
    fn procrustes_residual(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        let c = a.t().dot(b);
        let ctc = c.t().dot(&c);
        let e = eig_sym(ctc.view()).unwrap();
        let inv_sqrt = Array2::from_diag(&e.values.mapv(|l| 1.0 / l.sqrt()));
        let r = c.dot(&e.vectors).dot(&inv_sqrt).dot(&e.vectors.t());
        let diff = a.dot(&r) - b;
        diff.iter().map(|x| x * x).sum::<f64>().sqrt() / b.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn euclidean_points_are_recovered_up_to_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut x = Array2::from_shape_fn((72, 3), |_| rng.random_range(-1.0..1.0));
        let d = pairwise(&x);
        let emb = embed_finite(d.view(), 3, CoordinateScaling::Torgerson).unwrap();
        let back = pairwise(&emb.coordinates);
        let scale = d.iter().fold(0.0f64, |m, v| m.max(*v));
        for (a, b) in back.iter().zip(d.iter()) {
            assert!((a - b).abs() <= 1e-8 * scale);
        }
        let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
        for mut row in x.rows_mut() {
            row -= &mean;
        }
        assert!(procrustes_residual(&emb.coordinates, &x) < 1e-8);
        for m in 0..3 {
            let sq: f64 = emb.coordinates.column(m).iter().map(|v| v * v).sum();
            assert!((sq - emb.eigenvalues[m]).abs() < 1e-9 * emb.eigenvalues[0]);
        }
    }

    #[test]
    fn raw_eigenvectors_are_unit_columns() {
        let d = array![[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]];
        let emb = embed_finite(d.view(), 2, CoordinateScaling::RawEigenvectors).unwrap();
        let sq: f64 = emb.coordinates.column(0).iter().map(|v| v * v).sum();
        assert!((sq - 1.0).abs() < 1e-12);
        assert!(embed_finite(d.view(), 4, CoordinateScaling::Torgerson).is_err());
    }

    proptest! {
        #[test]
        fn no_nan_for_arbitrary_metric_like_input(seed in 0u64..300, n in 2usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut d = Array2::zeros((n, n));
            for i in 0..n {
                for j in i + 1..n {
                    let x = rng.random_range(0.0..3.0);
                    d[[i, j]] = x;
                    d[[j, i]] = x;
                }
            }
            let emb = embed_finite(d.view(), n.min(3), CoordinateScaling::Torgerson).unwrap();
            prop_assert!(emb.coordinates.iter().all(|v| v.is_finite()));
            prop_assert!(emb.explained_variance.iter().sum::<f64>() <= 1.0 + 1e-12);
            for w in emb.eigenvalues.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }

        #[test]
        fn relabeling_commutes_with_embedding(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((12, 3), |_| rng.random_range(-1.0..1.0));
            let mut perm: Vec<usize> = (0..12).collect();
            for i in (1..12).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let d = pairwise(&x);
            let dp = Array2::from_shape_fn((12, 12), |(i, j)| d[[perm[i], perm[j]]]);
            let a = embed_finite(d.view(), 3, CoordinateScaling::Torgerson).unwrap();
            let b = embed_finite(dp.view(), 3, CoordinateScaling::Torgerson).unwrap();
            for (i, &pi) in perm.iter().enumerate() {
                for m in 0..3 {
                    prop_assert!((b.coordinates[[i, m]] - a.coordinates[[pi, m]]).abs() < 1e-8);
                }
            }
        }
    }
}
