//! Centering, squared Pearson correlation between subbands and the
//! correlation-to-distance map `D = sqrt(-ln(rho^2) / 2)`.

use std::cmp::Ordering;
use std::fmt;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Non-negative distance that may be infinite.
///
/// Infinity is a variant of its own rather than a large float so that
/// shortest-path code cannot add to it by accident.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtDist {
    Finite(f64),
    Infinite,
}

impl ExtDist {
    pub const ZERO: ExtDist = ExtDist::Finite(0.0);

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtDist::Finite(d) => Some(d),
            ExtDist::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtDist::Finite(_))
    }

    pub fn plus(self, w: f64) -> ExtDist {
        match self {
            ExtDist::Finite(d) => ExtDist::Finite(d + w),
            ExtDist::Infinite => ExtDist::Infinite,
        }
    }

    pub fn min(self, other: ExtDist) -> ExtDist {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl PartialOrd for ExtDist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtDist::Finite(a), ExtDist::Finite(b)) => a.partial_cmp(b),
            (ExtDist::Finite(_), ExtDist::Infinite) => Some(Ordering::Less),
            (ExtDist::Infinite, ExtDist::Finite(_)) => Some(Ordering::Greater),
            (ExtDist::Infinite, ExtDist::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtDist::Finite(d) => write!(f, "{d}"),
            ExtDist::Infinite => f.write_str("inf"),
        }
    }
}

/// Removes the mean of every column.
///
/// Columns whose spread is at rounding level relative to their magnitude are
/// set to exactly zero so that constant features are recognised downstream.
pub fn center_features(l: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = l.nrows();
    if n < 2 {
        return Err(Error::TooFewObservations {
            required: 2,
            actual: n,
        });
    }
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::param(
            "features",
            "matrix contains non-finite values",
        ));
    }
    let mut y = l.to_owned();
    for mut col in y.axis_iter_mut(Axis(1)) {
        let scale = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        // second pass removes the residual left by rounding in the first mean
        let residual = col.sum() / n as f64;
        col.mapv_inplace(|v| v - residual);
        let spread = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if spread <= 64.0 * f64::EPSILON * scale {
            col.fill(0.0);
        }
    }
    Ok(y)
}

/// Squared correlations between the columns of a centered matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    values: Array2<f64>,
    degenerate: Vec<usize>,
}

impl CorrelationMatrix {
    /// Wraps an existing matrix, checking symmetry, unit diagonal and range.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::param("rho2", "matrix is not square"));
        }
        for u in 0..n {
            for v in 0..n {
                let x = values[[u, v]];
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::param(
                        "rho2",
                        format!("entry ({u}, {v}) = {x} is outside [0, 1]"),
                    ));
                }
                if x != values[[v, u]] {
                    return Err(Error::NotSymmetric {
                        row: u,
                        col: v,
                        deviation: (x - values[[v, u]]).abs(),
                    });
                }
            }
            if values[[u, u]] != 1.0 {
                return Err(Error::param("rho2", format!("diagonal entry {u} is not 1")));
            }
        }
        let degenerate = (0..n)
            .filter(|&u| n > 1 && (0..n).all(|v| v == u || values[[u, v]] == 0.0))
            .collect();
        Ok(CorrelationMatrix { values, degenerate })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Columns that were constant and received the identity convention.
    pub fn degenerate_columns(&self) -> &[usize] {
        &self.degenerate
    }
}

pub fn pearson_squared(y: ArrayView2<'_, f64>, exec: Execution) -> CorrelationMatrix {
    let m = y.ncols();
    let cols: Vec<Vec<f64>> = y.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
    let energy: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let degenerate: Vec<usize> = (0..m).filter(|&u| energy[u] == 0.0).collect();
    if !degenerate.is_empty() {
        log::warn!(
            "{} constant feature column(s): {:?}",
            degenerate.len(),
            degenerate
        );
    }

    let upper = par::map_indexed(m, exec, |u| {
        (u..m)
            .map(|v| {
                if u == v {
                    return 1.0;
                }
                if energy[u] == 0.0 || energy[v] == 0.0 {
                    return 0.0;
                }
                let dot: f64 = cols[u].iter().zip(&cols[v]).map(|(a, b)| a * b).sum();
                ((dot * dot) / (energy[u] * energy[v])).clamp(0.0, 1.0)
            })
            .collect::<Vec<f64>>()
    });

    let mut values = Array2::zeros((m, m));
    for (u, row) in upper.iter().enumerate() {
        for (k, &r) in row.iter().enumerate() {
            values[[u, u + k]] = r;
            values[[u + k, u]] = r;
        }
    }
    CorrelationMatrix { values, degenerate }
}

/// Symmetric matrix of extended distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Array2<ExtDist>,
}

impl DistanceMatrix {
    pub fn new(values: Array2<ExtDist>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::param("distances", "matrix is not square"));
        }
        for u in 0..n {
            if values[[u, u]] != ExtDist::ZERO {
                return Err(Error::param(
                    "distances",
                    format!("diagonal entry {u} is not 0"),
                ));
            }
            for v in 0..n {
                let d = values[[u, v]];
                if let ExtDist::Finite(x) = d {
                    if !(x >= 0.0 && x.is_finite()) {
                        return Err(Error::param(
                            "distances",
                            format!("entry ({u}, {v}) = {x} is not a non-negative distance"),
                        ));
                    }
                }
                if d != values[[v, u]] {
                    let deviation = match (d.finite(), values[[v, u]].finite()) {
                        (Some(a), Some(b)) => (a - b).abs(),
                        _ => f64::INFINITY,
                    };
                    return Err(Error::NotSymmetric {
                        row: u,
                        col: v,
                        deviation,
                    });
                }
            }
        }
        Ok(DistanceMatrix { values })
    }

    pub fn values(&self) -> &Array2<ExtDist> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, u: usize, v: usize) -> ExtDist {
        self.values[[u, v]]
    }
}

pub fn rho2_to_distance(rho2: f64) -> ExtDist {
    if rho2 <= 0.0 {
        ExtDist::Infinite
    } else if rho2 >= 1.0 {
        ExtDist::ZERO
    } else {
        ExtDist::Finite((-0.5 * rho2.ln()).sqrt())
    }
}

pub fn rho_to_distance(rho2: &CorrelationMatrix) -> DistanceMatrix {
    DistanceMatrix {
        values: rho2.values.mapv(rho2_to_distance),
    }
}
