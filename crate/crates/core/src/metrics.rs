//! Helicity scores for an embedding: how well azimuth follows pitch chroma and
//! how monotonically one axis follows pitch height.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mds::Embedding;

/// Planes whose largest radius is below this fraction of the embedding's
/// largest coordinate are treated as collapsed.
pub const DEGENERATE_PLANE_RATIO: f64 = 1e-6;

pub fn chroma_phase(u: usize, q: usize) -> f64 {
    TAU * (u % q) as f64 / q as f64
}

/// Fisher–Lee circular correlation between two samples of angles.
pub fn circular_correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let (mut num, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let x = (a[i] - a[j]).sin();
            let y = (b[i] - b[j]).sin();
            num += x * y;
            saa += x * x;
            sbb += y * y;
        }
    }
    let den = (saa * sbb).sqrt();
    (den > 0.0).then(|| (num / den).clamp(-1.0, 1.0))
}

fn coordinate_scale(emb: &Embedding) -> f64 {
    emb.coordinates.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn plane_is_degenerate(emb: &Embedding, plane: (usize, usize)) -> bool {
    let radius = (0..emb.n_points())
        .map(|u| emb.coordinates[[u, plane.0]].hypot(emb.coordinates[[u, plane.1]]))
        .fold(0.0f64, f64::max);
    radius <= DEGENERATE_PLANE_RATIO * coordinate_scale(emb)
}

/// Squared circular correlation between `atan2(e_b, e_a)` and the chroma phase.
pub fn chroma_alignment(emb: &Embedding, q: usize, plane: (usize, usize)) -> Result<f64> {
    chroma_alignment_for_bins(emb, q, plane, &all_bins(emb))
}

fn all_bins(emb: &Embedding) -> Vec<usize> {
    (0..emb.n_points()).collect()
}

/// As [`chroma_alignment`], for an embedding whose row `i` is subband `bins[i]`.
pub fn chroma_alignment_for_bins(
    emb: &Embedding,
    q: usize,
    plane: (usize, usize),
    bins: &[usize],
) -> Result<f64> {
    let n = emb.n_points();
    check_bins(emb, bins)?;
    if q == 0 {
        return Err(Error::param("q", "must be at least 1"));
    }
    if plane.0 == plane.1 || plane.0.max(plane.1) >= emb.dims() {
        return Err(Error::param(
            "plane",
            format!(
                "axes {plane:?} are not two distinct axes of a {}-D embedding",
                emb.dims()
            ),
        ));
    }
    if n < 2 * q {
        return Err(Error::TooFewObservations {
            required: 2 * q,
            actual: n,
        });
    }
    if plane_is_degenerate(emb, plane) {
        return Err(Error::Degenerate(format!(
            "all points lie at the origin of the ({}, {}) plane",
            plane.0, plane.1
        )));
    }
    let azimuth: Vec<f64> = (0..n)
        .map(|u| emb.coordinates[[u, plane.1]].atan2(emb.coordinates[[u, plane.0]]))
        .collect();
    let theta: Vec<f64> = bins.iter().map(|&u| chroma_phase(u, q)).collect();
    let r = circular_correlation(&azimuth, &theta)
        .ok_or_else(|| Error::Degenerate("azimuths are all equal modulo pi".into()))?;
    Ok(r * r)
}

/// Ranks starting at 1, tied values sharing their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monotonicity {
    pub value: f64,
    /// The coordinate was constant, so `value` is 0 by convention.
    pub constant: bool,
}

fn check_bins(emb: &Embedding, bins: &[usize]) -> Result<()> {
    if bins.len() != emb.n_points() {
        return Err(Error::param(
            "bins",
            format!("{} bin indices for {} points", bins.len(), emb.n_points()),
        ));
    }
    Ok(())
}

/// Spearman rank correlation between bin index and one embedding axis.
pub fn height_monotonicity(emb: &Embedding, axis: usize) -> Result<Monotonicity> {
    height_monotonicity_for_bins(emb, axis, &all_bins(emb))
}

pub fn height_monotonicity_for_bins(
    emb: &Embedding,
    axis: usize,
    bins: &[usize],
) -> Result<Monotonicity> {
    let n = emb.n_points();
    check_bins(emb, bins)?;
    if axis >= emb.dims() {
        return Err(Error::param(
            "axis",
            format!("{axis} is not an axis of a {}-D embedding", emb.dims()),
        ));
    }
    if n < 3 {
        return Err(Error::TooFewObservations {
            required: 3,
            actual: n,
        });
    }
    let index: Vec<f64> = bins.iter().map(|&u| u as f64).collect();
    Ok(match pearson(&ranks(&index), &ranks(&emb.axis(axis))) {
        Some(value) => Monotonicity {
            value,
            constant: false,
        },
        None => Monotonicity {
            value: 0.0,
            constant: true,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelicityReport {
    pub chroma_alignment: f64,
    pub chroma_degenerate: bool,
    pub height_monotonicity: f64,
    pub height_constant: bool,
    pub height_axis: usize,
    pub chroma_plane: [usize; 2],
    pub variance_profile: Vec<f64>,
    pub n_components_used: usize,
}

/// Picks the axis with the largest |Spearman| as height (ties to the lower
/// axis) and scores the remaining two as the chroma plane.
pub fn helicity_report(emb: &Embedding, q: usize) -> Result<HelicityReport> {
    helicity_report_for_bins(emb, q, &all_bins(emb))
}

pub fn helicity_report_for_bins(
    emb: &Embedding,
    q: usize,
    bins: &[usize],
) -> Result<HelicityReport> {
    if emb.dims() < 3 {
        return Err(Error::param(
            "dims",
            format!(
                "helicity needs a 3-D embedding, got {} dimensions",
                emb.dims()
            ),
        ));
    }
    let scores = (0..3)
        .map(|a| height_monotonicity_for_bins(emb, a, bins))
        .collect::<Result<Vec<_>>>()?;
    let mut height_axis = 0;
    for a in 1..3 {
        if scores[a].value.abs() > scores[height_axis].value.abs() {
            height_axis = a;
        }
    }
    let others: Vec<usize> = (0..3).filter(|&a| a != height_axis).collect();
    let plane = (others[0], others[1]);
    let (chroma_alignment, chroma_degenerate) = match chroma_alignment_for_bins(emb, q, plane, bins)
    {
        Ok(c) => (c, false),
        Err(Error::Degenerate(reason)) => {
            log::warn!("chroma plane is degenerate: {reason}");
            (0.0, true)
        }
        Err(e) => return Err(e),
    };
    Ok(HelicityReport {
        chroma_alignment,
        chroma_degenerate,
        height_monotonicity: scores[height_axis].value,
        height_constant: scores[height_axis].constant,
        height_axis,
        chroma_plane: [plane.0, plane.1],
        variance_profile: emb.explained_variance.iter().take(3).copied().collect(),
        n_components_used: 3,
    })
}
