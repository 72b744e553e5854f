//! CSV, JSON and plot artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! an artifact back yields bit-identical values and reruns are byte-identical.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::Serialize;

use crate::correlation::{CorrelationMatrix, ExtDist};
use crate::cqt::ScalogramMatrix;
use crate::error::{Error, Result};
use crate::graph::{GeodesicMatrix, NeighborGraph};
use crate::mds::{explained_variance, CoordinateScaling, Embedding};
use crate::metrics::{chroma_phase, helicity_report_for_bins};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        what: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn parse_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Parse {
        what: path.display().to_string(),
        reason: reason.into(),
    }
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(path, format!("`{s}` is not a number")))
}

fn parse_dist(path: &Path, s: &str) -> Result<ExtDist> {
    match s.trim() {
        "inf" => Ok(ExtDist::Infinite),
        other => Ok(ExtDist::Finite(parse_f64(path, other)?)),
    }
}

type Table = (Vec<String>, Vec<String>, Vec<Vec<String>>);

/// Header row plus records, skipping `#` lines which are returned separately.
fn read_table(path: &Path) -> Result<Table> {
    let text = read_file(path)?;
    let comments: Vec<String> = text
        .lines()
        .filter_map(|l| l.strip_prefix('#').map(|c| c.trim().to_string()))
        .collect();
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(
            rec.map_err(|e| csv_err(path, e))?
                .iter()
                .map(str::to_string)
                .collect(),
        );
    }
    Ok((comments, header, rows))
}

/// One row per note: `label, u0, u1, ...`.
pub fn write_scalogram_csv(path: impl AsRef<Path>, x: &ScalogramMatrix) -> Result<()> {
    let mut w = csv_writer();
    let mut header = vec!["label".to_string()];
    header.extend((0..x.n_bins()).map(|u| format!("u{u}")));
    w.write_record(&header)
        .map_err(|e| csv_err(path.as_ref(), e))?;
    for (label, row) in x.labels().iter().zip(x.values().rows()) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)
            .map_err(|e| csv_err(path.as_ref(), e))?;
    }
    write_file(path.as_ref(), &finish(w))
}

pub fn read_scalogram_csv(path: impl AsRef<Path>) -> Result<ScalogramMatrix> {
    let path = path.as_ref();
    let (_, header, rows) = read_table(path)?;
    let n_bins = header.len().saturating_sub(1);
    let mut labels = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for r in rows {
        labels.push(r[0].clone());
        values.push(
            r[1..]
                .iter()
                .map(|v| parse_f64(path, v))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if values.is_empty() {
        return ScalogramMatrix::new(Array2::zeros((0, n_bins)), labels);
    }
    ScalogramMatrix::from_rows(values, labels)
}

fn write_square<T>(path: &Path, n: usize, cell: impl Fn(usize, usize) -> T) -> Result<()>
where
    T: ToString,
{
    let mut w = csv_writer();
    let mut header = vec!["bin".to_string()];
    header.extend((0..n).map(|u| u.to_string()));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for u in 0..n {
        let mut rec = vec![u.to_string()];
        rec.extend((0..n).map(|v| cell(u, v).to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    write_file(path, &finish(w))
}

fn read_square<T>(path: &Path, parse: impl Fn(&Path, &str) -> Result<T>) -> Result<Vec<Vec<T>>> {
    let (_, header, rows) = read_table(path)?;
    let n = header.len().saturating_sub(1);
    if rows.len() != n {
        return Err(parse_err(
            path,
            format!("{} rows for {n} columns", rows.len()),
        ));
    }
    rows.iter()
        .map(|r| r[1..].iter().map(|v| parse(path, v)).collect())
        .collect()
}

/// Full square matrix with a `bin` column and header.
pub fn write_rho2_csv(path: impl AsRef<Path>, rho2: &CorrelationMatrix) -> Result<()> {
    write_square(path.as_ref(), rho2.len(), |u, v| rho2.values()[[u, v]])
}

pub fn read_rho2_csv(path: impl AsRef<Path>) -> Result<CorrelationMatrix> {
    let rows = read_square(path.as_ref(), parse_f64)?;
    let n = rows.len();
    CorrelationMatrix::new(Array2::from_shape_fn((n, n), |(u, v)| rows[u][v]))
}

/// As [`write_rho2_csv`]; unreachable pairs are written as `inf`.
pub fn write_geodesics_csv(path: impl AsRef<Path>, d: &GeodesicMatrix) -> Result<()> {
    write_square(path.as_ref(), d.len(), |u, v| d.get(u, v))
}

pub fn read_geodesics_csv(path: impl AsRef<Path>) -> Result<GeodesicMatrix> {
    let rows = read_square(path.as_ref(), parse_dist)?;
    let n = rows.len();
    GeodesicMatrix::new(Array2::from_shape_fn((n, n), |(u, v)| rows[u][v]))
}

/// `u, v, weight` with `u < v`.
pub fn write_edges_csv(path: impl AsRef<Path>, g: &NeighborGraph) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer();
    w.write_record(["u", "v", "weight"])
        .map_err(|e| csv_err(path, e))?;
    for e in g.edges() {
        w.write_record([e.u.to_string(), e.v.to_string(), e.weight.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    write_file(path, &finish(w))
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Columns `bin, chroma, e1, e2, ...`, preceded by `#` lines holding the
/// spectrum, the explained-variance ratios and the coordinate scaling.
pub fn write_embedding_csv(
    path: impl AsRef<Path>,
    emb: &Embedding,
    bins: &[usize],
    q: usize,
) -> Result<()> {
    let path = path.as_ref();
    if bins.len() != emb.n_points() {
        return Err(Error::param(
            "bins",
            "one bin index per embedded point is required",
        ));
    }
    let scaling = match emb.scaling {
        CoordinateScaling::Torgerson => "torgerson",
        CoordinateScaling::RawEigenvectors => "raw_eigenvectors",
    };
    let mut text = String::new();
    let _ = writeln!(text, "# eigenvalues: {}", join(&emb.eigenvalues));
    let _ = writeln!(
        text,
        "# explained_variance: {}",
        join(&emb.explained_variance)
    );
    let _ = writeln!(text, "# scaling: {scaling}");
    let _ = writeln!(text, "# bins_per_octave: {q}");
    let mut w = csv_writer();
    let mut header = vec!["bin".to_string(), "chroma".to_string()];
    header.extend((1..=emb.dims()).map(|m| format!("e{m}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, &u) in bins.iter().enumerate() {
        let mut rec = vec![u.to_string(), (u % q).to_string()];
        rec.extend(emb.coordinates.row(i).iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    text.push_str(&finish(w));
    write_file(path, &text)
}

/// Embedding, bin index of every row and bins per octave.
pub fn read_embedding_csv(path: impl AsRef<Path>) -> Result<(Embedding, Vec<usize>, usize)> {
    let path = path.as_ref();
    let (comments, header, rows) = read_table(path)?;
    let meta = |key: &str| -> Result<String> {
        comments
            .iter()
            .find_map(|c| c.strip_prefix(key).and_then(|r| r.strip_prefix(':')))
            .map(|v| v.trim().to_string())
            .ok_or_else(|| parse_err(path, format!("missing `# {key}:` line")))
    };
    let list = |key: &str| -> Result<Vec<f64>> {
        meta(key)?.split(',').map(|v| parse_f64(path, v)).collect()
    };
    let eigenvalues = list("eigenvalues")?;
    let stored = list("explained_variance")?;
    let scaling = match meta("scaling")?.as_str() {
        "torgerson" => CoordinateScaling::Torgerson,
        "raw_eigenvectors" => CoordinateScaling::RawEigenvectors,
        other => return Err(parse_err(path, format!("unknown scaling `{other}`"))),
    };
    let q: usize = meta("bins_per_octave")?
        .parse()
        .map_err(|_| parse_err(path, "bins_per_octave is not an integer"))?;
    let dims = header.len().saturating_sub(2);
    if dims == 0 || stored.len() != dims {
        return Err(parse_err(path, "coordinate columns and metadata disagree"));
    }
    if explained_variance(&eigenvalues, dims) != stored {
        return Err(parse_err(
            path,
            "explained variance does not match the eigenvalues",
        ));
    }
    let mut bins = Vec::with_capacity(rows.len());
    let mut coordinates = Array2::zeros((rows.len(), dims));
    for (i, r) in rows.iter().enumerate() {
        bins.push(
            r[0].parse()
                .map_err(|_| parse_err(path, format!("bad bin `{}`", r[0])))?,
        );
        for m in 0..dims {
            coordinates[[i, m]] = parse_f64(path, &r[2 + m])?;
        }
    }
    Ok((
        Embedding {
            coordinates,
            eigenvalues,
            explained_variance: stored,
            scaling,
        },
        bins,
        q,
    ))
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path.as_ref(), &text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Ply,
    Svg,
}

impl PlotFormat {
    pub fn extension(self) -> &'static str {
        match self {
            PlotFormat::Ply => "ply",
            PlotFormat::Svg => "svg",
        }
    }
}

impl FromStr for PlotFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ply" => Ok(PlotFormat::Ply),
            "svg" => Ok(PlotFormat::Svg),
            other => Err(Error::param(
                "plot",
                format!("unsupported format `{other}` (expected ply or svg)"),
            )),
        }
    }
}

/// HSV to 8-bit RGB with full saturation and value; `hue` in radians.
pub fn hue_rgb(hue: f64) -> [u8; 3] {
    let h = (hue.rem_euclid(TAU) / TAU) * 6.0;
    let sector = (h.floor() as usize).min(5);
    let f = h - sector as f64;
    let (r, g, b) = match sector {
        0 => (1.0, f, 0.0),
        1 => (1.0 - f, 1.0, 0.0),
        2 => (0.0, 1.0, f),
        3 => (0.0, 1.0 - f, 1.0),
        4 => (f, 0.0, 1.0),
        _ => (1.0, 0.0, 1.0 - f),
    };
    let q = |x: f64| (x * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}

/// Index pairs of rows holding consecutive bins.
fn polyline(bins: &[usize]) -> Vec<(usize, usize)> {
    (0..bins.len().saturating_sub(1))
        .filter(|&i| bins[i + 1] == bins[i] + 1)
        .map(|i| (i, i + 1))
        .collect()
}

pub fn render_ply(emb: &Embedding, bins: &[usize], q: usize) -> Result<String> {
    if emb.dims() < 3 {
        return Err(Error::param("dims", "PLY export needs a 3-D embedding"));
    }
    let edges = polyline(bins);
    let mut s = String::new();
    let _ = write!(
        s,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nelement edge {}\n\
         property int vertex1\nproperty int vertex2\nend_header\n",
        emb.n_points(),
        edges.len()
    );
    for (i, &u) in bins.iter().enumerate() {
        let [r, g, b] = hue_rgb(chroma_phase(u, q));
        let c = emb.coordinates.row(i);
        let _ = writeln!(s, "{} {} {} {r} {g} {b}", c[0], c[1], c[2]);
    }
    for (a, b) in edges {
        let _ = writeln!(s, "{a} {b}");
    }
    Ok(s)
}

/// Orthographic view of the chroma plane chosen by the helicity report.
pub fn render_svg(emb: &Embedding, bins: &[usize], q: usize) -> Result<String> {
    const SIZE: f64 = 600.0;
    const MARGIN: f64 = 30.0;
    let report = helicity_report_for_bins(emb, q, bins)?;
    let [a, b] = report.chroma_plane;
    let xs: Vec<f64> = emb.axis(a);
    let ys: Vec<f64> = emb.axis(b);
    let extent = xs
        .iter()
        .chain(&ys)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let scale = (SIZE / 2.0 - MARGIN) / extent;
    let px = |x: f64| SIZE / 2.0 + x * scale;
    let py = |y: f64| SIZE / 2.0 - y * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, j) in polyline(bins) {
        let _ = writeln!(
            s,
            r##"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#999999" stroke-width="1"/>"##,
            px(xs[i]),
            py(ys[i]),
            px(xs[j]),
            py(ys[j])
        );
    }
    for (i, &u) in bins.iter().enumerate() {
        let [r, g, bl] = hue_rgb(chroma_phase(u, q));
        let _ = writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="5" fill="rgb({r},{g},{bl})"><title>bin {u}</title></circle>"#,
            px(xs[i]),
            py(ys[i])
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn export_plot(
    path: impl AsRef<Path>,
    emb: &Embedding,
    bins: &[usize],
    q: usize,
    format: PlotFormat,
) -> Result<()> {
    let text = match format {
        PlotFormat::Ply => render_ply(emb, bins, q)?,
        PlotFormat::Svg => render_svg(emb, bins, q)?,
    };
    write_file(path.as_ref(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn helix() -> Embedding {
        let n = 72;
        let coordinates = Array2::from_shape_fn((n, 3), |(u, m)| {
            let t = chroma_phase(u, 24);
            [t.cos(), t.sin(), u as f64 / 24.0][m]
        });
        Embedding {
            coordinates,
            eigenvalues: vec![3.0, 2.0, 1.0, 0.0],
            explained_variance: explained_variance(&[3.0, 2.0, 1.0, 0.0], 3),
            scaling: CoordinateScaling::Torgerson,
        }
    }

    #[test]
    fn hue_wheel_primaries() {
        assert_eq!(hue_rgb(0.0), [255, 0, 0]);
        assert_eq!(hue_rgb(TAU / 3.0), [0, 255, 0]);
        assert_eq!(hue_rgb(2.0 * TAU / 3.0), [0, 0, 255]);
        assert_eq!(hue_rgb(TAU), hue_rgb(0.0));
    }

    #[test]
    fn octave_bins_share_colour() {
        for u in 0..48 {
            assert_eq!(
                hue_rgb(chroma_phase(u, 24)),
                hue_rgb(chroma_phase(u + 24, 24))
            );
        }
    }

    #[test]
    fn ply_structure() {
        let bins: Vec<usize> = (0..72).collect();
        let ply = render_ply(&helix(), &bins, 24).unwrap();
        assert!(ply.contains("element vertex 72\n"));
        assert!(ply.contains("element edge 71\n"));
        let body = ply.split("end_header\n").nth(1).unwrap();
        assert_eq!(body.lines().count(), 72 + 71);
    }

    #[test]
    fn svg_is_well_formed_with_one_circle_per_bin() {
        let bins: Vec<usize> = (0..72).collect();
        let svg = render_svg(&helix(), &bins, 24).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let circles: Vec<_> = doc
            .descendants()
            .filter(|n| n.has_tag_name("circle"))
            .collect();
        assert_eq!(circles.len(), 72);
        assert_eq!(circles[0].attribute("fill"), circles[24].attribute("fill"));
        assert_ne!(circles[0].attribute("fill"), circles[12].attribute("fill"));
    }

    #[test]
    fn polyline_skips_missing_bins() {
        assert_eq!(polyline(&[0, 1, 2, 5, 6]), vec![(0, 1), (1, 2), (3, 4)]);
    }

    #[test]
    fn plot_format_names() {
        assert_eq!("svg".parse::<PlotFormat>().unwrap(), PlotFormat::Svg);
        assert!("png".parse::<PlotFormat>().is_err());
    }

    #[test]
    fn embedding_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embedding.csv");
        let emb = helix();
        let bins: Vec<usize> = (0..72).collect();
        write_embedding_csv(&path, &emb, &bins, 24).unwrap();
        let (back, back_bins, q) = read_embedding_csv(&path).unwrap();
        assert_eq!(back, emb);
        assert_eq!(back_bins, bins);
        assert_eq!(q, 24);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().any(|l| l == "bin,chroma,e1,e2,e3"));
        assert!(text.contains("\n25,1,"));
    }

    #[test]
    fn matrices_round_trip_including_infinity() {
        let dir = tempfile::tempdir().unwrap();
        let g = GeodesicMatrix::new(ndarray::array![
            [ExtDist::ZERO, ExtDist::Finite(0.1), ExtDist::Infinite],
            [ExtDist::Finite(0.1), ExtDist::ZERO, ExtDist::Infinite],
            [ExtDist::Infinite, ExtDist::Infinite, ExtDist::ZERO]
        ])
        .unwrap();
        let p = dir.path().join("g.csv");
        write_geodesics_csv(&p, &g).unwrap();
        assert_eq!(read_geodesics_csv(&p).unwrap(), g);

        let r = CorrelationMatrix::new(ndarray::array![[1.0, 0.3], [0.3, 1.0]]).unwrap();
        let p = dir.path().join("r.csv");
        write_rho2_csv(&p, &r).unwrap();
        assert_eq!(read_rho2_csv(&p).unwrap(), r);

        let x = ScalogramMatrix::from_rows(
            vec![vec![0.5, 1e-300], vec![0.0, 2.0]],
            vec!["a,b".into(), "c".into()],
        )
        .unwrap();
        let p = dir.path().join("x.csv");
        write_scalogram_csv(&p, &x).unwrap();
        assert_eq!(read_scalogram_csv(&p).unwrap(), x);
    }

    #[test]
    fn malformed_files_are_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "bin,0,1\n0,1,x\n1,0.2,1\n").unwrap();
        assert!(matches!(read_rho2_csv(&p), Err(Error::Parse { .. })));
        assert!(matches!(
            read_rho2_csv(dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }
}
