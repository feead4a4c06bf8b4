//! Rigid motion compensation: least-squares affine estimation between tracked
//! point sets and ROI propagation along the frame sequence.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::io::TrackRow;

/// Relative singularity threshold on the centred point scatter matrix.
const SCATTER_REL_TOL: f64 = 1e-10;
const MIN_ABS_DET: f64 = 1e-12;

/// `x ↦ linear · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    linear: [[f64; 2]; 2],
    translation: [f64; 2],
}

impl AffineTransform {
    pub fn new(linear: [[f64; 2]; 2], translation: [f64; 2]) -> Result<Self> {
        let finite = linear.iter().flatten().chain(&translation).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numerical("affine transform has non-finite entries".into()));
        }
        let t = Self { linear, translation };
        if t.det().abs() <= MIN_ABS_DET {
            return Err(Error::Numerical(format!(
                "affine transform is not invertible (det = {:e})",
                t.det()
            )));
        }
        Ok(t)
    }

    pub fn identity() -> Self {
        Self {
            linear: [[1.0, 0.0], [0.0, 1.0]],
            translation: [0.0, 0.0],
        }
    }

    pub fn translation_only(dx: f64, dy: f64) -> Self {
        Self {
            translation: [dx, dy],
            ..Self::identity()
        }
    }

    pub fn linear(&self) -> [[f64; 2]; 2] {
        self.linear
    }

    pub fn translation(&self) -> [f64; 2] {
        self.translation
    }

    pub fn det(&self) -> f64 {
        let m = &self.linear;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let m = &self.linear;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + self.translation[0],
            m[1][0] * p[0] + m[1][1] * p[1] + self.translation[1],
        ]
    }

    pub fn inverse(&self) -> Self {
        let m = &self.linear;
        let d = self.det();
        let inv = [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]];
        let t = self.translation;
        Self {
            linear: inv,
            translation: [
                -(inv[0][0] * t[0] + inv[0][1] * t[1]),
                -(inv[1][0] * t[0] + inv[1][1] * t[1]),
            ],
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let a = &self.linear;
        let b = &other.linear;
        let mut linear = [[0.0; 2]; 2];
        for (i, row) in linear.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        let t = self.apply(other.translation);
        Self {
            linear,
            translation: t,
        }
    }
}

/// Identified point locations in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    ids: Vec<u64>,
    coords: Vec<[f64; 2]>,
}

impl PointSet {
    pub fn new(ids: Vec<u64>, coords: Vec<[f64; 2]>) -> Result<Self> {
        if ids.len() != coords.len() {
            return Err(Error::validation("point ids and coordinates differ in length"));
        }
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("point coordinates must be finite"));
        }
        let mut seen = ids.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("duplicate point id in point set"));
        }
        Ok(Self { ids, coords })
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Closed polygon of ROI boundary points.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiPolygon {
    vertices: Vec<[f64; 2]>,
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

impl RoiPolygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let l = vertices.len();
        if l < 3 {
            return Err(Error::validation(format!("ROI polygon needs >= 3 vertices, got {l}")));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("ROI vertices must be finite"));
        }
        let edge = |i: usize| (vertices[i], vertices[(i + 1) % l]);
        if (0..l).any(|i| edge(i).0 == edge(i).1) {
            return Err(Error::validation("ROI polygon has a repeated vertex"));
        }
        for i in 0..l {
            for j in i + 1..l {
                // adjacent edges share a vertex by construction
                if j == i + 1 || (i == 0 && j == l - 1) {
                    continue;
                }
                let (a, b) = edge(i);
                let (c, d) = edge(j);
                if segments_intersect(a, b, c, d) {
                    return Err(Error::validation(format!(
                        "ROI polygon self-intersects (edges {i} and {j})"
                    )));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }
}

/// Result of [`estimate_affine`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub transform: AffineTransform,
    /// Σ‖p_next − A·p_curr‖² at the optimum.
    pub residual: f64,
    /// Correspondences used after id intersection.
    pub n_points: usize,
}

/// Sum of squared residuals of `a` over matched pairs.
pub fn residual(a: &AffineTransform, src: &[[f64; 2]], dst: &[[f64; 2]]) -> f64 {
    src.iter()
        .zip(dst)
        .map(|(p, q)| {
            let m = a.apply(*p);
            (q[0] - m[0]).powi(2) + (q[1] - m[1]).powi(2)
        })
        .sum()
}

/// Least-squares affine map from matched source to destination coordinates.
///
/// The homogeneous normal equations decouple into a translation given by the
/// centroids and a 2×2 linear part `C · S⁻¹`, where `S` is the centred source
/// scatter and `C` the centred cross-covariance.
pub fn fit_affine(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<AffineFit> {
    let n = src.len();
    if n != dst.len() {
        return Err(Error::validation("source and destination point counts differ"));
    }
    if n < 3 {
        return Err(Error::DegenerateGeometry {
            frame_pair: None,
            reason: format!("{n} common points, at least 3 required"),
        });
    }
    let nf = n as f64;
    let mean = |pts: &[[f64; 2]]| {
        let s = pts.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
        [s[0] / nf, s[1] / nf]
    };
    let cs = mean(src);
    let cd = mean(dst);
    let mut s = [[0.0; 2]; 2];
    let mut c = [[0.0; 2]; 2];
    for (p, q) in src.iter().zip(dst) {
        let u = [p[0] - cs[0], p[1] - cs[1]];
        let v = [q[0] - cd[0], q[1] - cd[1]];
        for i in 0..2 {
            for j in 0..2 {
                s[i][j] += u[i] * u[j];
                c[i][j] += v[i] * u[j];
            }
        }
    }
    let det_s = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let tr = s[0][0] + s[1][1];
    if !(tr > 0.0) || det_s <= SCATTER_REL_TOL * tr * tr {
        return Err(Error::DegenerateGeometry {
            frame_pair: None,
            reason: "points are collinear or coincident".into(),
        });
    }
    let s_inv = [
        [s[1][1] / det_s, -s[0][1] / det_s],
        [-s[1][0] / det_s, s[0][0] / det_s],
    ];
    let mut linear = [[0.0; 2]; 2];
    for (i, row) in linear.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = c[i][0] * s_inv[0][j] + c[i][1] * s_inv[1][j];
        }
    }
    let translation = [
        cd[0] - (linear[0][0] * cs[0] + linear[0][1] * cs[1]),
        cd[1] - (linear[1][0] * cs[0] + linear[1][1] * cs[1]),
    ];
    let transform = AffineTransform::new(linear, translation)?;
    Ok(AffineFit {
        residual: residual(&transform, src, dst),
        transform,
        n_points: n,
    })
}

/// Pairs up points by id and returns the least-squares transform taking the
/// current frame onto the next. Points seen in only one frame are dropped.
pub fn estimate_affine(p_curr: &PointSet, p_next: &PointSet) -> Result<AffineFit> {
    let next: HashMap<u64, [f64; 2]> =
        p_next.ids.iter().copied().zip(p_next.coords.iter().copied()).collect();
    let (src, dst): (Vec<_>, Vec<_>) = p_curr
        .ids
        .iter()
        .zip(&p_curr.coords)
        .filter_map(|(id, p)| next.get(id).map(|q| (*p, *q)))
        .unzip();
    fit_affine(&src, &dst)
}

pub fn propagate_roi(roi: &RoiPolygon, a: &AffineTransform) -> RoiPolygon {
    // an invertible affine map keeps a simple polygon simple
    RoiPolygon {
        vertices: roi.vertices.iter().map(|v| a.apply(*v)).collect(),
    }
}

/// Diagnostics for one consecutive frame pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFit {
    pub from_frame: i64,
    pub to_frame: i64,
    pub n_points: usize,
    pub residual: f64,
    pub transform: AffineTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoiTrack {
    pub frames: Vec<i64>,
    pub polygons: Vec<RoiPolygon>,
    pub pairs: Vec<PairFit>,
}

/// Groups track rows into per-frame point sets; frames must be consecutive.
pub fn group_tracks(tracks: &[TrackRow]) -> Result<BTreeMap<i64, PointSet>> {
    let mut by_frame: BTreeMap<i64, (Vec<u64>, Vec<[f64; 2]>)> = BTreeMap::new();
    for r in tracks {
        let e = by_frame.entry(r.frame).or_default();
        e.0.push(r.point_id);
        e.1.push([r.x, r.y]);
    }
    if by_frame.is_empty() {
        return Err(Error::validation("point-track table is empty"));
    }
    let frames: Vec<i64> = by_frame.keys().copied().collect();
    if let Some(w) = frames.windows(2).find(|w| w[1] != w[0] + 1) {
        return Err(Error::validation(format!(
            "point tracks skip from frame {} to frame {}",
            w[0], w[1]
        )));
    }
    by_frame
        .into_iter()
        .map(|(f, (ids, coords))| {
            PointSet::new(ids, coords)
                .map(|ps| (f, ps))
                .map_err(|e| Error::validation(format!("frame {f}: {e}")))
        })
        .collect()
}

/// Propagates `initial` (placed on the first track frame) through every frame.
pub fn track_roi(initial: &RoiPolygon, tracks: &[TrackRow]) -> Result<RoiTrack> {
    let sets = group_tracks(tracks)?;
    let frames: Vec<i64> = sets.keys().copied().collect();
    let sets: Vec<&PointSet> = sets.values().collect();
    let mut polygons = Vec::with_capacity(frames.len());
    let mut pairs = Vec::with_capacity(frames.len().saturating_sub(1));
    polygons.push(initial.clone());
    for (i, w) in sets.windows(2).enumerate() {
        let (from_frame, to_frame) = (frames[i], frames[i + 1]);
        let fit = estimate_affine(w[0], w[1]).map_err(|e| match e {
            Error::DegenerateGeometry { reason, .. } => Error::DegenerateGeometry {
                frame_pair: Some((from_frame, to_frame)),
                reason,
            },
            Error::Numerical(reason) => Error::DegenerateGeometry {
                frame_pair: Some((from_frame, to_frame)),
                reason,
            },
            other => other,
        })?;
        let next = propagate_roi(&polygons[i], &fit.transform);
        polygons.push(next);
        pairs.push(PairFit {
            from_frame,
            to_frame,
            n_points: fit.n_points,
            residual: fit.residual,
            transform: fit.transform,
        });
    }
    Ok(RoiTrack {
        frames,
        polygons,
        pairs,
    })
}
