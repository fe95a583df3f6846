//! Center-of-mass displacement encoding and decoding.
//!
//! Encoding writes, at every foreground pixel, the 2D vector pointing from
//! that pixel to the center of mass of its instance; background pixels carry
//! (0, 0). Decoding inverts this: every pixel votes for the point its vector
//! targets, vote peaks become instance centers, and pixels whose targets land
//! near a center form that instance's mask.

use crate::error::{Error, Result};
use crate::types::{ClassId, Dims, InstanceLabelMap, PixelCoord, PixelSet, VectorField};

/// Real-valued instance center: the arithmetic mean of the instance's pixel
/// coordinates. For concave shapes it may fall outside the instance itself,
/// but never outside its bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterOfMass {
    pub x: f64,
    pub y: f64,
}

impl CenterOfMass {
    pub fn of_pixels(pixels: &PixelSet) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::validation(
                "center of mass of an empty pixel set is undefined",
            ));
        }
        let mut sx = 0.0;
        let mut sy = 0.0;
        for p in pixels.iter() {
            sx += p.x as f64;
            sy += p.y as f64;
        }
        let n = pixels.len() as f64;
        Ok(CenterOfMass {
            x: sx / n,
            y: sy / n,
        })
    }

    /// Nearest pixel, rounding half away from zero, clamped into `dims`.
    pub fn to_pixel(&self, dims: Dims) -> PixelCoord {
        PixelCoord::from_rounded(self.x, self.y, dims)
    }

    pub fn distance(&self, other: &CenterOfMass) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Arithmetic-mean center of a non-empty pixel set.
pub fn center_of_mass(pixels: &PixelSet) -> Result<CenterOfMass> {
    CenterOfMass::of_pixels(pixels)
}

/// Tuning knobs for the vote-clustering decoder. None of these come from a
/// measurement; they are exposed on the CLI and default to values that make
/// exact fields decode exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeParams {
    /// Minimum accumulated votes for a bin to be considered a peak.
    pub min_votes: u32,
    /// Peaks closer than this merge into their vote-weighted centroid.
    pub merge_radius: f64,
    /// Maximum distance between a pixel's vote target and a center for the
    /// pixel to join that center's mask.
    pub assign_tolerance: f64,
    /// Minimum vector magnitude for a pixel to vote or to count as
    /// foreground away from a center. Keeps flat background out.
    pub fg_threshold: f64,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            min_votes: 10,
            merge_radius: 2.0,
            assign_tolerance: 2.0,
            fg_threshold: 0.5,
        }
    }
}

impl DecodeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_votes < 1 {
            return Err(Error::validation("min_votes must be at least 1"));
        }
        if self.merge_radius.is_nan() || self.merge_radius < 0.0 {
            return Err(Error::validation("merge_radius must be >= 0"));
        }
        if self.assign_tolerance.is_nan() || self.assign_tolerance <= 0.0 {
            return Err(Error::validation("assign_tolerance must be > 0"));
        }
        if self.fg_threshold.is_nan() || self.fg_threshold < 0.0 {
            return Err(Error::validation("fg_threshold must be >= 0"));
        }
        Ok(())
    }
}

/// One decoded instance: its pixels, real-valued center, vote-agreement
/// confidence, and the class a later stage may fill in (background until
/// classified).
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub mask: PixelSet,
    pub center: CenterOfMass,
    pub score: f64,
    pub class: ClassId,
}

/// Encode an instance label map into its displacement vector field.
///
/// Every pixel of instance `i` receives `CM(i) - p`; background pixels stay
/// at (0, 0). Values are truncated to f32, the storage and file precision.
pub fn encode(map: &InstanceLabelMap) -> VectorField {
    let dims = map.dims();
    let mut sums: std::collections::BTreeMap<u32, (f64, f64, f64)> = Default::default();
    for (i, id) in map.labels().iter().enumerate() {
        if !id.is_background() {
            let p = dims.coord(i);
            let e = sums.entry(id.0).or_insert((0.0, 0.0, 0.0));
            e.0 += p.x as f64;
            e.1 += p.y as f64;
            e.2 += 1.0;
        }
    }
    let centers: std::collections::BTreeMap<u32, (f64, f64)> = sums
        .into_iter()
        .map(|(id, (sx, sy, n))| (id, (sx / n, sy / n)))
        .collect();

    let mut dx = vec![0.0f32; dims.len()];
    let mut dy = vec![0.0f32; dims.len()];
    for (i, id) in map.labels().iter().enumerate() {
        if let Some((cx, cy)) = centers.get(&id.0) {
            let p = dims.coord(i);
            dx[i] = (cx - p.x as f64) as f32;
            dy[i] = (cy - p.y as f64) as f32;
        }
    }
    VectorField::new(dims, dx, dy).expect("buffers sized from dims")
}

/// Per-pixel Euclidean norm of the field, row-major.
pub fn magnitude_map(field: &VectorField) -> Vec<f64> {
    field
        .dx()
        .iter()
        .zip(field.dy())
        .map(|(x, y)| (*x as f64).hypot(*y as f64))
        .collect()
}

/// How close (in pixels) a low-magnitude pixel's vote target must be to a
/// center to join its mask. Covers the worst-case half-pixel-per-axis gap
/// between a center's vote bin and the true center of mass, with slack for
/// f32 quantization; anything farther is flat background.
const LOW_MAGNITUDE_CAPTURE_RADIUS: f64 = 0.75;

/// Decode a displacement field into class-agnostic detections.
///
/// Stages: (1) every pixel whose vector clears `fg_threshold`, or whose
/// target leaves its own pixel, votes for the rounded target; (2) vote bins
/// reaching `min_votes` that are 8-neighborhood maxima become peaks, and
/// peaks closer than `merge_radius` merge (closest pair first) into their
/// vote-weighted centroid; (3) every pixel joins the nearest center within
/// `assign_tolerance` of its target, except that low-magnitude pixels only
/// qualify right at a center. An undecodable field yields an empty list.
pub fn decode(field: &VectorField, params: &DecodeParams) -> Result<Vec<Detection>> {
    params.validate()?;
    let dims = field.dims();

    // Stage 1: vote accumulation.
    let mut votes = vec![0u32; dims.len()];
    let mut targets = vec![(0.0f64, 0.0f64); dims.len()];
    let mut mags = vec![0.0f64; dims.len()];
    for i in 0..dims.len() {
        let p = dims.coord(i);
        let vx = field.dx()[i] as f64;
        let vy = field.dy()[i] as f64;
        let t = (p.x as f64 + vx, p.y as f64 + vy);
        targets[i] = t;
        mags[i] = vx.hypot(vy);
        let bx = t.0.round();
        let by = t.1.round();
        if bx < 0.0 || by < 0.0 || bx >= dims.cols as f64 || by >= dims.rows as f64 {
            continue;
        }
        let bin = PixelCoord::new(bx as usize, by as usize);
        // Self-votes from pixels below the foreground threshold are the
        // background signature; they never count toward peaks.
        if mags[i] < params.fg_threshold && bin == p {
            continue;
        }
        votes[dims.index(bin)] += 1;
    }

    // Stage 2: peaks = qualifying local maxima; plateau ties go to the
    // row-major smallest bin.
    let mut centers: Vec<(f64, f64, u64)> = Vec::new(); // (x, y, weight)
    for i in 0..dims.len() {
        let c = votes[i];
        if c < params.min_votes {
            continue;
        }
        let p = dims.coord(i);
        let mut is_peak = true;
        'nbrs: for ny in p.y.saturating_sub(1)..=(p.y + 1).min(dims.rows - 1) {
            for nx in p.x.saturating_sub(1)..=(p.x + 1).min(dims.cols - 1) {
                let q = PixelCoord::new(nx, ny);
                if q == p {
                    continue;
                }
                let cq = votes[dims.index(q)];
                if cq > c || (cq == c && q < p) {
                    is_peak = false;
                    break 'nbrs;
                }
            }
        }
        if is_peak {
            centers.push((p.x as f64, p.y as f64, c as u64));
        }
    }

    merge_centers(&mut centers, params.merge_radius);

    if centers.is_empty() {
        return Ok(Vec::new());
    }

    // Stage 3: pixel assignment and vote-agreement scores.
    let mut masks: Vec<Vec<PixelCoord>> = vec![Vec::new(); centers.len()];
    let mut agreeing: Vec<u64> = vec![0; centers.len()];
    for i in 0..dims.len() {
        let p = dims.coord(i);
        let t = targets[i];
        let mut best: Option<(usize, f64)> = None;
        for (ci, c) in centers.iter().enumerate() {
            let d = (t.0 - c.0).hypot(t.1 - c.1);
            if d <= params.assign_tolerance {
                if mags[i] >= params.fg_threshold {
                    agreeing[ci] += 1;
                }
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((ci, d));
                }
            }
        }
        if let Some((ci, d)) = best {
            if mags[i] >= params.fg_threshold || d <= LOW_MAGNITUDE_CAPTURE_RADIUS {
                masks[ci].push(p);
                if mags[i] < params.fg_threshold {
                    agreeing[ci] += 1;
                }
            }
        }
    }

    let mut detections = Vec::new();
    for (ci, pixels) in masks.into_iter().enumerate() {
        if pixels.is_empty() {
            continue;
        }
        let mask = PixelSet::from_sorted(pixels);
        let center = CenterOfMass::of_pixels(&mask)?;
        let score = (agreeing[ci] as f64 / mask.len() as f64).clamp(0.0, 1.0);
        detections.push(Detection {
            mask,
            center,
            score,
            class: ClassId::BACKGROUND,
        });
    }
    Ok(detections)
}

/// Iteratively merge centers closer than `radius`, closest pair first, into
/// vote-weighted centroids. Ties on distance resolve to the earliest pair.
fn merge_centers(centers: &mut Vec<(f64, f64, u64)>, radius: f64) {
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                let d = (centers[i].0 - centers[j].0).hypot(centers[i].1 - centers[j].1);
                if d < radius && best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        let (ax, ay, aw) = centers[i];
        let (bx, by, bw) = centers[j];
        let w = aw + bw;
        centers[i] = (
            (ax * aw as f64 + bx * bw as f64) / w as f64,
            (ay * aw as f64 + by * bw as f64) / w as f64,
            w,
        );
        centers.remove(j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::types::{InstanceId, InstanceLabelMap};

    fn px(x: usize, y: usize) -> PixelCoord {
        PixelCoord::new(x, y)
    }

    fn map_with_rects(
        rows: usize,
        cols: usize,
        rects: &[(usize, usize, usize, usize, u32, u32)], // x0, y0, w, h, id, class
    ) -> InstanceLabelMap {
        let dims = Dims::new(rows, cols).unwrap();
        let mut labels = vec![InstanceId::BACKGROUND; dims.len()];
        let mut classes = BTreeMap::new();
        for (x0, y0, w, h, id, class) in rects.iter().copied() {
            for y in y0..y0 + h {
                for x in x0..x0 + w {
                    labels[y * cols + x] = InstanceId(id);
                }
            }
            classes.insert(InstanceId(id), crate::types::ClassId(class));
        }
        InstanceLabelMap::new(dims, labels, classes).unwrap()
    }

    #[test]
    fn center_of_mass_examples() {
        let single = PixelSet::from_pixels(vec![px(5, 7)]);
        let cm = center_of_mass(&single).unwrap();
        assert_eq!((cm.x, cm.y), (5.0, 7.0));

        let square = PixelSet::from_pixels(vec![px(0, 0), px(1, 0), px(0, 1), px(1, 1)]);
        let cm = center_of_mass(&square).unwrap();
        assert_eq!((cm.x, cm.y), (0.5, 0.5));

        let tri = PixelSet::from_pixels(vec![px(0, 0), px(0, 1), px(1, 0)]);
        let cm = center_of_mass(&tri).unwrap();
        assert_eq!((cm.x, cm.y), (1.0 / 3.0, 1.0 / 3.0));

        assert!(center_of_mass(&PixelSet::default()).is_err());
    }

    #[test]
    fn encode_background_is_zero() {
        let map = InstanceLabelMap::background(Dims::new(4, 4).unwrap());
        let field = encode(&map);
        assert!(field.dx().iter().all(|v| *v == 0.0));
        assert!(field.dy().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn encode_single_pixel_instance_is_zero_vector() {
        let map = map_with_rects(10, 10, &[(5, 7, 1, 1, 1, 1)]);
        let field = encode(&map);
        assert!(field.dx().iter().all(|v| *v == 0.0));
        assert!(field.dy().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn encode_three_pixel_bar() {
        // Bar at y=0, x in {2,3,4}: CM = (3,0); vectors (+1,0), (0,0), (-1,0).
        let map = map_with_rects(1, 8, &[(2, 0, 3, 1, 1, 1)]);
        let field = encode(&map);
        assert_eq!(field.vector(px(2, 0)), (1.0, 0.0));
        assert_eq!(field.vector(px(3, 0)), (0.0, 0.0));
        assert_eq!(field.vector(px(4, 0)), (-1.0, 0.0));
    }

    #[test]
    fn magnitude_examples() {
        let zero = VectorField::zeros(Dims::new(2, 2).unwrap());
        assert!(magnitude_map(&zero).iter().all(|m| *m == 0.0));

        let dims = Dims::new(1, 1).unwrap();
        let f = VectorField::new(dims, vec![3.0], vec![4.0]).unwrap();
        assert_eq!(magnitude_map(&f), vec![5.0]);
    }

    #[test]
    fn larger_objects_have_longer_border_vectors() {
        let map = map_with_rects(64, 64, &[(2, 2, 20, 20, 1, 1), (40, 40, 6, 6, 2, 1)]);
        let field = encode(&map);
        let mags = magnitude_map(&field);
        let dims = field.dims();
        let max_over = |x0: usize, y0: usize, w: usize, h: usize| -> f64 {
            let mut m = 0.0f64;
            for y in y0..y0 + h {
                for x in x0..x0 + w {
                    m = m.max(mags[dims.index(px(x, y))]);
                }
            }
            m
        };
        assert!(max_over(2, 2, 20, 20) > max_over(40, 40, 6, 6));
    }

    #[test]
    fn zero_field_decodes_to_nothing() {
        let field = VectorField::zeros(Dims::new(32, 32).unwrap());
        let dets = decode(&field, &DecodeParams::default()).unwrap();
        assert!(dets.is_empty());
    }

    #[test]
    fn round_trip_two_rectangles() {
        let map = map_with_rects(64, 64, &[(4, 4, 8, 6, 1, 1), (30, 30, 10, 12, 2, 2)]);
        let field = encode(&map);
        let dets = decode(&field, &DecodeParams::default()).unwrap();
        assert_eq!(dets.len(), 2);
        let gt = map.instance_pixels();
        for det in &dets {
            let matched = gt.values().any(|pxs| *pxs == det.mask);
            assert!(matched, "decoded mask does not equal any instance exactly");
            assert_eq!(det.score, 1.0);
        }
    }

    #[test]
    fn thin_rectangles_round_trip_exactly() {
        // 2x5 bar: the center of mass sits within a pixel of background rows.
        let map = map_with_rects(32, 32, &[(3, 3, 5, 2, 1, 1), (20, 20, 2, 7, 2, 1)]);
        let field = encode(&map);
        let dets = decode(&field, &DecodeParams::default()).unwrap();
        assert_eq!(dets.len(), 2);
        let gt = map.instance_pixels();
        for det in &dets {
            assert!(gt.values().any(|pxs| *pxs == det.mask));
        }
    }

    #[test]
    fn shared_center_of_mass_merges() {
        // A 7x7 frame and its 3x3 core share the same center of mass.
        let dims = Dims::new(24, 24).unwrap();
        let mut labels = vec![InstanceId::BACKGROUND; dims.len()];
        for y in 8..15 {
            for x in 8..15 {
                let inner = (9..14).contains(&x) && (9..14).contains(&y);
                let core = (10..13).contains(&x) && (10..13).contains(&y);
                if core {
                    labels[y * 24 + x] = InstanceId(2);
                } else if !inner {
                    labels[y * 24 + x] = InstanceId(1);
                }
            }
        }
        let classes = BTreeMap::from([
            (InstanceId(1), crate::types::ClassId(1)),
            (InstanceId(2), crate::types::ClassId(1)),
        ]);
        let map = InstanceLabelMap::new(dims, labels, classes).unwrap();
        let field = encode(&map);
        let dets = decode(&field, &DecodeParams::default()).unwrap();
        assert_eq!(dets.len(), 1, "same-center instances merge into one");
        let total: usize = map.instance_pixels().values().map(|s| s.len()).sum();
        assert_eq!(dets[0].mask.len(), total);
    }

    #[test]
    fn translation_equivariance() {
        let base = map_with_rects(40, 40, &[(5, 6, 7, 5, 1, 1)]);
        let shifted = map_with_rects(40, 40, &[(5 + 9, 6 + 11, 7, 5, 1, 1)]);
        let f0 = encode(&base);
        let f1 = encode(&shifted);
        for y in 6..11 {
            for x in 5..12 {
                assert_eq!(f0.vector(px(x, y)), f1.vector(px(x + 9, y + 11)));
            }
        }
    }

    #[test]
    fn magnitude_zero_exactly_on_background_and_center_pixels() {
        // 3x3 square: CM falls exactly on its middle pixel.
        let map = map_with_rects(16, 16, &[(4, 4, 3, 3, 1, 1)]);
        let field = encode(&map);
        let mags = magnitude_map(&field);
        let dims = field.dims();
        for p in dims.iter() {
            let on_instance = (4..7).contains(&p.x) && (4..7).contains(&p.y);
            let is_cm = p == px(5, 5);
            let expect_zero = !on_instance || is_cm;
            assert_eq!(mags[dims.index(p)] == 0.0, expect_zero, "at {p:?}");
        }
    }

    #[test]
    fn masks_disjoint_and_targets_within_tolerance() {
        let map = map_with_rects(
            64,
            64,
            &[(2, 2, 9, 9, 1, 1), (30, 5, 6, 11, 2, 1), (12, 40, 14, 8, 3, 2)],
        );
        let field = encode(&map);
        let params = DecodeParams::default();
        let dets = decode(&field, &params).unwrap();
        assert_eq!(dets.len(), 3);
        let mut seen = std::collections::BTreeSet::new();
        for det in &dets {
            assert!(det.score >= 0.0 && det.score <= 1.0);
            for p in det.mask.iter() {
                assert!(seen.insert(p), "masks overlap at {p:?}");
            }
        }
    }

    #[test]
    fn params_are_validated() {
        let field = VectorField::zeros(Dims::new(4, 4).unwrap());
        let bad = DecodeParams {
            min_votes: 0,
            ..DecodeParams::default()
        };
        assert!(decode(&field, &bad).is_err());
        let bad = DecodeParams {
            assign_tolerance: 0.0,
            ..DecodeParams::default()
        };
        assert!(decode(&field, &bad).is_err());
    }
}
