//! Seeded synthetic scene generation: desk-scale stand-ins for real
//! street-scene ground truth, used by the pipeline tests and the `synth`
//! command.
//!
//! Placement is rejection sampling. Every accepted instance is disjoint from
//! the others, meets the area floor, keeps the requested center-of-mass
//! separation, and contains the pixel its center of mass rounds to (so an
//! encoded scene decodes back to exactly the same masks).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::CenterOfMass;
use crate::error::{Error, Result};
use crate::grid::image_to_block;
use crate::types::{ClassId, Dims, GridSpec, InstanceId, InstanceLabelMap, PixelCoord, PixelSet};

/// Shape families the generator can draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
    LShape,
}

impl std::str::FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangle" | "rect" => Ok(ShapeKind::Rectangle),
            "ellipse" => Ok(ShapeKind::Ellipse),
            "l-shape" | "lshape" | "l" => Ok(ShapeKind::LShape),
            other => Err(Error::validation(format!(
                "unknown shape kind '{other}' (expected rectangle, ellipse or l-shape)"
            ))),
        }
    }
}

/// Scene recipe. Identical specs produce identical maps.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub dims: Dims,
    pub n_instances: usize,
    pub shapes: Vec<ShapeKind>,
    pub classes: Vec<ClassId>,
    /// Minimum pairwise distance between instance centers of mass.
    pub min_cm_separation: f64,
    pub seed: u64,
    /// Inclusive range of shape edge lengths, in pixels.
    pub extent_range: (usize, usize),
    /// Reject shapes smaller than this many pixels.
    pub min_area: usize,
    /// When set, no two instances share or intrude on each other's
    /// center-of-mass block at this grid, so grid classification of the
    /// scene is exact by construction.
    pub cm_exclusive_grid: Option<GridSpec>,
    /// Snap every instance to a union of even-aligned 2x2 blocks (such
    /// scenes survive the half-resolution round trip losslessly).
    pub align_even: bool,
}

impl SceneSpec {
    pub fn new(dims: Dims, n_instances: usize, seed: u64) -> Self {
        SceneSpec {
            dims,
            n_instances,
            shapes: vec![ShapeKind::Rectangle, ShapeKind::Ellipse, ShapeKind::LShape],
            classes: vec![ClassId(1)],
            min_cm_separation: 0.0,
            seed,
            extent_range: (4, 16),
            min_area: 1,
            cm_exclusive_grid: None,
            align_even: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(Error::validation("scene spec needs at least one shape kind"));
        }
        if self.classes.is_empty() || self.classes.iter().any(|c| c.is_background()) {
            return Err(Error::validation(
                "scene spec needs a non-empty foreground class vocabulary",
            ));
        }
        let (lo, hi) = self.extent_range;
        if lo < 1 || hi < lo {
            return Err(Error::validation(format!(
                "extent range ({lo}, {hi}) is not a valid inclusive range"
            )));
        }
        let limit = self.dims.rows.min(self.dims.cols);
        if hi > limit {
            return Err(Error::validation(format!(
                "maximum extent {hi} does not fit {}x{} dims",
                self.dims.rows, self.dims.cols
            )));
        }
        if self.min_area < 1 {
            return Err(Error::validation("minimum area must be at least 1"));
        }
        if self.min_cm_separation.is_nan() || self.min_cm_separation < 0.0 {
            return Err(Error::validation("CM separation must be >= 0"));
        }
        Ok(())
    }
}

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Pixel rectangle of the block containing `cm` (rounded), at grid `gs`.
fn cm_block_rect(cm: &CenterOfMass, dims: Dims, gs: GridSpec) -> (usize, usize, usize, usize) {
    let p = cm.to_pixel(dims);
    let b = image_to_block(p, gs);
    let g = gs.grid_size() as usize;
    let x0 = b.x * g;
    let y0 = b.y * g;
    (
        x0,
        y0,
        (x0 + g).min(dims.cols),
        (y0 + g).min(dims.rows),
    )
}

fn in_rect(p: PixelCoord, rect: (usize, usize, usize, usize)) -> bool {
    p.x >= rect.0 && p.y >= rect.1 && p.x < rect.2 && p.y < rect.3
}

struct Placement {
    cm: CenterOfMass,
    cm_rect: Option<(usize, usize, usize, usize)>,
}

/// Generate the scene described by `spec`. Fails with a generation error
/// naming the binding constraint when an instance cannot be placed within
/// 10,000 attempts.
pub fn generate(spec: &SceneSpec) -> Result<InstanceLabelMap> {
    spec.validate()?;
    let dims = spec.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut occupied = vec![false; dims.len()];
    let mut placed: Vec<Placement> = Vec::new();
    let mut labels = vec![InstanceId::BACKGROUND; dims.len()];
    let mut classes = std::collections::BTreeMap::new();

    for k in 0..spec.n_instances {
        let mut rejections: std::collections::BTreeMap<&str, usize> = Default::default();
        let mut accepted = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let kind = spec.shapes[rng.gen_range(0..spec.shapes.len())];
            let (lo, hi) = spec.extent_range;
            let w = rng.gen_range(lo..=hi);
            let h = rng.gen_range(lo..=hi);
            let (gw, gh) = if spec.align_even {
                // Shapes are drawn on the half-resolution lattice and blown
                // up 2x, so extents and offsets stay even.
                (w.div_ceil(2).max(1), h.div_ceil(2).max(1))
            } else {
                (w, h)
            };
            let (limit_c, limit_r) = if spec.align_even {
                (dims.cols / 2, dims.rows / 2)
            } else {
                (dims.cols, dims.rows)
            };
            if gw > limit_c || gh > limit_r {
                *rejections.entry("extent exceeds dims").or_insert(0) += 1;
                continue;
            }
            let x0 = rng.gen_range(0..=limit_c - gw);
            let y0 = rng.gen_range(0..=limit_r - gh);
            let mut pixels = rasterize(kind, x0, y0, gw, gh);
            if spec.align_even {
                pixels = pixels
                    .into_iter()
                    .flat_map(|p| {
                        [
                            PixelCoord::new(2 * p.x, 2 * p.y),
                            PixelCoord::new(2 * p.x + 1, 2 * p.y),
                            PixelCoord::new(2 * p.x, 2 * p.y + 1),
                            PixelCoord::new(2 * p.x + 1, 2 * p.y + 1),
                        ]
                    })
                    .collect();
            }
            if pixels.len() < spec.min_area {
                *rejections.entry("area below minimum").or_insert(0) += 1;
                continue;
            }
            if pixels.iter().any(|p| occupied[dims.index(*p)]) {
                *rejections.entry("overlap with an existing instance").or_insert(0) += 1;
                continue;
            }
            let set = PixelSet::from_pixels(pixels.clone());
            let cm = CenterOfMass::of_pixels(&set).expect("non-empty");
            if !set.contains(cm.to_pixel(dims)) {
                *rejections.entry("center of mass outside the shape").or_insert(0) += 1;
                continue;
            }
            if placed
                .iter()
                .any(|pl| pl.cm.distance(&cm) < spec.min_cm_separation)
            {
                *rejections.entry("center-of-mass separation").or_insert(0) += 1;
                continue;
            }
            // Occupancy only covers committed instances, so a shape's own
            // pixels inside its own CM block never count as a clash.
            let cm_rect = spec.cm_exclusive_grid.map(|gs| cm_block_rect(&cm, dims, gs));
            if let Some(rect) = cm_rect {
                let clash = rect_has_foreign(rect, dims, &occupied)
                    || placed.iter().any(|pl| {
                        pixels
                            .iter()
                            .any(|p| in_rect(*p, pl.cm_rect.expect("set with grid")))
                    });
                if clash {
                    *rejections.entry("center-of-mass block exclusivity").or_insert(0) += 1;
                    continue;
                }
            }

            let id = InstanceId((k + 1) as u32);
            for p in &pixels {
                occupied[dims.index(*p)] = true;
                labels[dims.index(*p)] = id;
            }
            let class = spec.classes[rng.gen_range(0..spec.classes.len())];
            classes.insert(id, class);
            placed.push(Placement { cm, cm_rect });
            accepted = true;
            break;
        }
        if !accepted {
            let constraint = rejections
                .into_iter()
                .max_by_key(|(_, n)| *n)
                .map(|(name, _)| name)
                .unwrap_or("no candidate fit");
            return Err(Error::Generation(format!(
                "instance {}/{} could not be placed within {} attempts; binding constraint: {}",
                k + 1,
                spec.n_instances,
                MAX_PLACEMENT_ATTEMPTS,
                constraint
            )));
        }
    }
    InstanceLabelMap::new(dims, labels, classes)
}

fn rect_has_foreign(rect: (usize, usize, usize, usize), dims: Dims, occupied: &[bool]) -> bool {
    for y in rect.1..rect.3 {
        for x in rect.0..rect.2 {
            if occupied[y * dims.cols + x] {
                return true;
            }
        }
    }
    false
}

fn rasterize(kind: ShapeKind, x0: usize, y0: usize, w: usize, h: usize) -> Vec<PixelCoord> {
    match kind {
        ShapeKind::Rectangle => {
            let mut px = Vec::with_capacity(w * h);
            for y in y0..y0 + h {
                for x in x0..x0 + w {
                    px.push(PixelCoord::new(x, y));
                }
            }
            px
        }
        ShapeKind::Ellipse => {
            let cx = x0 as f64 + (w as f64 - 1.0) / 2.0;
            let cy = y0 as f64 + (h as f64 - 1.0) / 2.0;
            let a = w as f64 / 2.0;
            let b = h as f64 / 2.0;
            let mut px = Vec::new();
            for y in y0..y0 + h {
                for x in x0..x0 + w {
                    let dx = (x as f64 - cx) / a;
                    let dy = (y as f64 - cy) / b;
                    if dx * dx + dy * dy <= 1.0 {
                        px.push(PixelCoord::new(x, y));
                    }
                }
            }
            px
        }
        ShapeKind::LShape => {
            // Full rectangle minus its top-right quadrant.
            let notch_x = x0 + w.div_ceil(2);
            let notch_y = y0 + h / 2;
            let mut px = Vec::new();
            for y in y0..y0 + h {
                for x in x0..x0 + w {
                    if x >= notch_x && y < notch_y {
                        continue;
                    }
                    px.push(PixelCoord::new(x, y));
                }
            }
            px
        }
    }
}
