//! Shared pixel-grid data model: label maps, displacement fields, class grids.
//!
//! Coordinate convention: `x` is the column, `y` is the row, origin at the
//! top-left, row-major storage. All types are immutable after construction
//! and constructors validate their invariants.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Image dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub rows: usize,
    pub cols: usize,
}

impl Dims {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::validation(format!(
                "dims must be at least 1x1, got {rows}x{cols}"
            )));
        }
        Ok(Dims { rows, cols })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false // rows, cols >= 1 by construction
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        p.x < self.cols && p.y < self.rows
    }

    /// Row-major linear index of `p`. Caller must ensure `p` is in bounds.
    pub fn index(&self, p: PixelCoord) -> usize {
        debug_assert!(self.contains(p));
        p.y * self.cols + p.x
    }

    pub fn coord(&self, index: usize) -> PixelCoord {
        PixelCoord {
            x: index % self.cols,
            y: index / self.cols,
        }
    }

    /// Iterate all pixel coordinates in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = PixelCoord> + '_ {
        let cols = self.cols;
        (0..self.len()).map(move |i| PixelCoord {
            x: i % cols,
            y: i / cols,
        })
    }
}

/// A pixel position: `x` = column, `y` = row, both 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelCoord {
    pub y: usize,
    pub x: usize,
}

impl PixelCoord {
    pub fn new(x: usize, y: usize) -> Self {
        PixelCoord { x, y }
    }

    /// Round real coordinates half away from zero and clamp into `dims`.
    pub fn from_rounded(x: f64, y: f64, dims: Dims) -> Self {
        let clamp = |v: f64, hi: usize| -> usize {
            let r = v.round(); // f64::round is half-away-from-zero
            if r <= 0.0 {
                0
            } else {
                (r as usize).min(hi - 1)
            }
        };
        PixelCoord {
            x: clamp(x, dims.cols),
            y: clamp(y, dims.rows),
        }
    }
}

/// A block position in the encoder-resolution grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockCoord {
    pub y: usize,
    pub x: usize,
}

impl BlockCoord {
    pub fn new(x: usize, y: usize) -> Self {
        BlockCoord { x, y }
    }
}

/// Object class identifier. 0 is reserved for background; foreground classes
/// are 1..=K. The canonical mapping for urban-scene data is person=1, rider=2,
/// car=3, truck=4, bus=5, train=6, motorcycle=7, bicycle=8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub u32);

impl ClassId {
    pub const BACKGROUND: ClassId = ClassId(0);

    pub fn is_background(&self) -> bool {
        self.0 == 0
    }
}

/// Instance identifier, unique within one label map. 0 means background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstanceId(pub u32);

impl InstanceId {
    pub const BACKGROUND: InstanceId = InstanceId(0);

    pub fn is_background(&self) -> bool {
        self.0 == 0
    }
}

/// Per-pixel instance identity map plus the instance -> class table.
///
/// This is the carrier for both ground truth and decoded segmentations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceLabelMap {
    dims: Dims,
    labels: Vec<InstanceId>,
    classes: BTreeMap<InstanceId, ClassId>,
}

impl InstanceLabelMap {
    /// Validates that `labels` matches `dims`, that every non-background id
    /// appearing in `labels` has a class entry, that every class entry is a
    /// foreground class, and that every registered instance occupies at least
    /// one pixel.
    pub fn new(
        dims: Dims,
        labels: Vec<InstanceId>,
        classes: BTreeMap<InstanceId, ClassId>,
    ) -> Result<Self> {
        if labels.len() != dims.len() {
            return Err(Error::validation(format!(
                "label buffer has {} entries, dims {}x{} need {}",
                labels.len(),
                dims.rows,
                dims.cols,
                dims.len()
            )));
        }
        let mut seen: BTreeMap<InstanceId, usize> = BTreeMap::new();
        for id in &labels {
            if !id.is_background() {
                *seen.entry(*id).or_insert(0) += 1;
            }
        }
        for id in seen.keys() {
            if !classes.contains_key(id) {
                return Err(Error::validation(format!(
                    "instance {} appears in the label map but has no class entry",
                    id.0
                )));
            }
        }
        for (id, class) in &classes {
            if id.is_background() {
                return Err(Error::validation(
                    "instance id 0 is reserved for background and cannot carry a class",
                ));
            }
            if class.is_background() {
                return Err(Error::validation(format!(
                    "instance {} is assigned the background class",
                    id.0
                )));
            }
            if !seen.contains_key(id) {
                return Err(Error::validation(format!(
                    "instance {} has a class entry but occupies no pixel",
                    id.0
                )));
            }
        }
        Ok(InstanceLabelMap {
            dims,
            labels,
            classes,
        })
    }

    /// An all-background map.
    pub fn background(dims: Dims) -> Self {
        InstanceLabelMap {
            dims,
            labels: vec![InstanceId::BACKGROUND; dims.len()],
            classes: BTreeMap::new(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn label(&self, p: PixelCoord) -> InstanceId {
        self.labels[self.dims.index(p)]
    }

    pub fn labels(&self) -> &[InstanceId] {
        &self.labels
    }

    pub fn classes(&self) -> &BTreeMap<InstanceId, ClassId> {
        &self.classes
    }

    pub fn class_of(&self, id: InstanceId) -> Option<ClassId> {
        self.classes.get(&id).copied()
    }

    /// Pixel sets of every instance, keyed by id, in id order.
    pub fn instance_pixels(&self) -> BTreeMap<InstanceId, PixelSet> {
        let mut out: BTreeMap<InstanceId, Vec<PixelCoord>> = BTreeMap::new();
        for (i, id) in self.labels.iter().enumerate() {
            if !id.is_background() {
                out.entry(*id).or_default().push(self.dims.coord(i));
            }
        }
        out.into_iter()
            .map(|(id, px)| (id, PixelSet::from_sorted(px)))
            .collect()
    }

    /// Foreground classes present in the map, ascending, deduplicated.
    pub fn present_classes(&self) -> Vec<ClassId> {
        let mut v: Vec<ClassId> = self.classes.values().copied().collect();
        v.sort();
        v.dedup();
        v
    }
}

/// A set of pixels stored sorted in row-major (y, x) order without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PixelSet {
    pixels: Vec<PixelCoord>,
}

impl PixelSet {
    pub fn from_pixels(mut pixels: Vec<PixelCoord>) -> Self {
        pixels.sort();
        pixels.dedup();
        PixelSet { pixels }
    }

    /// Like [`PixelSet::from_pixels`] but trusts the input to already be
    /// sorted row-major and free of duplicates.
    pub fn from_sorted(pixels: Vec<PixelCoord>) -> Self {
        debug_assert!(pixels.windows(2).all(|w| w[0] < w[1]));
        PixelSet { pixels }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = PixelCoord> + '_ {
        self.pixels.iter().copied()
    }

    pub fn as_slice(&self) -> &[PixelCoord] {
        &self.pixels
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        self.pixels.binary_search(&p).is_ok()
    }

    /// Size of the intersection with `other` (both sorted: linear merge).
    pub fn intersection_count(&self, other: &PixelSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.pixels.len() && j < other.pixels.len() {
            match self.pixels[i].cmp(&other.pixels[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// 2-channel per-pixel displacement map. `dx` is horizontal (columns), `dy`
/// vertical (rows), in pixels. A vector points from its pixel to the center
/// of mass of the instance covering that pixel; background carries (0, 0).
///
/// Values are stored as f32, matching the on-disk representation exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    dims: Dims,
    dx: Vec<f32>,
    dy: Vec<f32>,
}

impl VectorField {
    pub fn new(dims: Dims, dx: Vec<f32>, dy: Vec<f32>) -> Result<Self> {
        if dx.len() != dims.len() || dy.len() != dims.len() {
            return Err(Error::validation(format!(
                "vector field channels have {} / {} entries, dims {}x{} need {}",
                dx.len(),
                dy.len(),
                dims.rows,
                dims.cols,
                dims.len()
            )));
        }
        Ok(VectorField { dims, dx, dy })
    }

    pub fn zeros(dims: Dims) -> Self {
        VectorField {
            dims,
            dx: vec![0.0; dims.len()],
            dy: vec![0.0; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn dx(&self) -> &[f32] {
        &self.dx
    }

    pub fn dy(&self) -> &[f32] {
        &self.dy
    }

    pub fn vector(&self, p: PixelCoord) -> (f32, f32) {
        let i = self.dims.index(p);
        (self.dx[i], self.dy[i])
    }
}

/// Grid geometry: `n` stride-2 reductions give blocks of `grid_size` = 2^n
/// pixels on each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n: u32,
    grid_size: u32,
}

/// Largest supported stride count; 2^16 blocks already exceed any real image.
pub const MAX_STRIDE_OPS: u32 = 16;

impl GridSpec {
    pub fn new(n: u32) -> Result<Self> {
        if n > MAX_STRIDE_OPS {
            return Err(Error::validation(format!(
                "stride-op count {n} out of range 0..={MAX_STRIDE_OPS}"
            )));
        }
        Ok(GridSpec {
            n,
            grid_size: 1u32 << n,
        })
    }

    /// Reconstruct from a stored grid size, which must be a power of two.
    pub fn from_grid_size(grid_size: u32) -> Result<Self> {
        if grid_size == 0 || !grid_size.is_power_of_two() {
            return Err(Error::validation(format!(
                "grid size {grid_size} is not a power of two"
            )));
        }
        GridSpec::new(grid_size.trailing_zeros())
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn grid_size(&self) -> u32 {
        self.grid_size
    }

    /// Block-grid dimensions covering an image of `dims` (last row/col of
    /// blocks may be partial).
    pub fn block_dims(&self, dims: Dims) -> Dims {
        let gs = self.grid_size as usize;
        Dims {
            rows: dims.rows.div_ceil(gs),
            cols: dims.cols.div_ceil(gs),
        }
    }
}

/// Per-block class labels at encoder resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassGrid {
    block_dims: Dims,
    labels: Vec<ClassId>,
    grid: GridSpec,
}

impl ClassGrid {
    pub fn new(block_dims: Dims, labels: Vec<ClassId>, grid: GridSpec) -> Result<Self> {
        if labels.len() != block_dims.len() {
            return Err(Error::validation(format!(
                "class grid has {} labels, block dims {}x{} need {}",
                labels.len(),
                block_dims.rows,
                block_dims.cols,
                block_dims.len()
            )));
        }
        Ok(ClassGrid {
            block_dims,
            labels,
            grid,
        })
    }

    pub fn block_dims(&self) -> Dims {
        self.block_dims
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn label(&self, b: BlockCoord) -> ClassId {
        self.labels[b.y * self.block_dims.cols + b.x]
    }

    pub fn contains(&self, b: BlockCoord) -> bool {
        b.x < self.block_dims.cols && b.y < self.block_dims.rows
    }
}
