//! Encoder-grid geometry and block class annotation.
//!
//! A segmentation encoder with `n` stride-2 reductions sees the input image
//! as blocks of `2^n` pixels on a side. Each encoder output position
//! classifies one block; when a block contains pixels of several classes,
//! a priority list (underrepresented classes first) decides the label.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{
    BlockCoord, ClassGrid, ClassId, GridSpec, InstanceLabelMap, PixelCoord, MAX_STRIDE_OPS,
};

/// Block edge length after `n` stride-2 reductions: `2^n`.
pub fn grid_size(n: u32) -> Result<u32> {
    if n > MAX_STRIDE_OPS {
        return Err(Error::validation(format!(
            "stride-op count {n} out of range 0..={MAX_STRIDE_OPS}"
        )));
    }
    Ok(1u32 << n)
}

/// Map an image pixel to its encoder block: componentwise floor division.
pub fn image_to_block(p: PixelCoord, gs: GridSpec) -> BlockCoord {
    let g = gs.grid_size() as usize;
    BlockCoord {
        x: p.x / g,
        y: p.y / g,
    }
}

/// Top-left pixel of an encoder block. The block covers the half-open pixel
/// range `[origin, origin + grid_size)` in both axes, clipped to the image.
pub fn block_to_image_origin(b: BlockCoord, gs: GridSpec) -> PixelCoord {
    let g = gs.grid_size() as usize;
    PixelCoord {
        x: b.x * g,
        y: b.y * g,
    }
}

/// Class ordering used to resolve blocks containing several classes.
/// Earlier entries win. Never contains the background class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPriority {
    order: Vec<ClassId>,
}

impl ClassPriority {
    /// Builds a priority from an explicit ordering, highest priority first.
    pub fn new(order: Vec<ClassId>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &order {
            if c.is_background() {
                return Err(Error::validation(
                    "priority list cannot contain the background class",
                ));
            }
            if !seen.insert(*c) {
                return Err(Error::validation(format!(
                    "priority list contains class {} twice",
                    c.0
                )));
            }
        }
        Ok(ClassPriority { order })
    }

    /// Orders classes by ascending total instance count, ties broken by
    /// ascending class id. Classes with a zero count sort after all counted
    /// ones by the same rule (count 0 is the smallest count, so they come
    /// first among themselves only when explicitly added via `vocabulary`).
    pub fn from_instance_counts(counts: &BTreeMap<ClassId, usize>) -> Result<Self> {
        let mut entries: Vec<(usize, ClassId)> =
            counts.iter().map(|(c, n)| (*n, *c)).collect();
        entries.sort_by_key(|(n, c)| (*n, *c));
        ClassPriority::new(entries.into_iter().map(|(_, c)| c).collect())
    }

    /// Ranks the classes seen across `maps` by ascending instance count,
    /// ties by ascending id. Classes listed in `vocabulary` but absent from
    /// every map are appended last in ascending id order.
    pub fn derive(
        maps: &[InstanceLabelMap],
        vocabulary: &[ClassId],
    ) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::validation(
                "priority derivation needs at least one label map",
            ));
        }
        let mut counts: BTreeMap<ClassId, usize> = BTreeMap::new();
        for map in maps {
            for class in map.classes().values() {
                *counts.entry(*class).or_insert(0) += 1;
            }
        }
        let mut present: Vec<(usize, ClassId)> =
            counts.iter().map(|(c, n)| (*n, *c)).collect();
        present.sort_by_key(|(n, c)| (*n, *c));
        let mut order: Vec<ClassId> = present.into_iter().map(|(_, c)| c).collect();
        let mut absent: Vec<ClassId> = vocabulary
            .iter()
            .copied()
            .filter(|c| !c.is_background() && !counts.contains_key(c))
            .collect();
        absent.sort();
        absent.dedup();
        order.extend(absent);
        ClassPriority::new(order)
    }

    pub fn order(&self) -> &[ClassId] {
        &self.order
    }

    /// Rank of `class`: lower is higher priority. None when not listed.
    pub fn rank(&self, class: ClassId) -> Option<usize> {
        self.order.iter().position(|c| *c == class)
    }
}

/// Labels every encoder block of `map`. A block is background only when it
/// contains no foreground pixel; otherwise it takes the highest-priority
/// class with at least one pixel inside the block.
pub fn build_class_grid(
    map: &InstanceLabelMap,
    gs: GridSpec,
    priority: &ClassPriority,
) -> Result<ClassGrid> {
    for class in map.present_classes() {
        if priority.rank(class).is_none() {
            return Err(Error::validation(format!(
                "class {} present in the map is missing from the priority list",
                class.0
            )));
        }
    }

    let dims = map.dims();
    let block_dims = gs.block_dims(dims);
    let mut best_rank: Vec<Option<usize>> = vec![None; block_dims.len()];

    for p in dims.iter() {
        let id = map.label(p);
        if id.is_background() {
            continue;
        }
        let class = map.class_of(id).expect("validated at construction");
        let rank = priority.rank(class).expect("checked above");
        let b = image_to_block(p, gs);
        let bi = b.y * block_dims.cols + b.x;
        match best_rank[bi] {
            Some(r) if r <= rank => {}
            _ => best_rank[bi] = Some(rank),
        }
    }

    let labels = best_rank
        .into_iter()
        .map(|r| match r {
            Some(rank) => priority.order()[rank],
            None => ClassId::BACKGROUND,
        })
        .collect();
    ClassGrid::new(block_dims, labels, gs)
}

/// Class of the block containing an instance center of mass (already rounded
/// to a pixel). Background means the detection stays unclassified.
pub fn class_of_instance(cm: PixelCoord, grid: &ClassGrid) -> Result<ClassId> {
    let b = image_to_block(cm, grid.grid());
    if !grid.contains(b) {
        return Err(Error::validation(format!(
            "center of mass ({}, {}) falls outside the annotated grid",
            cm.x, cm.y
        )));
    }
    Ok(grid.label(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::types::InstanceId;
    use crate::types::Dims;

    fn map_from_labels(rows: usize, cols: usize, labels: &[u32], classes: &[(u32, u32)]) -> InstanceLabelMap {
        let dims = Dims::new(rows, cols).unwrap();
        let labels = labels.iter().map(|v| InstanceId(*v)).collect();
        let classes = classes
            .iter()
            .map(|(i, c)| (InstanceId(*i), ClassId(*c)))
            .collect();
        InstanceLabelMap::new(dims, labels, classes).unwrap()
    }

    #[test]
    fn grid_size_examples() {
        assert_eq!(grid_size(4).unwrap(), 16);
        assert_eq!(grid_size(0).unwrap(), 1);
        assert_eq!(grid_size(5).unwrap(), 32);
        assert!(grid_size(17).is_err());
    }

    #[test]
    fn image_to_block_examples() {
        let gs = GridSpec::new(4).unwrap();
        assert_eq!(
            image_to_block(PixelCoord::new(0, 0), gs),
            BlockCoord::new(0, 0)
        );
        assert_eq!(
            image_to_block(PixelCoord::new(17, 31), gs),
            BlockCoord::new(1, 1)
        );
        // Last pixel of a (512, 1024) image maps to the last of 32x64 blocks.
        assert_eq!(
            image_to_block(PixelCoord::new(1023, 511), gs),
            BlockCoord::new(63, 31)
        );
    }

    #[test]
    fn block_origin_examples() {
        let gs = GridSpec::new(4).unwrap();
        assert_eq!(
            block_to_image_origin(BlockCoord::new(0, 0), gs),
            PixelCoord::new(0, 0)
        );
        assert_eq!(
            block_to_image_origin(BlockCoord::new(1, 1), gs),
            PixelCoord::new(16, 16)
        );
        // Block (63, 31) covers x in [1008, 1024), y in [496, 512).
        assert_eq!(
            block_to_image_origin(BlockCoord::new(63, 31), gs),
            PixelCoord::new(1008, 496)
        );
    }

    #[test]
    fn pixel_block_round_trip_all_pixels() {
        let dims = Dims::new(48, 37).unwrap(); // deliberately not multiples of 2^n
        for n in 0..=8 {
            let gs = GridSpec::new(n).unwrap();
            let g = gs.grid_size() as usize;
            for p in dims.iter() {
                let b = image_to_block(p, gs);
                let origin = block_to_image_origin(b, gs);
                assert!(p.x >= origin.x && p.x < origin.x + g);
                assert!(p.y >= origin.y && p.y < origin.y + g);
            }
        }
    }

    #[test]
    fn all_background_map_gives_all_background_grid() {
        let map = InstanceLabelMap::background(Dims::new(32, 32).unwrap());
        let grid = build_class_grid(
            &map,
            GridSpec::new(3).unwrap(),
            &ClassPriority::new(vec![]).unwrap(),
        )
        .unwrap();
        assert!(grid.labels().iter().all(|c| c.is_background()));
        assert_eq!(grid.block_dims(), Dims::new(4, 4).unwrap());
    }

    #[test]
    fn priority_resolves_mixed_block() {
        // One 4x4 image, one block at n=2: pixels of both car (3) and person (1).
        let map = map_from_labels(
            4,
            4,
            &[
                1, 1, 0, 0, //
                1, 1, 0, 0, //
                0, 0, 2, 2, //
                0, 0, 2, 2,
            ],
            &[(1, 3), (2, 1)],
        );
        let priority = ClassPriority::new(vec![ClassId(1), ClassId(3)]).unwrap();
        let grid = build_class_grid(&map, GridSpec::new(2).unwrap(), &priority).unwrap();
        assert_eq!(grid.label(BlockCoord::new(0, 0)), ClassId(1)); // person wins
    }

    #[test]
    fn single_instance_single_block() {
        let map = map_from_labels(
            8,
            8,
            &{
                let mut v = vec![0u32; 64];
                v[9] = 1; // (1,1)
                v[10] = 1; // (2,1)
                v
            },
            &[(1, 2)],
        );
        let priority = ClassPriority::new(vec![ClassId(2)]).unwrap();
        let grid = build_class_grid(&map, GridSpec::new(2).unwrap(), &priority).unwrap();
        let fg: Vec<_> = grid
            .labels()
            .iter()
            .filter(|c| !c.is_background())
            .collect();
        assert_eq!(fg.len(), 1);
        assert_eq!(grid.label(BlockCoord::new(0, 0)), ClassId(2));
    }

    #[test]
    fn instance_spanning_four_blocks() {
        // One instance crossing the corner shared by blocks (0,0)..(1,1).
        let mut labels = vec![0u32; 64 * 64];
        for y in 12..20 {
            for x in 12..20 {
                labels[y * 64 + x] = 1;
            }
        }
        let map = map_from_labels(64, 64, &labels, &[(1, 2)]);
        let priority = ClassPriority::new(vec![ClassId(2)]).unwrap();
        let grid = build_class_grid(&map, GridSpec::new(4).unwrap(), &priority).unwrap();
        let fg = grid.labels().iter().filter(|c| !c.is_background()).count();
        assert_eq!(fg, 4);
        for b in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            assert_eq!(grid.label(BlockCoord::new(b.0, b.1)), ClassId(2));
        }
    }

    #[test]
    fn missing_priority_class_is_rejected() {
        let map = map_from_labels(1, 1, &[1], &[(1, 5)]);
        let priority = ClassPriority::new(vec![ClassId(1)]).unwrap();
        assert!(build_class_grid(&map, GridSpec::new(0).unwrap(), &priority).is_err());
    }

    #[test]
    fn derive_priority_ascending_counts_and_ties() {
        // 10 car (id 3) instances on one row, 3 person (id 1) on another.
        let mut labels = vec![0u32; 64];
        let mut classes = Vec::new();
        for i in 0..10 {
            labels[i] = (i + 1) as u32;
            classes.push(((i + 1) as u32, 3));
        }
        for i in 0..3 {
            labels[16 + i] = (20 + i) as u32;
            classes.push(((20 + i) as u32, 1));
        }
        let map = map_from_labels(8, 8, &labels, &classes);
        let pr = ClassPriority::derive(&[map], &[]).unwrap();
        assert_eq!(pr.order(), &[ClassId(1), ClassId(3)]);

        // Tie on count: lower id first.
        let tied = map_from_labels(1, 2, &[1, 2], &[(1, 3), (2, 1)]);
        let pr = ClassPriority::derive(&[tied], &[]).unwrap();
        assert_eq!(pr.order(), &[ClassId(1), ClassId(3)]);
    }

    #[test]
    fn derive_priority_appends_absent_vocabulary() {
        let map = map_from_labels(1, 1, &[1], &[(1, 2)]);
        let pr = ClassPriority::derive(&[map], &[ClassId(5), ClassId(4)]).unwrap();
        assert_eq!(pr.order(), &[ClassId(2), ClassId(4), ClassId(5)]);
    }

    #[test]
    fn class_lookup_examples() {
        let gs = GridSpec::new(4).unwrap();
        let block_dims = Dims::new(2, 2).unwrap();
        let labels = vec![
            ClassId::BACKGROUND,
            ClassId(2),
            ClassId(2),
            ClassId(3), // block (1,1) = car
        ];
        let grid = ClassGrid::new(block_dims, labels, gs).unwrap();
        assert_eq!(
            class_of_instance(PixelCoord::new(20, 20), &grid).unwrap(),
            ClassId(3)
        );
        assert_eq!(
            class_of_instance(PixelCoord::new(0, 0), &grid).unwrap(),
            ClassId::BACKGROUND
        );
        // Adjacent pixels across a block boundary may differ.
        let a = class_of_instance(PixelCoord::new(15, 15), &grid).unwrap();
        let b = class_of_instance(PixelCoord::new(16, 16), &grid).unwrap();
        assert_eq!(a, ClassId::BACKGROUND);
        assert_eq!(b, ClassId(3));
        // Outside the grid -> error.
        assert!(class_of_instance(PixelCoord::new(500, 500), &grid).is_err());
    }
}
