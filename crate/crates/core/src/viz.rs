//! Rendering helpers for magnitude and class maps, plus ingestion of
//! instance-id PNGs in the urban-scene convention (pixel = class*1000 + k).
//!
//! PNG support is feature-gated; the portable anymap writers are always
//! available as the fallback interchange.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::image_to_block;
use crate::types::{ClassGrid, ClassId, Dims};

/// Linear normalization of a magnitude map to 8-bit gray. An all-zero map
/// stays all zero.
pub fn magnitude_to_bytes(mags: &[f64]) -> Vec<u8> {
    let max = mags.iter().copied().fold(0.0f64, f64::max);
    if max == 0.0 {
        return vec![0; mags.len()];
    }
    mags.iter()
        .map(|m| ((m / max) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Fixed render palette; entry 0 is the background. Larger class sets cycle.
const PALETTE: [[u8; 3]; 13] = [
    [0, 0, 0],       // background
    [220, 20, 60],   // red
    [0, 114, 255],   // blue
    [255, 215, 0],   // yellow
    [60, 179, 113],  // green
    [216, 64, 216],  // magenta
    [0, 206, 209],   // cyan
    [255, 140, 0],   // orange
    [138, 43, 226],  // violet
    [154, 205, 50],  // lime
    [244, 164, 96],  // sand
    [70, 130, 180],  // steel
    [240, 128, 128], // coral
];

/// Render a class grid at image resolution by replicating every block label
/// over its pixel range. Returns palette indices per pixel plus the palette.
pub fn class_grid_indices(grid: &ClassGrid, dims: Dims) -> (Vec<u8>, Vec<[u8; 3]>) {
    let mut classes: Vec<ClassId> = grid
        .labels()
        .iter()
        .copied()
        .filter(|c| !c.is_background())
        .collect();
    classes.sort();
    classes.dedup();
    let index_of = |c: ClassId| -> u8 {
        if c.is_background() {
            0
        } else {
            let rank = classes.binary_search(&c).expect("collected above");
            (1 + rank % (PALETTE.len() - 1)) as u8
        }
    };
    let mut indices = Vec::with_capacity(dims.len());
    for p in dims.iter() {
        let label = grid.label(image_to_block(p, grid.grid()));
        indices.push(index_of(label));
    }
    let palette = PALETTE.to_vec();
    (indices, palette)
}

/// Binary PGM (P5), 8-bit grayscale.
pub fn write_pgm(path: &Path, dims: Dims, bytes: &[u8]) -> Result<()> {
    debug_assert_eq!(bytes.len(), dims.len());
    let mut w =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let io_err = |e| Error::io(path, e);
    write!(w, "P5\n{} {}\n255\n", dims.cols, dims.rows).map_err(io_err)?;
    w.write_all(bytes).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Binary PPM (P6) from palette indices.
pub fn write_ppm(path: &Path, dims: Dims, indices: &[u8], palette: &[[u8; 3]]) -> Result<()> {
    debug_assert_eq!(indices.len(), dims.len());
    let mut w =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let io_err = |e| Error::io(path, e);
    write!(w, "P6\n{} {}\n255\n", dims.cols, dims.rows).map_err(io_err)?;
    for i in indices {
        w.write_all(&palette[*i as usize]).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(feature = "png")]
pub use self::png_support::*;

#[cfg(feature = "png")]
mod png_support {
    use std::collections::BTreeMap;
    use std::path::Path;

    use crate::error::{Error, Result};
    use crate::types::{ClassId, Dims, InstanceId, InstanceLabelMap};

    pub fn write_gray_png(path: &Path, dims: Dims, bytes: &[u8]) -> Result<()> {
        debug_assert_eq!(bytes.len(), dims.len());
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(
            std::io::BufWriter::new(file),
            dims.cols as u32,
            dims.rows as u32,
        );
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        writer
            .write_image_data(bytes)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }

    pub fn write_indexed_png(
        path: &Path,
        dims: Dims,
        indices: &[u8],
        palette: &[[u8; 3]],
    ) -> Result<()> {
        debug_assert_eq!(indices.len(), dims.len());
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(
            std::io::BufWriter::new(file),
            dims.cols as u32,
            dims.rows as u32,
        );
        encoder.set_color(png::ColorType::Indexed);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_palette(palette.iter().flatten().copied().collect::<Vec<u8>>());
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        writer
            .write_image_data(indices)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }

    /// Raw urban-scene class ids of the eight evaluated instance classes, in
    /// canonical order (person..bicycle -> 1..8).
    const RAW_INSTANCE_CLASSES: [u16; 8] = [24, 25, 26, 27, 28, 31, 32, 33];

    /// Read a 16-bit instance-id PNG: pixels of instance classes carry
    /// `raw_class * 1000 + k`, everything else is background here. Raw
    /// classes outside the eight evaluated ones are also background.
    pub fn read_instance_id_png(path: &Path) -> Result<InstanceLabelMap> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let decoder = png::Decoder::new(std::io::BufReader::new(file));
        let mut reader = decoder
            .read_info()
            .map_err(|e| Error::format(path, 0, e.to_string()))?;
        let mut buf = vec![0u8; reader.output_buffer_size()];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::format(path, 0, e.to_string()))?;
        if info.bit_depth != png::BitDepth::Sixteen
            || info.color_type != png::ColorType::Grayscale
        {
            return Err(Error::format(
                path,
                0,
                "expected a 16-bit grayscale instance-id PNG",
            ));
        }
        let dims = Dims::new(info.height as usize, info.width as usize)?;
        let data = &buf[..info.buffer_size()];

        let class_of_raw = |raw: u16| -> Option<ClassId> {
            RAW_INSTANCE_CLASSES
                .iter()
                .position(|c| *c == raw)
                .map(|i| ClassId(i as u32 + 1))
        };

        let mut labels = vec![InstanceId::BACKGROUND; dims.len()];
        let mut classes = BTreeMap::new();
        for (i, chunk) in data.chunks_exact(2).enumerate() {
            let v = u16::from_be_bytes([chunk[0], chunk[1]]);
            if v < 1000 {
                continue;
            }
            if let Some(class) = class_of_raw(v / 1000) {
                let id = InstanceId(v as u32);
                labels[i] = id;
                classes.entry(id).or_insert(class);
            }
        }
        InstanceLabelMap::new(dims, labels, classes)
    }
}
