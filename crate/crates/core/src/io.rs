//! On-disk exchange formats. All text formats are UTF-8 with LF endings and
//! a canonical writer, so write(read(file)) reproduces canonical files
//! byte for byte.
//!
//! - label maps: `ILM v1 <rows> <cols> <K>` header, K `inst <id> class <cid>`
//!   lines (ascending id), then the pixel rows;
//! - vector fields: binary, magic `DCMEVF1\0`, little-endian u32 rows/cols,
//!   then row-major f32 dx and dy planes;
//! - class grids: `CG v1 <brows> <bcols> <Gs>` then the block rows;
//! - detections: one `det <class> <score> <cm_x> <cm_y> <rle...>` line each,
//!   with the mask run-length encoded as `start:len` pairs over row-major
//!   pixel indices;
//! - reports: fixed-width tables (AP or accuracy), one value row per class
//!   plus a closing mean/total row.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::codec::{CenterOfMass, Detection};
use crate::error::{Error, Result};
use crate::eval::{AccuracyReport, ClassAccuracy, ClassEval, EvalReport};
use crate::types::{
    ClassGrid, ClassId, Dims, GridSpec, InstanceId, InstanceLabelMap, PixelSet,
    VectorField,
};

/// Display names for the canonical class ids (1..=8, urban-scene order).
const CLASS_NAMES: [&str; 8] = [
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
];

pub fn class_name(class: ClassId) -> String {
    match class.0 {
        0 => "background".to_string(),
        id @ 1..=8 => CLASS_NAMES[id as usize - 1].to_string(),
        id => format!("class{id}"),
    }
}

pub fn class_from_name(name: &str) -> Option<ClassId> {
    if name == "background" {
        return Some(ClassId(0));
    }
    if let Some(pos) = CLASS_NAMES.iter().position(|n| *n == name) {
        return Some(ClassId(pos as u32 + 1));
    }
    name.strip_prefix("class")
        .and_then(|rest| rest.parse::<u32>().ok())
        .map(ClassId)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Instance label maps
// ---------------------------------------------------------------------------

pub fn write_label_map(path: &Path, map: &InstanceLabelMap) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    let io_err = |e| Error::io(path, e);
    let dims = map.dims();
    writeln!(
        w,
        "ILM v1 {} {} {}",
        dims.rows,
        dims.cols,
        map.classes().len()
    )
    .map_err(io_err)?;
    for (id, class) in map.classes() {
        writeln!(w, "inst {} class {}", id.0, class.0).map_err(io_err)?;
    }
    for y in 0..dims.rows {
        let row = &map.labels()[y * dims.cols..(y + 1) * dims.cols];
        let line = row
            .iter()
            .map(|id| id.0.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_label_map(path: &Path) -> Result<InstanceLabelMap> {
    let reader = BufReader::new(open(path)?);
    let mut lines = reader.lines().enumerate();
    let mut next_line = |ctx: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(line))) => Ok((i + 1, line)),
            Some((i, Err(e))) => Err(Error::format(path, i + 1, e.to_string())),
            None => Err(Error::format(path, 0, format!("unexpected end of file, expected {ctx}"))),
        }
    };

    let (lno, header) = next_line("ILM header")?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != "ILM" || parts[1] != "v1" {
        return Err(Error::format(path, lno, "expected 'ILM v1 <rows> <cols> <K>'"));
    }
    let rows: usize = parse_field(path, lno, parts[2], "rows")?;
    let cols: usize = parse_field(path, lno, parts[3], "cols")?;
    let k: usize = parse_field(path, lno, parts[4], "instance count")?;
    let dims = Dims::new(rows, cols).map_err(|e| Error::format(path, lno, e.to_string()))?;

    let mut classes = BTreeMap::new();
    for _ in 0..k {
        let (lno, line) = next_line("an 'inst' line")?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "inst" || parts[2] != "class" {
            return Err(Error::format(path, lno, "expected 'inst <id> class <cid>'"));
        }
        let id = InstanceId(parse_field(path, lno, parts[1], "instance id")?);
        let class = ClassId(parse_field(path, lno, parts[3], "class id")?);
        if classes.insert(id, class).is_some() {
            return Err(Error::format(
                path,
                lno,
                format!("instance {} declared twice", id.0),
            ));
        }
    }

    let mut labels = Vec::with_capacity(dims.len());
    for _ in 0..rows {
        let (lno, line) = next_line("a pixel row")?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            labels.push(InstanceId(parse_field(path, lno, tok, "instance id")?));
            count += 1;
        }
        if count != cols {
            return Err(Error::format(
                path,
                lno,
                format!("expected {cols} labels in this row, found {count}"),
            ));
        }
    }
    InstanceLabelMap::new(dims, labels, classes)
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    token: &str,
    what: &str,
) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::format(path, line, format!("invalid {what} '{token}'")))
}

// ---------------------------------------------------------------------------
// Vector fields (binary)
// ---------------------------------------------------------------------------

const FIELD_MAGIC: &[u8; 8] = b"DCMEVF1\0";

pub fn write_vector_field(path: &Path, field: &VectorField) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    let io_err = |e| Error::io(path, e);
    let dims = field.dims();
    w.write_all(FIELD_MAGIC).map_err(io_err)?;
    w.write_all(&(dims.rows as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(dims.cols as u32).to_le_bytes()).map_err(io_err)?;
    for plane in [field.dx(), field.dy()] {
        for v in plane {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_vector_field(path: &Path) -> Result<VectorField> {
    let mut r = BufReader::new(open(path)?);
    let io_err = |e| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::format(path, 0, "not a DCMEVF1 vector field file"));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4).map_err(io_err)?;
    let rows = u32::from_le_bytes(buf4) as usize;
    r.read_exact(&mut buf4).map_err(io_err)?;
    let cols = u32::from_le_bytes(buf4) as usize;
    let dims = Dims::new(rows, cols).map_err(|e| Error::format(path, 0, e.to_string()))?;

    let read_plane = |r: &mut BufReader<std::fs::File>| -> Result<Vec<f32>> {
        let mut bytes = vec![0u8; dims.len() * 4];
        r.read_exact(&mut bytes).map_err(io_err)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    };
    let dx = read_plane(&mut r)?;
    let dy = read_plane(&mut r)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(io_err)? != 0 {
        return Err(Error::format(path, 0, "trailing bytes after field data"));
    }
    VectorField::new(dims, dx, dy)
}

// ---------------------------------------------------------------------------
// Class grids
// ---------------------------------------------------------------------------

pub fn write_class_grid(path: &Path, grid: &ClassGrid) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    let io_err = |e| Error::io(path, e);
    let bd = grid.block_dims();
    writeln!(w, "CG v1 {} {} {}", bd.rows, bd.cols, grid.grid().grid_size()).map_err(io_err)?;
    for y in 0..bd.rows {
        let row = &grid.labels()[y * bd.cols..(y + 1) * bd.cols];
        let line = row
            .iter()
            .map(|c| c.0.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_class_grid(path: &Path) -> Result<ClassGrid> {
    let reader = BufReader::new(open(path)?);
    let mut lines = reader.lines().enumerate();
    let (lno, header) = match lines.next() {
        Some((i, Ok(line))) => (i + 1, line),
        Some((i, Err(e))) => return Err(Error::format(path, i + 1, e.to_string())),
        None => return Err(Error::format(path, 0, "empty class grid file")),
    };
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != "CG" || parts[1] != "v1" {
        return Err(Error::format(path, lno, "expected 'CG v1 <brows> <bcols> <Gs>'"));
    }
    let brows: usize = parse_field(path, lno, parts[2], "block rows")?;
    let bcols: usize = parse_field(path, lno, parts[3], "block cols")?;
    let gs: u32 = parse_field(path, lno, parts[4], "grid size")?;
    let block_dims = Dims::new(brows, bcols).map_err(|e| Error::format(path, lno, e.to_string()))?;
    let grid_spec = GridSpec::from_grid_size(gs).map_err(|e| Error::format(path, lno, e.to_string()))?;

    let mut labels = Vec::with_capacity(block_dims.len());
    for (i, line) in lines {
        let lno = i + 1;
        let line = line.map_err(|e| Error::format(path, lno, e.to_string()))?;
        for tok in line.split_whitespace() {
            labels.push(ClassId(parse_field(path, lno, tok, "class id")?));
        }
    }
    if labels.len() != block_dims.len() {
        return Err(Error::format(
            path,
            0,
            format!(
                "class grid has {} labels, header promises {}",
                labels.len(),
                block_dims.len()
            ),
        ));
    }
    ClassGrid::new(block_dims, labels, grid_spec)
}

// ---------------------------------------------------------------------------
// Detections
// ---------------------------------------------------------------------------

/// Run-length encode a mask over row-major pixel indices as `start:len` pairs.
fn rle_encode(mask: &PixelSet, dims: Dims) -> String {
    let mut parts = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for p in mask.iter() {
        let idx = dims.index(p);
        match run {
            Some((start, len)) if start + len == idx => run = Some((start, len + 1)),
            Some((start, len)) => {
                parts.push(format!("{start}:{len}"));
                run = Some((idx, 1));
            }
            None => run = Some((idx, 1)),
        }
    }
    if let Some((start, len)) = run {
        parts.push(format!("{start}:{len}"));
    }
    parts.join(" ")
}

pub fn write_detections(path: &Path, detections: &[Detection], dims: Dims) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    let io_err = |e| Error::io(path, e);
    for det in detections {
        writeln!(
            w,
            "det {} {:.6} {} {} {}",
            det.class.0,
            det.score,
            det.center.x,
            det.center.y,
            rle_encode(&det.mask, dims)
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Read a detections file. The run-length encoding stores linear pixel
/// indices, so the image dimensions must be supplied by the caller (usually
/// from the ground-truth or field file evaluated against).
pub fn read_detections(path: &Path, dims: Dims) -> Result<Vec<Detection>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lno = i + 1;
        let line = line.map_err(|e| Error::format(path, lno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        if toks.next() != Some("det") {
            return Err(Error::format(path, lno, "expected a 'det' line"));
        }
        let class = ClassId(parse_field(
            path,
            lno,
            toks.next().unwrap_or(""),
            "class id",
        )?);
        let score: f64 = parse_field(path, lno, toks.next().unwrap_or(""), "score")?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::format(path, lno, format!("score {score} outside [0, 1]")));
        }
        let cm_x: f64 = parse_field(path, lno, toks.next().unwrap_or(""), "center x")?;
        let cm_y: f64 = parse_field(path, lno, toks.next().unwrap_or(""), "center y")?;
        let mut pixels = Vec::new();
        for pair in toks {
            let (start, len) = pair
                .split_once(':')
                .ok_or_else(|| Error::format(path, lno, format!("invalid run '{pair}'")))?;
            let start: usize = parse_field(path, lno, start, "run start")?;
            let len: usize = parse_field(path, lno, len, "run length")?;
            if len == 0 || start + len > dims.len() {
                return Err(Error::format(
                    path,
                    lno,
                    format!("run {start}:{len} leaves the {}x{} image", dims.rows, dims.cols),
                ));
            }
            for idx in start..start + len {
                pixels.push(dims.coord(idx));
            }
        }
        if pixels.is_empty() {
            return Err(Error::format(path, lno, "detection with an empty mask"));
        }
        out.push(Detection {
            mask: PixelSet::from_pixels(pixels),
            center: CenterOfMass { x: cm_x, y: cm_y },
            score,
            class,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Either table a report file can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum ReportFile {
    Eval(EvalReport),
    Accuracy(AccuracyReport),
}

pub fn format_eval_report(report: &EvalReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("{:<12} {:>7} {:>8}\n", "Class", "AP", "AP50%"));
    for (class, eval) in &report.per_class {
        s.push_str(&format!(
            "{:<12} {:>7.1} {:>8.1}\n",
            class_name(*class),
            eval.ap,
            eval.ap50
        ));
    }
    s.push_str(&format!(
        "{:<12} {:>7.1} {:>8.1}\n",
        "mean", report.mean_ap, report.mean_ap50
    ));
    s
}

pub fn format_accuracy_report(report: &AccuracyReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:<12} {:>9} {:>8} {:>7}\n",
        "Class", "Instances", "Correct", "Acc%"
    ));
    for (class, acc) in &report.per_class {
        s.push_str(&format!(
            "{:<12} {:>9} {:>8} {:>7.2}\n",
            class_name(*class),
            acc.instances,
            acc.correct,
            acc.percent()
        ));
    }
    s.push_str(&format!(
        "{:<12} {:>9} {:>8} {:>7.2}\n",
        "total",
        report.total_instances(),
        report.total_correct(),
        report.total_accuracy()
    ));
    s
}

pub fn write_report(path: &Path, report: &ReportFile) -> Result<()> {
    let text = match report {
        ReportFile::Eval(r) => format_eval_report(r),
        ReportFile::Accuracy(r) => format_accuracy_report(r),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<ReportFile> {
    let reader = BufReader::new(open(path)?);
    let mut lines = reader.lines().enumerate();
    let (lno, header) = match lines.next() {
        Some((i, Ok(line))) => (i + 1, line),
        Some((i, Err(e))) => return Err(Error::format(path, i + 1, e.to_string())),
        None => return Err(Error::format(path, 0, "empty report file")),
    };
    let head: Vec<&str> = header.split_whitespace().collect();
    match head.as_slice() {
        ["Class", "AP", "AP50%"] => {
            let mut per_class = BTreeMap::new();
            let mut mean: Option<(f64, f64)> = None;
            for (i, line) in lines {
                let lno = i + 1;
                let line = line.map_err(|e| Error::format(path, lno, e.to_string()))?;
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(Error::format(path, lno, "expected '<class> <ap> <ap50>'"));
                }
                let ap: f64 = parse_field(path, lno, parts[1], "AP")?;
                let ap50: f64 = parse_field(path, lno, parts[2], "AP50")?;
                if parts[0] == "mean" {
                    mean = Some((ap, ap50));
                } else {
                    let class = class_from_name(parts[0]).ok_or_else(|| {
                        Error::format(path, lno, format!("unknown class '{}'", parts[0]))
                    })?;
                    per_class.insert(
                        class,
                        ClassEval {
                            ap,
                            ap50,
                            gt_count: 0,
                        },
                    );
                }
            }
            let (mean_ap, mean_ap50) = mean
                .ok_or_else(|| Error::format(path, 0, "report is missing its mean row"))?;
            Ok(ReportFile::Eval(EvalReport {
                per_class,
                mean_ap,
                mean_ap50,
            }))
        }
        ["Class", "Instances", "Correct", "Acc%"] => {
            let mut per_class = BTreeMap::new();
            for (i, line) in lines {
                let lno = i + 1;
                let line = line.map_err(|e| Error::format(path, lno, e.to_string()))?;
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 {
                    return Err(Error::format(
                        path,
                        lno,
                        "expected '<class> <instances> <correct> <acc>'",
                    ));
                }
                if parts[0] == "total" {
                    continue; // derived row
                }
                let class = class_from_name(parts[0]).ok_or_else(|| {
                    Error::format(path, lno, format!("unknown class '{}'", parts[0]))
                })?;
                per_class.insert(
                    class,
                    ClassAccuracy {
                        instances: parse_field(path, lno, parts[1], "instance count")?,
                        correct: parse_field(path, lno, parts[2], "correct count")?,
                    },
                );
            }
            Ok(ReportFile::Accuracy(AccuracyReport { per_class }))
        }
        _ => Err(Error::format(path, lno, "unrecognized report header")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode;
    use crate::eval::{evaluate, ApThresholds};
    use crate::grid::{build_class_grid, ClassPriority};
    use crate::synth::{generate, SceneSpec};

    fn scene(seed: u64) -> InstanceLabelMap {
        let spec = SceneSpec {
            n_instances: 6,
            classes: vec![ClassId(1), ClassId(3), ClassId(8)],
            min_cm_separation: 10.0,
            ..SceneSpec::new(Dims::new(48, 64).unwrap(), 6, seed)
        };
        generate(&spec).unwrap()
    }

    #[test]
    fn label_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.ilm");
        let map = scene(5);
        write_label_map(&path, &map).unwrap();
        let back = read_label_map(&path).unwrap();
        assert_eq!(map, back);
        // Byte identity of the canonical form.
        let bytes = std::fs::read(&path).unwrap();
        write_label_map(&path, &back).unwrap();
        assert_eq!(bytes, std::fs::read(&path).unwrap());
    }

    #[test]
    fn vector_field_round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.dcme");
        let field = encode(&scene(6));
        write_vector_field(&path, &field).unwrap();
        let back = read_vector_field(&path).unwrap();
        assert_eq!(field, back);
        let bytes = std::fs::read(&path).unwrap();
        write_vector_field(&path, &back).unwrap();
        assert_eq!(bytes, std::fs::read(&path).unwrap());
    }

    #[test]
    fn vector_field_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.dcme");
        std::fs::write(&path, b"NOTAFIELDxxxxxxxxxxxxxxxx").unwrap();
        assert!(read_vector_field(&path).is_err());
    }

    #[test]
    fn class_grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.cg");
        let map = scene(7);
        let priority = ClassPriority::derive(std::slice::from_ref(&map), &[]).unwrap();
        let grid = build_class_grid(&map, GridSpec::new(3).unwrap(), &priority).unwrap();
        write_class_grid(&path, &grid).unwrap();
        let back = read_class_grid(&path).unwrap();
        assert_eq!(grid, back);
    }

    #[test]
    fn detections_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dets.txt");
        let map = scene(8);
        let dets: Vec<Detection> = map
            .instance_pixels()
            .into_iter()
            .map(|(id, mask)| Detection {
                center: CenterOfMass::of_pixels(&mask).unwrap(),
                mask,
                score: 0.875,
                class: map.class_of(id).unwrap(),
            })
            .collect();
        write_detections(&path, &dets, map.dims()).unwrap();
        let back = read_detections(&path, map.dims()).unwrap();
        assert_eq!(dets, back);
        let bytes = std::fs::read(&path).unwrap();
        write_detections(&path, &back, map.dims()).unwrap();
        assert_eq!(bytes, std::fs::read(&path).unwrap());
    }

    #[test]
    fn empty_detections_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dets.txt");
        write_detections(&path, &[], Dims::new(4, 4).unwrap()).unwrap();
        assert!(read_detections(&path, Dims::new(4, 4).unwrap())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn eval_report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.txt");
        let map = scene(9);
        let dets: Vec<Detection> = map
            .instance_pixels()
            .into_iter()
            .map(|(id, mask)| Detection {
                center: CenterOfMass::of_pixels(&mask).unwrap(),
                mask,
                score: 1.0,
                class: map.class_of(id).unwrap(),
            })
            .collect();
        let report = evaluate(&dets, &map, &ApThresholds::default()).unwrap();
        write_report(&path, &ReportFile::Eval(report)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let back = read_report(&path).unwrap();
        write_report(&path, &back).unwrap();
        assert_eq!(bytes, std::fs::read(&path).unwrap());
    }

    #[test]
    fn accuracy_report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("acc.txt");
        let report = AccuracyReport {
            per_class: BTreeMap::from([
                (ClassId(1), ClassAccuracy { instances: 3394, correct: 1974 }),
                (ClassId(3), ClassAccuracy { instances: 4653, correct: 3847 }),
                (ClassId(42), ClassAccuracy { instances: 7, correct: 7 }),
            ]),
        };
        write_report(&path, &ReportFile::Accuracy(report.clone())).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(back, ReportFile::Accuracy(report));
        write_report(&path, &back).unwrap();
        assert_eq!(bytes, std::fs::read(&path).unwrap());
    }

    #[test]
    fn class_names_round_trip() {
        for id in [0u32, 1, 5, 8, 9, 42] {
            let name = class_name(ClassId(id));
            assert_eq!(class_from_name(&name), Some(ClassId(id)));
        }
        assert_eq!(class_from_name("car"), Some(ClassId(3)));
        assert_eq!(class_from_name("wat"), None);
    }
}
