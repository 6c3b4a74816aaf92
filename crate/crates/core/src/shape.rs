//! Digit shapes: occupancy masks of tile assemblies plus their class label.
//!
//! Three fixed catalogs are provided: the 4×5 training digits, 3×4 scaled-down
//! variants of the digits that survive shrinking, and hand-drawn 6×7 variants.
//! Masks use `#` for an active tile and `.` for an empty grid position.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 10;

/// A connected assembly of tiles on a rectangular grid, labelled with the digit it depicts.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ShapeGrid {
    width: usize,
    height: usize,
    mask: Vec<bool>,
    label: u8,
}

impl ShapeGrid {
    /// Builds a shape from a row-major mask, checking every invariant.
    pub fn new(width: usize, height: usize, mask: Vec<bool>, label: u8) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Format("grid must be at least 1×1".into()));
        }
        if mask.len() != width * height {
            return Err(Error::Format(format!(
                "mask has {} entries, expected {}×{}",
                mask.len(),
                width,
                height
            )));
        }
        if usize::from(label) >= NUM_CLASSES {
            return Err(Error::Validity(format!("label {label} outside 0..=9")));
        }
        let shape = ShapeGrid {
            width,
            height,
            mask,
            label,
        };
        let active = shape.active_count();
        if active == 0 {
            return Err(Error::Validity("shape has no active cells".into()));
        }
        if shape.connected_size() != active {
            return Err(Error::Validity(
                "active cells are not a single 4-connected component".into(),
            ));
        }
        Ok(shape)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_active(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.mask[y * self.width + x]
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Active positions as `(x, y)` in row-major order.
    pub fn active_cells(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .filter(|&(x, y)| self.is_active(x, y))
            .collect()
    }

    /// Same mask under a different label.
    pub fn with_label(&self, label: u8) -> Result<Self> {
        ShapeGrid::new(self.width, self.height, self.mask.clone(), label)
    }

    fn connected_size(&self) -> usize {
        let Some(start) = self.mask.iter().position(|&m| m) else {
            return 0;
        };
        let mut seen = vec![false; self.mask.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 0;
        while let Some(idx) = queue.pop_front() {
            count += 1;
            let (x, y) = (idx % self.width, idx / self.width);
            let mut visit = |nx: usize, ny: usize| {
                let n = ny * self.width + nx;
                if self.mask[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            };
            if y > 0 {
                visit(x, y - 1);
            }
            if x + 1 < self.width {
                visit(x + 1, y);
            }
            if y + 1 < self.height {
                visit(x, y + 1);
            }
            if x > 0 {
                visit(x - 1, y);
            }
        }
        count
    }
}

impl fmt::Debug for ShapeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ShapeGrid(label={}, {}×{})", self.label, self.width, self.height)?;
        f.write_str(&render_shape(self))
    }
}

/// Parses a `#`/`.` mask. A single trailing newline is accepted.
pub fn parse_shape(text: &str, label: u8) -> Result<ShapeGrid> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let lines: Vec<&str> = body.split('\n').map(|l| l.trim_end_matches('\r')).collect();
    let width = lines[0].chars().count();
    if width == 0 {
        return Err(Error::Format("empty shape text".into()));
    }
    let mut mask = Vec::with_capacity(width * lines.len());
    for (row, line) in lines.iter().enumerate() {
        if line.chars().count() != width {
            return Err(Error::Format(format!(
                "line {} has length {}, expected {}",
                row + 1,
                line.chars().count(),
                width
            )));
        }
        for ch in line.chars() {
            match ch {
                '#' => mask.push(true),
                '.' => mask.push(false),
                other => {
                    return Err(Error::Format(format!(
                        "unexpected glyph {other:?} on line {}",
                        row + 1
                    )))
                }
            }
        }
    }
    ShapeGrid::new(width, lines.len(), mask, label)
}

/// Renders the mask as `#`/`.` lines joined by `\n`, without a trailing newline.
pub fn render_shape(shape: &ShapeGrid) -> String {
    let mut out = String::with_capacity((shape.width + 1) * shape.height);
    for y in 0..shape.height {
        if y > 0 {
            out.push('\n');
        }
        for x in 0..shape.width {
            out.push(if shape.is_active(x, y) { '#' } else { '.' });
        }
    }
    out
}

/// Parses the on-disk shape format: a `label <digit>` line followed by the mask.
pub fn parse_shape_file(text: &str) -> Result<ShapeGrid> {
    let (header, body) = text
        .split_once('\n')
        .ok_or_else(|| Error::Format("shape file needs a label line and a mask".into()))?;
    let label = header
        .trim_end_matches('\r')
        .strip_prefix("label ")
        .and_then(|d| d.trim().parse::<u8>().ok())
        .ok_or_else(|| Error::Format(format!("bad header line {header:?}, expected `label <digit>`")))?;
    parse_shape(body, label)
}

pub fn render_shape_file(shape: &ShapeGrid) -> String {
    format!("label {}\n{}\n", shape.label, render_shape(shape))
}

pub fn load_shape(path: impl AsRef<Path>) -> Result<ShapeGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_shape_file(&text)
}

pub fn save_shape(shape: &ShapeGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_shape_file(shape)).map_err(|e| Error::io(path, e))
}

// Seven-segment style digits on a 4-wide, 5-high grid.
const CANONICAL: [&str; 10] = [
    "####\n#..#\n#..#\n#..#\n####",
    "...#\n...#\n...#\n...#\n...#",
    "####\n...#\n####\n#...\n####",
    "####\n...#\n####\n...#\n####",
    "#..#\n#..#\n####\n...#\n...#",
    "####\n#...\n####\n...#\n####",
    "####\n#...\n####\n#..#\n####",
    "####\n...#\n...#\n...#\n...#",
    "####\n#..#\n####\n#..#\n####",
    "####\n#..#\n####\n...#\n####",
];

// 3×4 versions; only these digits keep their topology when shrunk.
const SCALED_DOWN: [(u8, &str); 5] = [
    (0, "###\n#.#\n#.#\n###"),
    (1, "..#\n..#\n..#\n..#"),
    (4, "#.#\n###\n..#\n..#"),
    (7, "###\n..#\n..#\n..#"),
    (8, "###\n#.#\n###\n###"),
];

// 6×7 versions with single-tile strokes and longer segments.
const SCALED_UP: [&str; 10] = [
    "######\n#....#\n#....#\n#....#\n#....#\n#....#\n######",
    ".....#\n.....#\n.....#\n.....#\n.....#\n.....#\n.....#",
    "######\n.....#\n.....#\n######\n#.....\n#.....\n######",
    "######\n.....#\n.....#\n######\n.....#\n.....#\n######",
    "#....#\n#....#\n#....#\n######\n.....#\n.....#\n.....#",
    "######\n#.....\n#.....\n######\n.....#\n.....#\n######",
    "######\n#.....\n#.....\n######\n#....#\n#....#\n######",
    "######\n.....#\n.....#\n.....#\n.....#\n.....#\n.....#",
    "######\n#....#\n#....#\n######\n#....#\n#....#\n######",
    "######\n#....#\n#....#\n######\n.....#\n.....#\n######",
];

fn build(label: u8, text: &str) -> ShapeGrid {
    parse_shape(text, label).expect("catalog bitmaps are valid")
}

/// The ten 4×5 training digits, indexed by label.
pub fn canonical_shapes() -> Vec<ShapeGrid> {
    CANONICAL
        .iter()
        .zip(0u8..)
        .map(|(text, label)| build(label, text))
        .collect()
}

/// 3×4 digits 0, 1, 4, 7 and 8.
pub fn scaled_down_shapes() -> Vec<ShapeGrid> {
    SCALED_DOWN
        .iter()
        .map(|&(label, text)| build(label, text))
        .collect()
}

/// The ten digits redrawn on a 6×7 grid, indexed by label.
pub fn scaled_up_shapes() -> Vec<ShapeGrid> {
    SCALED_UP
        .iter()
        .zip(0u8..)
        .map(|(text, label)| build(label, text))
        .collect()
}

/// Which built-in catalog a shape comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Catalog {
    Canonical,
    ScaledDown,
    ScaledUp,
}

impl Catalog {
    pub fn shapes(self) -> Vec<ShapeGrid> {
        match self {
            Catalog::Canonical => canonical_shapes(),
            Catalog::ScaledDown => scaled_down_shapes(),
            Catalog::ScaledUp => scaled_up_shapes(),
        }
    }

    /// Prefix used in `<prefix>:<digit>` shape references.
    pub fn prefix(self) -> &'static str {
        match self {
            Catalog::Canonical => "canonical",
            Catalog::ScaledDown => "down",
            Catalog::ScaledUp => "up",
        }
    }

    /// Experiment name of the catalog.
    pub fn name(self) -> &'static str {
        match self {
            Catalog::Canonical => "canonical",
            Catalog::ScaledDown => "scaled_down",
            Catalog::ScaledUp => "scaled_up",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Catalog::Canonical, Catalog::ScaledDown, Catalog::ScaledUp]
            .into_iter()
            .find(|c| c.name() == name || c.prefix() == name)
    }

    pub fn get(self, label: u8) -> Option<ShapeGrid> {
        self.shapes().into_iter().find(|s| s.label() == label)
    }
}

/// Every `<prefix>:<digit>` reference the catalogs answer to.
pub fn catalog_refs() -> Vec<String> {
    [Catalog::Canonical, Catalog::ScaledDown, Catalog::ScaledUp]
        .into_iter()
        .flat_map(|c| {
            c.shapes()
                .into_iter()
                .map(move |s| format!("{}:{}", c.prefix(), s.label()))
        })
        .collect()
}

/// Resolves a `canonical:4` / `down:7` / `up:1` style reference.
pub fn lookup_catalog_ref(reference: &str) -> Option<ShapeGrid> {
    let (prefix, digit) = reference.split_once(':')?;
    let catalog = [Catalog::Canonical, Catalog::ScaledDown, Catalog::ScaledUp]
        .into_iter()
        .find(|c| c.prefix() == prefix)?;
    catalog.get(digit.parse().ok()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_catalog_is_complete() {
        let shapes = canonical_shapes();
        assert_eq!(shapes.len(), 10);
        for (i, s) in shapes.iter().enumerate() {
            assert_eq!(usize::from(s.label()), i);
            assert_eq!((s.width(), s.height()), (4, 5));
        }
    }

    #[test]
    fn one_has_fewest_cells() {
        let counts: Vec<usize> = canonical_shapes().iter().map(|s| s.active_count()).collect();
        // Exhaustive count over the committed bitmaps.
        assert_eq!(counts, vec![14, 5, 14, 14, 10, 14, 15, 8, 16, 15]);
        let min = *counts.iter().min().unwrap();
        assert_eq!(counts.iter().filter(|&&c| c == min).count(), 1);
        assert_eq!(counts[1], min);
    }

    #[test]
    fn scaled_down_catalog() {
        let shapes = scaled_down_shapes();
        let labels: Vec<u8> = shapes.iter().map(|s| s.label()).collect();
        assert_eq!(labels, vec![0, 1, 4, 7, 8]);
        for s in &shapes {
            assert!(s.width() <= 3 && s.height() <= 4);
        }
        for missing in [2, 3, 5, 6, 9] {
            assert!(Catalog::ScaledDown.get(missing).is_none());
        }
        // 0 and 8 keep an enclosed hole.
        for label in [0, 8] {
            let s = Catalog::ScaledDown.get(label).unwrap();
            assert!(!s.is_active(1, 1));
        }
    }

    #[test]
    fn scaled_up_catalog_grows_every_digit() {
        let up = scaled_up_shapes();
        let base = canonical_shapes();
        assert_eq!(up.len(), 10);
        for (u, b) in up.iter().zip(&base) {
            assert_eq!(u.label(), b.label());
            assert!(u.width() <= 6 && u.height() <= 7);
            assert!(u.active_count() > b.active_count(), "digit {}", u.label());
        }
    }

    #[test]
    fn catalogs_are_stable() {
        assert_eq!(canonical_shapes(), canonical_shapes());
        assert_eq!(render_shape(&canonical_shapes()[4]), "#..#\n#..#\n####\n...#\n...#");
    }

    #[test]
    fn parse_vertical_bar() {
        let s = parse_shape("#\n#\n#", 1).unwrap();
        assert_eq!((s.width(), s.height(), s.active_count()), (1, 3, 3));
    }

    #[test]
    fn diagonal_cells_are_disconnected() {
        assert!(matches!(parse_shape("#.\n.#", 0), Err(Error::Validity(_))));
    }

    #[test]
    fn foreign_glyph_and_ragged_lines() {
        assert!(matches!(parse_shape("##\n#x", 0), Err(Error::Format(_))));
        assert!(matches!(parse_shape("##\n#", 0), Err(Error::Format(_))));
        assert!(matches!(parse_shape("..\n..", 0), Err(Error::Validity(_))));
        assert!(matches!(parse_shape("#", 10), Err(Error::Validity(_))));
    }

    #[test]
    fn shape_file_round_trip() {
        for s in canonical_shapes() {
            let text = render_shape_file(&s);
            assert!(text.starts_with(&format!("label {}\n", s.label())));
            assert!(text.ends_with('\n'));
            assert_eq!(parse_shape_file(&text).unwrap(), s);
        }
        assert!(parse_shape_file("lbl 3\n#").is_err());
    }

    #[test]
    fn catalog_refs_resolve() {
        assert_eq!(lookup_catalog_ref("canonical:4"), Some(canonical_shapes()[4].clone()));
        assert_eq!(lookup_catalog_ref("down:7").unwrap().width(), 3);
        assert!(lookup_catalog_ref("down:2").is_none());
        assert!(lookup_catalog_ref("missing:99").is_none());
        assert_eq!(catalog_refs().len(), 25);
    }
}
