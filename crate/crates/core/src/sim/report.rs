use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::shape::ShapeGrid;

/// How a run was executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimMode {
    /// Synchronous full-mask steps.
    Sync,
    /// Random evaluation order sampled with replacement.
    Listing1,
    /// Timer-driven tiles exchanging quantized messages.
    Firmware,
}

impl SimMode {
    pub const ALL: [SimMode; 3] = [SimMode::Sync, SimMode::Listing1, SimMode::Firmware];

    pub fn name(self) -> &'static str {
        match self {
            SimMode::Sync => "sync",
            SimMode::Listing1 => "listing1",
            SimMode::Firmware => "firmware",
        }
    }
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown mode {s:?}, expected sync|listing1|firmware")))
    }
}

/// One tile's status in a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileReport {
    pub update_count: u32,
    /// `None` until the tile has updated at least once.
    pub prediction: Option<u8>,
}

impl TileReport {
    pub const UNREPORTED: TileReport = TileReport {
        update_count: 0,
        prediction: None,
    };
}

/// Every tile's status after update `update` (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub update: usize,
    /// Indexed like the shape's active cells, row-major.
    pub tiles: Vec<TileReport>,
}

/// Per-update classification trace of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub shape: ShapeGrid,
    pub mode: SimMode,
    pub snapshots: Vec<Snapshot>,
}

impl RunReport {
    pub fn label(&self) -> u8 {
        self.shape.label()
    }

    /// First update from which every later snapshot has all tiles predicting the label.
    pub fn convergence_update(&self) -> Option<usize> {
        let label = self.label();
        let correct = |s: &Snapshot| s.tiles.iter().all(|t| t.prediction == Some(label));
        let mut first = None;
        for snap in self.snapshots.iter().rev() {
            if correct(snap) {
                first = Some(snap.update);
            } else {
                break;
            }
        }
        first
    }

    pub fn final_predictions(&self) -> Vec<Option<u8>> {
        self.snapshots
            .last()
            .map(|s| s.tiles.iter().map(|t| t.prediction).collect())
            .unwrap_or_default()
    }

    /// Line-oriented export: `#` header lines, then `update x y prediction|-` records.
    pub fn to_export(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "# label={} mode={} width={} height={}",
            self.label(),
            self.mode,
            self.shape.width(),
            self.shape.height()
        )
        .unwrap();
        let cells = self.shape.active_cells();
        for snap in &self.snapshots {
            for (&(x, y), tile) in cells.iter().zip(&snap.tiles) {
                match tile.prediction {
                    Some(p) => writeln!(out, "{} {x} {y} {p}", snap.update).unwrap(),
                    None => writeln!(out, "{} {x} {y} -", snap.update).unwrap(),
                }
            }
        }
        out
    }

    /// Parses [`RunReport::to_export`] output.
    ///
    /// The export carries predictions only: a reported tile gets the snapshot
    /// index as its update count, an unreported one gets zero.
    pub fn from_export(text: &str) -> Result<RunReport> {
        let mut label = None;
        let mut mode = SimMode::Sync;
        let mut dims = None;
        let mut records: Vec<(usize, usize, usize, Option<u8>)> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let (mut w, mut h) = (None, None);
                for field in header.split_whitespace() {
                    match field.split_once('=') {
                        Some(("label", v)) => label = v.parse::<u8>().ok(),
                        Some(("mode", v)) => mode = v.parse()?,
                        Some(("width", v)) => w = v.parse::<usize>().ok(),
                        Some(("height", v)) => h = v.parse::<usize>().ok(),
                        _ => {}
                    }
                }
                if let (Some(w), Some(h)) = (w, h) {
                    dims = Some((w, h));
                }
                continue;
            }
            let bad = || Error::Format(format!("line {}: expected `update x y prediction|-`", n + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(bad());
            }
            let update = fields[0].parse().map_err(|_| bad())?;
            let x = fields[1].parse().map_err(|_| bad())?;
            let y = fields[2].parse().map_err(|_| bad())?;
            let pred = match fields[3] {
                "-" => None,
                p => Some(p.parse::<u8>().ok().filter(|&d| d < 10).ok_or_else(bad)?),
            };
            records.push((update, x, y, pred));
        }
        let label = label.ok_or_else(|| Error::Format("missing `# label=<d>` header".into()))?;
        let (width, height) = match dims {
            Some(d) => d,
            None => records.iter().fold((0, 0), |(w, h), &(_, x, y, _)| (w.max(x + 1), h.max(y + 1))),
        };
        if width == 0 || height == 0 {
            return Err(Error::Format("report has no records".into()));
        }
        let mut mask = vec![false; width * height];
        for &(_, x, y, _) in &records {
            if x >= width || y >= height {
                return Err(Error::Format(format!("tile ({x}, {y}) outside {width}×{height}")));
            }
            mask[y * width + x] = true;
        }
        let shape = ShapeGrid::new(width, height, mask, label)?;
        let cells = shape.active_cells();

        let mut snapshots: Vec<Snapshot> = Vec::new();
        for (update, x, y, pred) in records {
            if snapshots.last().map(|s| s.update) != Some(update) {
                snapshots.push(Snapshot {
                    update,
                    tiles: vec![TileReport::UNREPORTED; cells.len()],
                });
            }
            let idx = cells.iter().position(|&c| c == (x, y)).expect("mask built from records");
            snapshots.last_mut().unwrap().tiles[idx] = TileReport {
                update_count: if pred.is_some() { update as u32 } else { 0 },
                prediction: pred,
            };
        }
        Ok(RunReport {
            shape,
            mode,
            snapshots,
        })
    }
}

/// One text panel per snapshot: the predicted digit on each reporting tile,
/// `·` on tiles that have not reported yet, a space on empty positions.
pub fn render_trace(report: &RunReport) -> String {
    let mut out = String::new();
    let shape = &report.shape;
    let cells = shape.active_cells();
    for (i, snap) in report.snapshots.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "update {}", snap.update).unwrap();
        for y in 0..shape.height() {
            let mut line = String::new();
            for x in 0..shape.width() {
                let glyph = match cells.iter().position(|&c| c == (x, y)) {
                    None => ' ',
                    Some(idx) => match snap.tiles[idx].prediction {
                        Some(p) => char::from(b'0' + p),
                        None => '·',
                    },
                };
                line.push(glyph);
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
    }
    out
}
