//! Probe geometry and channel metadata.
//!
//! Two 3x5 optode grids, one per hemisphere, yield 22 source-detector
//! channels each at 30 mm separation. Only the handful of channels the
//! montage pins to named 10-20 anchors carry labels; all other positions are
//! grid-relative coordinates (channel midpoints in optode-grid units).

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub const CHANNEL_COUNT: usize = 44;
pub const CHANNELS_PER_GRID: usize = 22;
pub const SEPARATION_MM: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    Left,
    Right,
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::Left => write!(f, "left"),
            Grid::Right => write!(f, "right"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    /// 1-based channel id, 1..=44.
    pub id: usize,
    pub grid: Grid,
    pub source: usize,
    pub detector: usize,
    pub separation_mm: f64,
    /// Channel midpoint in optode-grid units (rows 0..2, cols 0..4).
    pub row: f64,
    pub col: f64,
    /// Nearest 10-20 labels where the montage names them; empty otherwise.
    pub anchors: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ChannelLayout {
    channels: Vec<ChannelRecord>,
}

const BUNDLED_LAYOUT: &str = include_str!("../data/layout.csv");

impl ChannelLayout {
    /// The bundled default montage.
    pub fn bundled() -> ChannelLayout {
        Self::from_csv_str(BUNDLED_LAYOUT, "<bundled layout.csv>")
            .expect("bundled layout must validate")
    }

    pub fn channels(&self) -> &[ChannelRecord] {
        &self.channels
    }

    pub fn channel(&self, id: usize) -> Option<&ChannelRecord> {
        self.channels.iter().find(|c| c.id == id)
    }

    pub fn from_csv_str(text: &str, origin: &str) -> Result<ChannelLayout> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut channels = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::parse(origin, e.to_string()))?;
            let line = i + 2; // header is line 1
            let get = |idx: usize, name: &str| -> Result<&str> {
                record
                    .get(idx)
                    .ok_or_else(|| Error::parse(origin, format!("line {line}: missing {name}")))
            };
            let parse_num = |idx: usize, name: &str| -> Result<f64> {
                get(idx, name)?
                    .parse::<f64>()
                    .map_err(|e| Error::parse(origin, format!("line {line}: {name}: {e}")))
            };
            let grid = match get(1, "grid")? {
                "left" => Grid::Left,
                "right" => Grid::Right,
                other => {
                    return Err(Error::parse(
                        origin,
                        format!("line {line}: unknown grid '{other}'"),
                    ))
                }
            };
            let anchors: Vec<String> = get(7, "anchors")?
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| s.to_string())
                .collect();
            channels.push(ChannelRecord {
                id: parse_num(0, "id")? as usize,
                grid,
                source: parse_num(2, "source")? as usize,
                detector: parse_num(3, "detector")? as usize,
                separation_mm: parse_num(4, "separation_mm")?,
                row: parse_num(5, "row")?,
                col: parse_num(6, "col")?,
                anchors,
            });
        }
        let layout = ChannelLayout { channels };
        layout.validate()?;
        Ok(layout)
    }

    /// Validation is total: every violation is collected before reporting.
    fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.channels.len() != CHANNEL_COUNT {
            violations.push(format!(
                "expected {CHANNEL_COUNT} channels, found {}",
                self.channels.len()
            ));
        }
        let mut seen = BTreeSet::new();
        for ch in &self.channels {
            if !seen.insert(ch.id) {
                violations.push(format!("duplicate channel id {}", ch.id));
            }
            if ch.id == 0 || ch.id > CHANNEL_COUNT {
                violations.push(format!("channel id {} outside 1..={CHANNEL_COUNT}", ch.id));
            }
            if ch.separation_mm != SEPARATION_MM {
                violations.push(format!(
                    "channel {}: separation {} mm, montage requires {SEPARATION_MM} mm",
                    ch.id, ch.separation_mm
                ));
            }
            if ch.source == 0 || ch.detector == 0 {
                violations.push(format!("channel {}: source/detector indices are 1-based", ch.id));
            }
        }
        for grid in [Grid::Left, Grid::Right] {
            let n = self.channels.iter().filter(|c| c.grid == grid).count();
            if n != CHANNELS_PER_GRID {
                violations.push(format!("{grid} grid has {n} channels, expected {CHANNELS_PER_GRID}"));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(violations))
        }
    }
}

pub fn load_layout(path: &Path) -> Result<ChannelLayout> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ChannelLayout::from_csv_str(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_layout_has_44_channels_22_per_grid() {
        let layout = ChannelLayout::bundled();
        assert_eq!(layout.channels().len(), 44);
        for grid in [Grid::Left, Grid::Right] {
            assert_eq!(
                layout.channels().iter().filter(|c| c.grid == grid).count(),
                22
            );
        }
    }

    #[test]
    fn named_anchors_are_present() {
        let layout = ChannelLayout::bundled();
        assert_eq!(layout.channel(5).unwrap().anchors, vec!["CP5", "TP7"]);
        assert_eq!(layout.channel(7).unwrap().anchors, vec!["CP5", "C5"]);
        assert_eq!(layout.channel(2).unwrap().anchors, vec!["CP5"]);
        assert_eq!(layout.channel(20).unwrap().anchors, vec!["F7"]);
        assert_eq!(layout.channel(8).unwrap().anchors, vec!["C3", "C1"]);
    }

    #[test]
    fn missing_channel_fails_validation() {
        let bundled = BUNDLED_LAYOUT;
        let truncated: Vec<&str> = bundled.lines().take(44).collect(); // drops channel 44
        let err = ChannelLayout::from_csv_str(&truncated.join("\n"), "<test>").unwrap_err();
        match err {
            Error::Validation(v) => assert!(v.iter().any(|m| m.contains("43 channels")), "{v:?}"),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn duplicate_ids_and_bad_grid_are_all_reported() {
        let mut lines: Vec<String> = BUNDLED_LAYOUT.lines().map(|l| l.to_string()).collect();
        lines[2] = "1,left,2,1,30,0.0,1.5,".to_string(); // duplicate id 1
        let err = ChannelLayout::from_csv_str(&lines.join("\n"), "<test>").unwrap_err();
        match err {
            Error::Validation(v) => {
                assert!(v.iter().any(|m| m.contains("duplicate channel id 1")), "{v:?}")
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn unknown_grid_is_a_parse_error() {
        let mut lines: Vec<String> = BUNDLED_LAYOUT.lines().map(|l| l.to_string()).collect();
        lines[1] = "1,center,1,1,30,0.0,0.5,".to_string();
        assert!(ChannelLayout::from_csv_str(&lines.join("\n"), "<test>").is_err());
    }
}
