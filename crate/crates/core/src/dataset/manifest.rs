//! Dataset entries, on-disk layout and per-track statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::blocks::BlockAssignment;
use crate::scad::SourceFile;
use crate::vision::LabelList;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Track {
    #[serde(rename = "Cube^L")]
    CubeL,
    #[serde(rename = "Cube^H")]
    CubeH,
    #[serde(rename = "Ellip^L")]
    EllipL,
    #[serde(rename = "Ellip^H")]
    EllipH,
    Real,
}

impl Track {
    pub const ALL: [Track; 5] = [Track::CubeL, Track::CubeH, Track::EllipL, Track::EllipH, Track::Real];

    pub fn name(self) -> &'static str {
        match self {
            Track::CubeL => "Cube^L",
            Track::CubeH => "Cube^H",
            Track::EllipL => "Ellip^L",
            Track::EllipH => "Ellip^H",
            Track::Real => "Real",
        }
    }

    /// Directory name under the dataset root.
    pub fn slug(self) -> &'static str {
        match self {
            Track::CubeL => "cube_l",
            Track::CubeH => "cube_h",
            Track::EllipL => "ellip_l",
            Track::EllipH => "ellip_h",
            Track::Real => "real",
        }
    }

    /// Depth-map closing passes used before synthesis.
    pub fn closing_iterations(self) -> usize {
        match self {
            Track::CubeH | Track::EllipH => 5,
            Track::CubeL | Track::EllipL => 3,
            Track::Real => 1,
        }
    }
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Track {
    type Err = DatasetError;

    /// Accepts `Cube^L`, `cube_l`, `cubel` and similar spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        Track::ALL
            .into_iter()
            .find(|t| t.slug().replace('_', "") == key)
            .ok_or_else(|| DatasetError::UnknownTrack(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetEntry {
    pub id: String,
    pub track: Track,
    pub category: String,
    /// Program text with ground-truth comments inline.
    pub program: SourceFile,
    pub gt: BlockAssignment,
    pub label_set: LabelList,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub track: Track,
    pub category: String,
    /// Relative to the manifest's directory.
    pub path: String,
    pub lines: usize,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Manifest, DatasetError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::InvalidManifest(e.to_string()))
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STATS_FILE: &str = "stats.json";

/// Line counts as (min, median, max); the median is the lower one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineStats {
    pub min: usize,
    pub median: usize,
    pub max: usize,
}

impl LineStats {
    pub fn of(counts: &[usize]) -> Option<LineStats> {
        let mut v = counts.to_vec();
        v.sort_unstable();
        Some(LineStats {
            min: *v.first()?,
            median: v[(v.len() - 1) / 2],
            max: *v.last()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub programs: usize,
    pub lines: LineStats,
    pub parts: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackStats {
    pub programs: usize,
    pub categories: BTreeMap<String, CategoryStats>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub tracks: BTreeMap<Track, TrackStats>,
}

impl DatasetStats {
    /// One row per track: programs, then `(min, median, max)` lines and
    /// part counts per category.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for (track, ts) in &self.tracks {
            let lines: Vec<String> = ts
                .categories
                .iter()
                .map(|(c, s)| format!("{c} ({}, {}, {})", s.lines.min, s.lines.median, s.lines.max))
                .collect();
            let parts: Vec<String> = ts.categories.values().map(|s| s.parts.to_string()).collect();
            out.push_str(&format!("{track}\t{}\t{}\t{}\n", ts.programs, lines.join("; "), parts.join(",")));
        }
        out
    }
}

fn stats_of(entries: &[ManifestEntry]) -> DatasetStats {
    let mut grouped: BTreeMap<Track, BTreeMap<&str, Vec<&ManifestEntry>>> = BTreeMap::new();
    for e in entries {
        grouped.entry(e.track).or_default().entry(&e.category).or_default().push(e);
    }
    let tracks = grouped
        .into_iter()
        .map(|(t, cats)| {
            let categories: BTreeMap<String, CategoryStats> = cats
                .into_iter()
                .map(|(c, es)| {
                    let counts: Vec<usize> = es.iter().map(|e| e.lines).collect();
                    let parts = es.iter().map(|e| e.labels.len()).max().unwrap_or(0);
                    let lines = LineStats::of(&counts).expect("groups are non-empty");
                    (c.to_string(), CategoryStats { programs: es.len(), lines, parts })
                })
                .collect();
            let programs = categories.values().map(|c| c.programs).sum();
            (t, TrackStats { programs, categories })
        })
        .collect();
    DatasetStats { tracks }
}

fn entry_path(e: &DatasetEntry) -> String {
    format!("{}/{}.scad", e.track.slug(), e.id)
}

/// Manifest plus per-track statistics. Ids must be unique.
pub fn build_manifest(entries: &[DatasetEntry]) -> Result<(Manifest, DatasetStats), DatasetError> {
    let mut seen = BTreeSet::new();
    let mut manifest = Manifest::default();
    for e in entries {
        if !seen.insert(e.id.as_str()) {
            return Err(DatasetError::DuplicateId(e.id.clone()));
        }
        manifest.entries.push(ManifestEntry {
            id: e.id.clone(),
            track: e.track,
            category: e.category.clone(),
            path: entry_path(e),
            lines: e.program.line_count(),
            labels: e.label_set.labels.clone(),
        });
    }
    let stats = stats_of(&manifest.entries);
    Ok((manifest, stats))
}

/// Statistics recomputed from a manifest on disk.
pub fn manifest_stats(m: &Manifest) -> DatasetStats {
    stats_of(&m.entries)
}

pub(crate) fn to_pretty_json<T: Serialize>(v: &T) -> String {
    let value = serde_json::to_value(v).expect("plain data");
    let mut s = serde_json::to_string_pretty(&value).expect("values serialize");
    s.push('\n');
    s
}

/// Writes every program, the manifest and the stats under `dir`.
pub fn write_dataset(dir: &Path, entries: &[DatasetEntry]) -> Result<(Manifest, DatasetStats), DatasetError> {
    let (manifest, stats) = build_manifest(entries)?;
    let io = |p: &Path, e: std::io::Error| DatasetError::Io(format!("{}: {e}", p.display()));
    for (e, m) in entries.iter().zip(&manifest.entries) {
        let path: PathBuf = dir.join(&m.path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|err| io(parent, err))?;
        }
        std::fs::write(&path, &e.program.text).map_err(|err| io(&path, err))?;
    }
    let mpath = dir.join(MANIFEST_FILE);
    std::fs::write(&mpath, to_pretty_json(&manifest)).map_err(|e| io(&mpath, e))?;
    let spath = dir.join(STATS_FILE);
    std::fs::write(&spath, to_pretty_json(&stats)).map_err(|e| io(&spath, e))?;
    Ok((manifest, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, track: Track, category: &str, lines: usize) -> DatasetEntry {
        DatasetEntry {
            id: id.into(),
            track,
            category: category.into(),
            program: SourceFile::inline(&"x\n".repeat(lines)),
            gt: BlockAssignment::default(),
            label_set: LabelList::new(category, ["a", "b"]).unwrap(),
        }
    }

    #[test]
    fn track_names() {
        assert_eq!("Cube^L".parse::<Track>().unwrap(), Track::CubeL);
        assert_eq!("ellip_h".parse::<Track>().unwrap(), Track::EllipH);
        assert_eq!("real".parse::<Track>().unwrap(), Track::Real);
        assert!("cube".parse::<Track>().is_err());
        assert_eq!(serde_json::to_string(&Track::EllipL).unwrap(), "\"Ellip^L\"");
        assert_eq!(Track::CubeH.closing_iterations(), 5);
    }

    #[test]
    fn lower_median() {
        assert_eq!(LineStats::of(&[5, 1, 3, 9]), Some(LineStats { min: 1, median: 3, max: 9 }));
        assert_eq!(LineStats::of(&[]), None);
    }

    #[test]
    fn stats_and_duplicates() {
        let es = vec![
            entry("a", Track::CubeL, "table", 4),
            entry("b", Track::CubeL, "table", 6),
            entry("c", Track::CubeL, "chair", 5),
            entry("d", Track::Real, "chair", 7),
        ];
        let (m, s) = build_manifest(&es).unwrap();
        assert_eq!(m.entries[0].path, "cube_l/a.scad");
        let cube = &s.tracks[&Track::CubeL];
        assert_eq!(cube.programs, 3);
        assert_eq!(cube.categories["table"].lines, LineStats { min: 4, median: 4, max: 6 });
        assert_eq!(cube.categories["table"].parts, 2);
        assert!(s.table().starts_with("Cube^L\t3\tchair (5, 5, 5); table (4, 4, 6)\t2,2\n"));

        let dup = vec![entry("a", Track::CubeL, "t", 1), entry("a", Track::Real, "t", 1)];
        assert_eq!(build_manifest(&dup), Err(DatasetError::DuplicateId("a".into())));
        assert_eq!(build_manifest(&[]).unwrap().1, DatasetStats::default());
    }
}
