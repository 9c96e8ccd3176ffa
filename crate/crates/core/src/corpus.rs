//! Domain model and loader for an assessment corpus.
//!
//! A corpus directory holds a discipline taxonomy, a staff roster, the
//! indexed publications and (optionally) peer-review ratings and size
//! classes. Everything is validated on load; afterwards the [`Corpus`] is
//! immutable and exposes indexed lookups by institution, SDS and UDA.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::peer_eval::Rating;

pub const TAXONOMY_FILE: &str = "taxonomy.csv";
pub const LIFE_SCIENCE_FILE: &str = "life_science.txt";
pub const RESEARCHERS_FILE: &str = "researchers.csv";
pub const PUBLICATIONS_FILE: &str = "publications.jsonl";
pub const PEER_FILE: &str = "peer_outputs.csv";
pub const SIZE_CLASS_FILE: &str = "size_classes.csv";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing required file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: field `{field}`: {message}")]
    Malformed {
        file: String,
        line: usize,
        field: String,
        message: String,
    },
    #[error("sds `{sds_id}` is mapped to more than one uda")]
    DuplicateSds { sds_id: String },
    #[error("researcher `{researcher_id}` references unknown sds `{sds_id}`")]
    DanglingSds {
        researcher_id: String,
        sds_id: String,
    },
    #[error("publication `{pub_id}` references unknown researcher `{researcher_id}`")]
    DanglingResearcher {
        pub_id: String,
        researcher_id: String,
    },
    #[error("duplicate researcher_id `{0}`")]
    DuplicateResearcher(String),
    #[error("duplicate pub_id `{0}`")]
    DuplicatePublication(String),
    #[error("publication `{0}` has an empty author list")]
    EmptyAuthors(String),
    #[error("publication `{pub_id}`: {message}")]
    InvalidPublication { pub_id: String, message: String },
    #[error("unknown {kind} `{id}`")]
    UnknownIdentifier { kind: &'static str, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Four size bands used for within-class peer rankings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    VeryLarge,
    Large,
    Medium,
    Small,
}

impl SizeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SizeClass::VeryLarge => "very_large",
            SizeClass::Large => "large",
            SizeClass::Medium => "medium",
            SizeClass::Small => "small",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "very_large" => Some(SizeClass::VeryLarge),
            "large" => Some(SizeClass::Large),
            "medium" => Some(SizeClass::Medium),
            "small" => Some(SizeClass::Small),
            _ => None,
        }
    }
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// SDS → UDA mapping plus the set of subject categories that trigger
/// positional author credit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Taxonomy {
    sds_to_uda: BTreeMap<String, String>,
    life_science: BTreeSet<String>,
}

impl Taxonomy {
    pub fn new(
        entries: impl IntoIterator<Item = (String, String)>,
        life_science: impl IntoIterator<Item = String>,
    ) -> Result<Self, CorpusError> {
        let mut sds_to_uda = BTreeMap::new();
        for (sds, uda) in entries {
            if sds.is_empty() || uda.is_empty() {
                return Err(CorpusError::Malformed {
                    file: TAXONOMY_FILE.into(),
                    line: 0,
                    field: if sds.is_empty() { "sds_id" } else { "uda_id" }.into(),
                    message: "empty identifier".into(),
                });
            }
            if sds_to_uda.insert(sds.clone(), uda).is_some() {
                return Err(CorpusError::DuplicateSds { sds_id: sds });
            }
        }
        Ok(Self {
            sds_to_uda,
            life_science: life_science.into_iter().collect(),
        })
    }

    pub fn uda_of(&self, sds: &str) -> Option<&str> {
        self.sds_to_uda.get(sds).map(String::as_str)
    }

    pub fn udas(&self) -> BTreeSet<&str> {
        self.sds_to_uda.values().map(String::as_str).collect()
    }

    /// SDSs of a UDA in sorted order.
    pub fn sds_of(&self, uda: &str) -> Vec<&str> {
        self.sds_to_uda
            .iter()
            .filter(|(_, u)| u.as_str() == uda)
            .map(|(s, _)| s.as_str())
            .collect()
    }

    /// Number of SDSs nested in a UDA.
    pub fn sds_count(&self, uda: &str) -> usize {
        self.sds_to_uda.values().filter(|u| u.as_str() == uda).count()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.sds_to_uda.iter().map(|(s, u)| (s.as_str(), u.as_str()))
    }

    pub fn is_life_science(&self, category: &str) -> bool {
        self.life_science.contains(category)
    }

    pub fn life_science_categories(&self) -> &BTreeSet<String> {
        &self.life_science
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Researcher {
    pub researcher_id: String,
    pub institution_id: String,
    pub sds_id: String,
    pub fte: f64,
}

/// Staff roster keyed by researcher id. Sums always run in id order so
/// floating-point totals are reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Roster {
    rows: BTreeMap<String, Researcher>,
}

impl Roster {
    pub fn new(rows: impl IntoIterator<Item = Researcher>) -> Result<Self, CorpusError> {
        let mut map = BTreeMap::new();
        for r in rows {
            if !(0.0..=1.0).contains(&r.fte) {
                return Err(CorpusError::Malformed {
                    file: RESEARCHERS_FILE.into(),
                    line: 0,
                    field: "fte".into(),
                    message: format!("fte {} of `{}` outside [0,1]", r.fte, r.researcher_id),
                });
            }
            if map.contains_key(&r.researcher_id) {
                return Err(CorpusError::DuplicateResearcher(r.researcher_id));
            }
            map.insert(r.researcher_id.clone(), r);
        }
        Ok(Self { rows: map })
    }

    pub fn get(&self, researcher_id: &str) -> Option<&Researcher> {
        self.rows.get(researcher_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Researcher> {
        self.rows.values()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorSlot {
    pub position: u32,
    pub researcher_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Publication {
    pub pub_id: String,
    pub year: i32,
    pub categories: Vec<String>,
    pub citations: u64,
    pub authors: Vec<AuthorSlot>,
}

impl Publication {
    fn check_shape(&self) -> Result<(), CorpusError> {
        if self.authors.is_empty() {
            return Err(CorpusError::EmptyAuthors(self.pub_id.clone()));
        }
        if self.categories.is_empty() {
            return Err(CorpusError::InvalidPublication {
                pub_id: self.pub_id.clone(),
                message: "empty category list".into(),
            });
        }
        for (i, slot) in self.authors.iter().enumerate() {
            if slot.position as usize != i + 1 {
                return Err(CorpusError::InvalidPublication {
                    pub_id: self.pub_id.clone(),
                    message: format!(
                        "author positions must be 1..{} in order, found {} at slot {}",
                        self.authors.len(),
                        slot.position,
                        i + 1
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerOutcome {
    pub institution_id: String,
    pub uda_id: String,
    pub rating: Rating,
}

/// Resolved affiliation of a linked author.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Affiliation {
    pub institution_id: String,
    pub sds_id: String,
    pub uda_id: String,
}

/// Optional narrowing of a staff query. All-`None` means the whole roster.
#[derive(Debug, Clone, Copy, Default)]
pub struct StaffScope<'a> {
    pub institution: Option<&'a str>,
    pub sds: Option<&'a str>,
    pub uda: Option<&'a str>,
}

impl<'a> StaffScope<'a> {
    pub fn institution(id: &'a str) -> Self {
        Self { institution: Some(id), ..Self::default() }
    }
    pub fn sds(id: &'a str) -> Self {
        Self { sds: Some(id), ..Self::default() }
    }
    pub fn uda(id: &'a str) -> Self {
        Self { uda: Some(id), ..Self::default() }
    }
    pub fn with_institution(mut self, id: &'a str) -> Self {
        self.institution = Some(id);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl Finding {
    fn warning(message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, message: message.into() }
    }
    fn error(message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, message: message.into() }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// A validated, immutable corpus.
#[derive(Debug, Clone)]
pub struct Corpus {
    taxonomy: Taxonomy,
    roster: Roster,
    publications: Vec<Publication>,
    peer_outcomes: Vec<PeerOutcome>,
    size_classes: Option<BTreeMap<(String, String), SizeClass>>,
    // Per publication: distinct affiliations of its linked authors.
    attributions: Vec<BTreeSet<Affiliation>>,
    pub_index: BTreeMap<String, usize>,
    staff_inst_sds: BTreeMap<(String, String), f64>,
    staff_inst_uda: BTreeMap<(String, String), f64>,
    staff_uda: BTreeMap<String, f64>,
    staff_sds: BTreeMap<String, f64>,
}

impl Corpus {
    /// Builds a corpus from in-memory parts, enforcing every cross reference.
    pub fn from_parts(
        taxonomy: Taxonomy,
        roster: Roster,
        publications: Vec<Publication>,
        peer_outcomes: Vec<PeerOutcome>,
        size_classes: Option<BTreeMap<(String, String), SizeClass>>,
    ) -> Result<Self, CorpusError> {
        for r in roster.iter() {
            if taxonomy.uda_of(&r.sds_id).is_none() {
                return Err(CorpusError::DanglingSds {
                    researcher_id: r.researcher_id.clone(),
                    sds_id: r.sds_id.clone(),
                });
            }
        }

        let mut pub_index = BTreeMap::new();
        let mut attributions = Vec::with_capacity(publications.len());
        for (idx, p) in publications.iter().enumerate() {
            p.check_shape()?;
            if pub_index.insert(p.pub_id.clone(), idx).is_some() {
                return Err(CorpusError::DuplicatePublication(p.pub_id.clone()));
            }
            let mut set = BTreeSet::new();
            for slot in &p.authors {
                let Some(rid) = &slot.researcher_id else { continue };
                let r = roster.get(rid).ok_or_else(|| CorpusError::DanglingResearcher {
                    pub_id: p.pub_id.clone(),
                    researcher_id: rid.clone(),
                })?;
                set.insert(Affiliation {
                    institution_id: r.institution_id.clone(),
                    sds_id: r.sds_id.clone(),
                    uda_id: taxonomy.uda_of(&r.sds_id).unwrap_or_default().to_string(),
                });
            }
            attributions.push(set);
        }

        let mut staff_inst_sds = BTreeMap::new();
        let mut staff_inst_uda = BTreeMap::new();
        let mut staff_uda = BTreeMap::new();
        let mut staff_sds = BTreeMap::new();
        for r in roster.iter() {
            let uda = taxonomy.uda_of(&r.sds_id).unwrap_or_default().to_string();
            *staff_inst_sds
                .entry((r.institution_id.clone(), r.sds_id.clone()))
                .or_insert(0.0) += r.fte;
            *staff_inst_uda
                .entry((r.institution_id.clone(), uda.clone()))
                .or_insert(0.0) += r.fte;
            *staff_uda.entry(uda).or_insert(0.0) += r.fte;
            *staff_sds.entry(r.sds_id.clone()).or_insert(0.0) += r.fte;
        }

        Ok(Self {
            taxonomy,
            roster,
            publications,
            peer_outcomes,
            size_classes,
            attributions,
            pub_index,
            staff_inst_sds,
            staff_inst_uda,
            staff_uda,
            staff_sds,
        })
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn publications(&self) -> &[Publication] {
        &self.publications
    }

    pub fn publication(&self, pub_id: &str) -> Option<&Publication> {
        self.pub_index.get(pub_id).map(|&i| &self.publications[i])
    }

    pub fn publication_index(&self, pub_id: &str) -> Option<usize> {
        self.pub_index.get(pub_id).copied()
    }

    pub fn peer_outcomes(&self) -> &[PeerOutcome] {
        &self.peer_outcomes
    }

    pub fn size_classes(&self) -> Option<&BTreeMap<(String, String), SizeClass>> {
        self.size_classes.as_ref()
    }

    pub fn size_class(&self, institution: &str, uda: &str) -> Option<SizeClass> {
        self.size_classes
            .as_ref()?
            .get(&(institution.to_string(), uda.to_string()))
            .copied()
    }

    /// Distinct affiliations of a publication's linked authors, by index.
    pub fn attributions(&self, idx: usize) -> &BTreeSet<Affiliation> {
        &self.attributions[idx]
    }

    /// Institutions a publication is attributed to (multi-assignment).
    pub fn institutions_of(&self, idx: usize) -> BTreeSet<&str> {
        self.attributions[idx]
            .iter()
            .map(|a| a.institution_id.as_str())
            .collect()
    }

    /// Indices of publications attributed to a UDA via any linked author's SDS.
    pub fn publications_in_uda(&self, uda: &str) -> Vec<usize> {
        (0..self.publications.len())
            .filter(|&i| self.attributions[i].iter().any(|a| a.uda_id == uda))
            .collect()
    }

    pub fn publications_of_institution(&self, institution: &str) -> Vec<usize> {
        (0..self.publications.len())
            .filter(|&i| {
                self.attributions[i]
                    .iter()
                    .any(|a| a.institution_id == institution)
            })
            .collect()
    }

    pub fn institutions(&self) -> BTreeSet<&str> {
        self.roster.iter().map(|r| r.institution_id.as_str()).collect()
    }

    /// Institutions with at least one roster row in the UDA.
    pub fn institutions_in_uda(&self, uda: &str) -> Vec<&str> {
        self.staff_inst_uda
            .keys()
            .filter(|(_, u)| u == uda)
            .map(|(i, _)| i.as_str())
            .collect()
    }

    /// Institutions with at least one roster row in the SDS.
    pub fn institutions_in_sds(&self, sds: &str) -> Vec<&str> {
        self.staff_inst_sds
            .keys()
            .filter(|(_, s)| s == sds)
            .map(|(i, _)| i.as_str())
            .collect()
    }

    /// Σ fte over roster rows matching every given scope component.
    pub fn staff(&self, scope: StaffScope<'_>) -> Result<f64, CorpusError> {
        if let Some(i) = scope.institution {
            if !self.roster.iter().any(|r| r.institution_id == i) {
                return Err(CorpusError::UnknownIdentifier { kind: "institution", id: i.into() });
            }
        }
        if let Some(s) = scope.sds {
            if self.taxonomy.uda_of(s).is_none() {
                return Err(CorpusError::UnknownIdentifier { kind: "sds", id: s.into() });
            }
        }
        if let Some(u) = scope.uda {
            if !self.taxonomy.udas().contains(u) {
                return Err(CorpusError::UnknownIdentifier { kind: "uda", id: u.into() });
            }
        }
        Ok(self
            .roster
            .iter()
            .filter(|r| scope.institution.is_none_or(|i| r.institution_id == i))
            .filter(|r| scope.sds.is_none_or(|s| r.sds_id == s))
            .filter(|r| {
                scope
                    .uda
                    .is_none_or(|u| self.taxonomy.uda_of(&r.sds_id) == Some(u))
            })
            .map(|r| r.fte)
            .sum())
    }

    /// Cached RS_{i,s}; zero when the cell has no roster rows.
    pub fn staff_inst_sds(&self, institution: &str, sds: &str) -> f64 {
        self.staff_inst_sds
            .get(&(institution.to_string(), sds.to_string()))
            .copied()
            .unwrap_or(0.0)
    }

    /// Cached RS_{i,u}.
    pub fn staff_inst_uda(&self, institution: &str, uda: &str) -> f64 {
        self.staff_inst_uda
            .get(&(institution.to_string(), uda.to_string()))
            .copied()
            .unwrap_or(0.0)
    }

    /// Cached RS_u.
    pub fn staff_uda(&self, uda: &str) -> f64 {
        self.staff_uda.get(uda).copied().unwrap_or(0.0)
    }

    /// Cached RS_s.
    pub fn staff_sds(&self, sds: &str) -> f64 {
        self.staff_sds.get(sds).copied().unwrap_or(0.0)
    }

    /// Consistency findings. Errors here indicate data that loaded but will
    /// make downstream indicators meaningless; warnings are informational.
    pub fn validate(&self) -> Vec<Finding> {
        let mut out = Vec::new();
        for r in self.roster.iter() {
            if r.fte == 0.0 {
                out.push(Finding::warning(format!(
                    "researcher `{}` has fte = 0 and adds no staff weight",
                    r.researcher_id
                )));
            }
        }
        for (idx, p) in self.publications.iter().enumerate() {
            if self.attributions[idx].is_empty() {
                out.push(Finding::warning(format!(
                    "publication `{}` has no institutional attribution (all authors external); kept in citation pools only",
                    p.pub_id
                )));
            }
        }
        let udas = self.taxonomy.udas();
        let institutions = self.institutions();
        for o in &self.peer_outcomes {
            if !udas.contains(o.uda_id.as_str()) {
                out.push(Finding::error(format!(
                    "peer outcome references unknown uda `{}`",
                    o.uda_id
                )));
            }
            if !institutions.contains(o.institution_id.as_str()) {
                out.push(Finding::warning(format!(
                    "peer outcome institution `{}` has no roster staff",
                    o.institution_id
                )));
            }
        }
        if let Some(classes) = &self.size_classes {
            for (inst, uda) in classes.keys() {
                if !udas.contains(uda.as_str()) {
                    out.push(Finding::error(format!(
                        "size class references unknown uda `{uda}` (institution `{inst}`)"
                    )));
                }
            }
        }
        // Peer findings repeat per row; keep one of each.
        let mut seen = BTreeSet::new();
        out.retain(|f| seen.insert(f.message.clone()));
        out
    }
}

fn malformed(file: &str, line: usize, field: &str, message: impl Into<String>) -> CorpusError {
    CorpusError::Malformed {
        file: file.into(),
        line,
        field: field.into(),
        message: message.into(),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, CorpusError> {
    let file = fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::MissingFile(path.to_path_buf()),
        _ => CorpusError::Io(e),
    })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Reads a header-checked CSV and hands each record to `row` with its 1-based
/// file line number.
fn read_csv(
    dir: &Path,
    name: &str,
    expected: &[&str],
    optional_tail: usize,
    mut row: impl FnMut(usize, &csv::StringRecord) -> Result<(), CorpusError>,
) -> Result<(), CorpusError> {
    let mut rdr = csv_reader(&dir.join(name))?;
    let headers = rdr
        .headers()
        .map_err(|e| malformed(name, 1, "header", e.to_string()))?
        .clone();
    let got: Vec<&str> = headers.iter().collect();
    let required = &expected[..expected.len() - optional_tail];
    if got.len() < required.len()
        || got.len() > expected.len()
        || got.iter().zip(expected).any(|(g, e)| g != e)
    {
        return Err(malformed(
            name,
            1,
            "header",
            format!("expected `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| malformed(name, line, "row", e.to_string()))?;
        row(line, &rec)?;
    }
    Ok(())
}

fn field<'r>(
    rec: &'r csv::StringRecord,
    idx: usize,
    file: &str,
    line: usize,
    name: &str,
) -> Result<&'r str, CorpusError> {
    match rec.get(idx) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(malformed(file, line, name, "missing value")),
    }
}

/// Loads and validates a corpus directory.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let dir = dir.as_ref();

    let mut entries = Vec::new();
    read_csv(dir, TAXONOMY_FILE, &["sds_id", "uda_id"], 0, |line, rec| {
        let sds = field(rec, 0, TAXONOMY_FILE, line, "sds_id")?;
        let uda = field(rec, 1, TAXONOMY_FILE, line, "uda_id")?;
        entries.push((sds.to_string(), uda.to_string()));
        Ok(())
    })?;

    let ls_path = dir.join(LIFE_SCIENCE_FILE);
    let life_science: Vec<String> = fs::read_to_string(&ls_path)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CorpusError::MissingFile(ls_path.clone()),
            _ => CorpusError::Io(e),
        })?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    let taxonomy = Taxonomy::new(entries, life_science)?;

    let mut researchers = Vec::new();
    let mut seen = BTreeSet::new();
    read_csv(
        dir,
        RESEARCHERS_FILE,
        &["researcher_id", "institution_id", "sds_id", "fte"],
        1,
        |line, rec| {
            let f = RESEARCHERS_FILE;
            let id = field(rec, 0, f, line, "researcher_id")?.to_string();
            let institution_id = field(rec, 1, f, line, "institution_id")?.to_string();
            let sds_id = field(rec, 2, f, line, "sds_id")?.to_string();
            let fte = match rec.get(3).unwrap_or("") {
                "" => 1.0,
                v => v
                    .parse::<f64>()
                    .ok()
                    .filter(|x| (0.0..=1.0).contains(x))
                    .ok_or_else(|| malformed(f, line, "fte", format!("`{v}` is not in [0,1]")))?,
            };
            if !seen.insert(id.clone()) {
                return Err(CorpusError::DuplicateResearcher(id));
            }
            if taxonomy.uda_of(&sds_id).is_none() {
                return Err(CorpusError::DanglingSds { researcher_id: id, sds_id });
            }
            researchers.push(Researcher { researcher_id: id, institution_id, sds_id, fte });
            Ok(())
        },
    )?;
    let roster = Roster::new(researchers)?;

    let pub_path = dir.join(PUBLICATIONS_FILE);
    let file = fs::File::open(&pub_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::MissingFile(pub_path.clone()),
        _ => CorpusError::Io(e),
    })?;
    let mut publications = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Publication = serde_json::from_str(&line).map_err(|e| {
            malformed(PUBLICATIONS_FILE, i + 1, "json", e.to_string())
        })?;
        publications.push(p);
    }

    let mut peer_outcomes = Vec::new();
    if dir.join(PEER_FILE).exists() {
        read_csv(dir, PEER_FILE, &["institution_id", "uda_id", "rating"], 0, |line, rec| {
            let institution_id = field(rec, 0, PEER_FILE, line, "institution_id")?.to_string();
            let uda_id = field(rec, 1, PEER_FILE, line, "uda_id")?.to_string();
            let raw = field(rec, 2, PEER_FILE, line, "rating")?;
            let rating = Rating::parse(raw).ok_or_else(|| {
                malformed(PEER_FILE, line, "rating", format!("`{raw}` not one of E,G,A,L"))
            })?;
            peer_outcomes.push(PeerOutcome { institution_id, uda_id, rating });
            Ok(())
        })?;
    }

    let size_classes = if dir.join(SIZE_CLASS_FILE).exists() {
        let mut map = BTreeMap::new();
        read_csv(dir, SIZE_CLASS_FILE, &["institution_id", "uda_id", "class"], 0, |line, rec| {
            let inst = field(rec, 0, SIZE_CLASS_FILE, line, "institution_id")?.to_string();
            let uda = field(rec, 1, SIZE_CLASS_FILE, line, "uda_id")?.to_string();
            let raw = field(rec, 2, SIZE_CLASS_FILE, line, "class")?;
            let class = SizeClass::parse(raw).ok_or_else(|| {
                malformed(SIZE_CLASS_FILE, line, "class", format!("unknown size class `{raw}`"))
            })?;
            map.insert((inst, uda), class);
            Ok(())
        })?;
        Some(map)
    } else {
        None
    };

    Corpus::from_parts(taxonomy, roster, publications, peer_outcomes, size_classes)
}

fn fmt_fte(fte: f64) -> String {
    if fte == 1.0 {
        String::new()
    } else {
        // Shortest representation that parses back to the same f64.
        format!("{fte}")
    }
}

/// Writes a corpus in the directory layout read by [`load_corpus`].
pub fn write_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<(), CorpusError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join(TAXONOMY_FILE)).map_err(csv_io)?;
    w.write_record(["sds_id", "uda_id"]).map_err(csv_io)?;
    for (s, u) in corpus.taxonomy.entries() {
        w.write_record([s, u]).map_err(csv_io)?;
    }
    w.flush()?;

    let mut ls = String::new();
    for c in corpus.taxonomy.life_science_categories() {
        ls.push_str(c);
        ls.push('\n');
    }
    fs::write(dir.join(LIFE_SCIENCE_FILE), ls)?;

    let mut w = csv::Writer::from_path(dir.join(RESEARCHERS_FILE)).map_err(csv_io)?;
    w.write_record(["researcher_id", "institution_id", "sds_id", "fte"]).map_err(csv_io)?;
    for r in corpus.roster.iter() {
        w.write_record([
            r.researcher_id.as_str(),
            &r.institution_id,
            &r.sds_id,
            &fmt_fte(r.fte),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;

    let mut out = std::io::BufWriter::new(fs::File::create(dir.join(PUBLICATIONS_FILE))?);
    for p in &corpus.publications {
        serde_json::to_writer(&mut out, p).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;

    if !corpus.peer_outcomes.is_empty() {
        write_peer_outcomes(&corpus.peer_outcomes, dir)?;
    }

    if let Some(classes) = &corpus.size_classes {
        let mut w = csv::Writer::from_path(dir.join(SIZE_CLASS_FILE)).map_err(csv_io)?;
        w.write_record(["institution_id", "uda_id", "class"]).map_err(csv_io)?;
        for ((i, u), c) in classes {
            w.write_record([i.as_str(), u, c.as_str()]).map_err(csv_io)?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn write_peer_outcomes(rows: &[PeerOutcome], dir: &Path) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_path(dir.join(PEER_FILE)).map_err(csv_io)?;
    w.write_record(["institution_id", "uda_id", "rating"]).map_err(csv_io)?;
    for o in rows {
        w.write_record([o.institution_id.as_str(), &o.uda_id, o.rating.as_str()])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> CorpusError {
    CorpusError::Io(e.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn singleton(dir: &Path) {
        write(dir, TAXONOMY_FILE, "sds_id,uda_id\nMAT/05,MATH\n");
        write(dir, LIFE_SCIENCE_FILE, "");
        write(dir, RESEARCHERS_FILE, "researcher_id,institution_id,sds_id,fte\nr1,U1,MAT/05,\n");
        write(
            dir,
            PUBLICATIONS_FILE,
            r#"{"pub_id":"p1","year":2002,"categories":["Mathematics"],"citations":3,"authors":[{"position":1,"researcher_id":"r1"}]}"#,
        );
    }

    #[test]
    fn singleton_corpus_loads() {
        let tmp = tempfile::tempdir().unwrap();
        singleton(tmp.path());
        let c = load_corpus(tmp.path()).unwrap();
        assert_eq!(c.staff(StaffScope::default()).unwrap(), 1.0);
        assert_eq!(c.staff(StaffScope::institution("U1")).unwrap(), 1.0);
        assert_eq!(c.staff_uda("MATH"), 1.0);
        assert_eq!(c.staff_inst_sds("U1", "MAT/05"), 1.0);
        assert!(c.validate().is_empty());
    }

    #[test]
    fn dangling_researcher_names_publication() {
        let tmp = tempfile::tempdir().unwrap();
        singleton(tmp.path());
        write(
            tmp.path(),
            PUBLICATIONS_FILE,
            r#"{"pub_id":"p9","year":2002,"categories":["X"],"citations":0,"authors":[{"position":1,"researcher_id":"ghost"}]}"#,
        );
        match load_corpus(tmp.path()) {
            Err(CorpusError::DanglingResearcher { pub_id, .. }) => assert_eq!(pub_id, "p9"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_errors() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(load_corpus(tmp.path()), Err(CorpusError::MissingFile(_))));

        singleton(tmp.path());
        write(tmp.path(), RESEARCHERS_FILE, "researcher_id,institution_id,sds_id,fte\nr1,U1,MAT/05,\nr1,U2,MAT/05,\n");
        assert!(matches!(load_corpus(tmp.path()), Err(CorpusError::DuplicateResearcher(_))));

        write(tmp.path(), RESEARCHERS_FILE, "researcher_id,institution_id,sds_id,fte\nr1,U1,FIS/01,\n");
        assert!(matches!(load_corpus(tmp.path()), Err(CorpusError::DanglingSds { .. })));

        write(tmp.path(), RESEARCHERS_FILE, "researcher_id,institution_id,sds_id,fte\nr1,U1,MAT/05,1.5\n");
        match load_corpus(tmp.path()) {
            Err(CorpusError::Malformed { file, line, field, .. }) => {
                assert_eq!((file.as_str(), line, field.as_str()), (RESEARCHERS_FILE, 2, "fte"));
            }
            other => panic!("unexpected {other:?}"),
        }

        singleton(tmp.path());
        write(
            tmp.path(),
            PUBLICATIONS_FILE,
            r#"{"pub_id":"p1","year":2002,"categories":["X"],"citations":0,"authors":[]}"#,
        );
        assert!(matches!(load_corpus(tmp.path()), Err(CorpusError::EmptyAuthors(_))));

        write(
            tmp.path(),
            PUBLICATIONS_FILE,
            r#"{"pub_id":"p1","year":2002,"categories":["X"],"citations":-1,"authors":[{"position":1,"researcher_id":null}]}"#,
        );
        assert!(matches!(
            load_corpus(tmp.path()),
            Err(CorpusError::Malformed { line: 1, .. })
        ));

        singleton(tmp.path());
        write(tmp.path(), PEER_FILE, "institution_id,uda_id,rating\nU1,MATH,X\n");
        assert!(matches!(load_corpus(tmp.path()), Err(CorpusError::Malformed { line: 2, .. })));
    }

    #[test]
    fn validate_flags_external_only_and_zero_fte() {
        let tmp = tempfile::tempdir().unwrap();
        singleton(tmp.path());
        write(tmp.path(), RESEARCHERS_FILE, "researcher_id,institution_id,sds_id,fte\nr1,U1,MAT/05,\nr2,U1,MAT/05,0\n");
        write(
            tmp.path(),
            PUBLICATIONS_FILE,
            concat!(
                r#"{"pub_id":"p1","year":2002,"categories":["M"],"citations":3,"authors":[{"position":1,"researcher_id":"r1"}]}"#,
                "\n",
                r#"{"pub_id":"p2","year":2002,"categories":["M"],"citations":3,"authors":[{"position":1,"researcher_id":null}]}"#
            ),
        );
        let c = load_corpus(tmp.path()).unwrap();
        let findings = c.validate();
        assert_eq!(findings.len(), 2);
        assert!(findings.iter().all(|f| f.severity == Severity::Warning));
        assert!(findings.iter().any(|f| f.message.contains("no institutional attribution")));
        assert!(findings.iter().any(|f| f.message.contains("fte = 0")));
    }

    #[test]
    fn staff_is_additive() {
        let tax = Taxonomy::new(
            [("S1".into(), "U".into()), ("S2".into(), "U".into())],
            [],
        )
        .unwrap();
        let roster = Roster::new([
            Researcher { researcher_id: "a".into(), institution_id: "I".into(), sds_id: "S1".into(), fte: 1.0 },
            Researcher { researcher_id: "b".into(), institution_id: "I".into(), sds_id: "S1".into(), fte: 0.5 },
            Researcher { researcher_id: "c".into(), institution_id: "J".into(), sds_id: "S2".into(), fte: 1.0 },
        ])
        .unwrap();
        let c = Corpus::from_parts(tax, roster, vec![], vec![], None).unwrap();
        assert_eq!(c.staff(StaffScope::sds("S1")).unwrap(), 1.5);
        assert_eq!(c.staff(StaffScope::uda("U")).unwrap(), 2.5);
        assert_eq!(c.staff(StaffScope::uda("U").with_institution("J")).unwrap(), 1.0);
        assert!(matches!(
            c.staff(StaffScope::institution("nope")),
            Err(CorpusError::UnknownIdentifier { kind: "institution", .. })
        ));
        assert!(c.staff(StaffScope::uda("nope")).is_err());
    }

    #[test]
    fn multi_assignment_over_institutions() {
        let tax = Taxonomy::new([("S1".into(), "U".into()), ("S2".into(), "V".into())], []).unwrap();
        let roster = Roster::new([
            Researcher { researcher_id: "a".into(), institution_id: "I".into(), sds_id: "S1".into(), fte: 1.0 },
            Researcher { researcher_id: "b".into(), institution_id: "J".into(), sds_id: "S2".into(), fte: 1.0 },
        ])
        .unwrap();
        let p = Publication {
            pub_id: "p".into(),
            year: 2001,
            categories: vec!["C".into()],
            citations: 1,
            authors: vec![
                AuthorSlot { position: 1, researcher_id: Some("a".into()) },
                AuthorSlot { position: 2, researcher_id: None },
                AuthorSlot { position: 3, researcher_id: Some("b".into()) },
            ],
        };
        let c = Corpus::from_parts(tax, roster, vec![p], vec![], None).unwrap();
        assert_eq!(c.institutions_of(0), BTreeSet::from(["I", "J"]));
        assert_eq!(c.publications_in_uda("U"), vec![0]);
        assert_eq!(c.publications_in_uda("V"), vec![0]);
        assert_eq!(c.publications_of_institution("J"), vec![0]);
    }

    #[test]
    fn round_trip_through_directory() {
        let tmp = tempfile::tempdir().unwrap();
        singleton(tmp.path());
        write(tmp.path(), PEER_FILE, "institution_id,uda_id,rating\nU1,MATH,E\nU1,MATH,L\n");
        write(tmp.path(), SIZE_CLASS_FILE, "institution_id,uda_id,class\nU1,MATH,very_large\n");
        let a = load_corpus(tmp.path()).unwrap();
        let out = tempfile::tempdir().unwrap();
        write_corpus(&a, out.path()).unwrap();
        let b = load_corpus(out.path()).unwrap();
        assert_eq!(a.taxonomy(), b.taxonomy());
        assert_eq!(a.roster(), b.roster());
        assert_eq!(a.publications(), b.publications());
        assert_eq!(a.peer_outcomes(), b.peer_outcomes());
        assert_eq!(a.size_classes(), b.size_classes());
    }
}
