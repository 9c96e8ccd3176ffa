//! Peer-review quality index per institution and UDA.
//!
//! Each submitted output carries one of four ratings. The quality index is
//! `R = (E + 0.8·G + 0.6·A + 0.2·L) / T`, kept at full precision here and
//! rounded to three decimals only when printed.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SizeClass};
use crate::error::ComputeError;
use crate::ranklab::{build_ranklist, competition_ranks};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rating {
    E,
    G,
    A,
    L,
}

impl Rating {
    pub const ALL: [Rating; 4] = [Rating::E, Rating::G, Rating::A, Rating::L];

    pub fn as_str(self) -> &'static str {
        match self {
            Rating::E => "E",
            Rating::G => "G",
            Rating::A => "A",
            Rating::L => "L",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "E" => Some(Rating::E),
            "G" => Some(Rating::G),
            "A" => Some(Rating::A),
            "L" => Some(Rating::L),
            _ => None,
        }
    }

    /// Weight in tenths: 10, 8, 6, 2.
    fn weight_tenths(self) -> u64 {
        match self {
            Rating::E => 10,
            Rating::G => 8,
            Rating::A => 6,
            Rating::L => 2,
        }
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RatingCounts {
    pub e: u64,
    pub g: u64,
    pub a: u64,
    pub l: u64,
}

impl RatingCounts {
    pub fn new(e: u64, g: u64, a: u64, l: u64) -> Self {
        Self { e, g, a, l }
    }

    pub fn from_ratings<'a>(ratings: impl IntoIterator<Item = &'a Rating>) -> Self {
        let mut c = Self::default();
        for r in ratings {
            c.add(*r);
        }
        c
    }

    pub fn add(&mut self, r: Rating) {
        match r {
            Rating::E => self.e += 1,
            Rating::G => self.g += 1,
            Rating::A => self.a += 1,
            Rating::L => self.l += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.e + self.g + self.a + self.l
    }

    /// Quality index; `None` when nothing was submitted.
    pub fn score(&self) -> Option<f64> {
        let t = self.total();
        if t == 0 {
            return None;
        }
        // Integer numerator keeps equal ratios bit-identical.
        let num = Rating::E.weight_tenths() * self.e
            + Rating::G.weight_tenths() * self.g
            + Rating::A.weight_tenths() * self.a
            + Rating::L.weight_tenths() * self.l;
        Some(num as f64 / (10 * t) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeerSummary {
    pub institution_id: String,
    pub uda_id: String,
    pub counts: RatingCounts,
    pub total: u64,
    pub score: f64,
}

/// Aggregates the rated outputs of one institution × UDA.
pub fn peer_score<'a>(
    institution_id: &str,
    uda_id: &str,
    ratings: impl IntoIterator<Item = &'a Rating>,
) -> Result<PeerSummary, ComputeError> {
    summarize(institution_id, uda_id, RatingCounts::from_ratings(ratings))
}

pub fn summarize(
    institution_id: &str,
    uda_id: &str,
    counts: RatingCounts,
) -> Result<PeerSummary, ComputeError> {
    let score = counts.score().ok_or_else(|| ComputeError::EmptyOutcomes {
        institution: institution_id.into(),
        uda: uda_id.into(),
    })?;
    Ok(PeerSummary {
        institution_id: institution_id.into(),
        uda_id: uda_id.into(),
        counts,
        total: counts.total(),
        score,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeerRankRow {
    pub summary: PeerSummary,
    pub rank: usize,
    pub percentile: f64,
    pub quartile: u8,
    pub class: Option<SizeClass>,
    pub class_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeerTable {
    pub uda_id: String,
    pub rows: Vec<PeerRankRow>,
}

/// Ranks summaries of one UDA: absolute competition ranks plus, where a
/// size class is known, ranks within the class.
pub fn rank_summaries(
    uda_id: &str,
    summaries: Vec<PeerSummary>,
    class_of: impl Fn(&str) -> Option<SizeClass>,
) -> Result<PeerTable, ComputeError> {
    if summaries.is_empty() {
        return Err(ComputeError::NoPeerData(uda_id.into()));
    }
    let scores: BTreeMap<String, f64> = summaries
        .iter()
        .map(|s| (s.institution_id.clone(), s.score))
        .collect();
    let ranked = build_ranklist(&scores, uda_id)?;

    let classes: BTreeMap<&str, SizeClass> = summaries
        .iter()
        .filter_map(|s| class_of(&s.institution_id).map(|c| (s.institution_id.as_str(), c)))
        .collect();
    let mut class_rank: BTreeMap<&str, usize> = BTreeMap::new();
    for class in [SizeClass::VeryLarge, SizeClass::Large, SizeClass::Medium, SizeClass::Small] {
        let members: Vec<&PeerSummary> = summaries
            .iter()
            .filter(|s| classes.get(s.institution_id.as_str()) == Some(&class))
            .collect();
        let values: Vec<f64> = members.iter().map(|s| s.score).collect();
        for (s, r) in members.iter().zip(competition_ranks(&values)) {
            class_rank.insert(s.institution_id.as_str(), r);
        }
    }

    let by_id: BTreeMap<&str, &PeerSummary> =
        summaries.iter().map(|s| (s.institution_id.as_str(), s)).collect();
    let rows = ranked
        .rows
        .iter()
        .map(|r| {
            let id = r.institution_id.as_str();
            PeerRankRow {
                summary: by_id[id].clone(),
                rank: r.rank,
                percentile: r.percentile,
                quartile: r.quartile,
                class: classes.get(id).copied(),
                class_rank: class_rank.get(id).copied(),
            }
        })
        .collect();
    Ok(PeerTable { uda_id: uda_id.into(), rows })
}

/// Rank table for one UDA from the corpus's peer outcomes.
pub fn peer_rank_table(corpus: &Corpus, uda_id: &str) -> Result<PeerTable, ComputeError> {
    let mut counts: BTreeMap<&str, RatingCounts> = BTreeMap::new();
    for o in corpus.peer_outcomes().iter().filter(|o| o.uda_id == uda_id) {
        counts.entry(o.institution_id.as_str()).or_default().add(o.rating);
    }
    let summaries = counts
        .into_iter()
        .map(|(inst, c)| summarize(inst, uda_id, c))
        .collect::<Result<Vec<_>, _>>()?;
    rank_summaries(uda_id, summaries, |inst| corpus.size_class(inst, uda_id))
}

/// UDAs that have at least one peer outcome, sorted.
pub fn peer_udas(corpus: &Corpus) -> Vec<String> {
    let mut u: Vec<String> = corpus.peer_outcomes().iter().map(|o| o.uda_id.clone()).collect();
    u.sort();
    u.dedup();
    u
}

pub const PEER_CSV_HEADER: [&str; 11] =
    ["institution_id", "uda_id", "E", "G", "A", "L", "T", "R", "rank", "class", "class_rank"];

pub fn write_peer_csv<W: std::io::Write>(
    table: &PeerTable,
    w: &mut csv::Writer<W>,
) -> csv::Result<()> {
    for r in &table.rows {
        let s = &r.summary;
        w.write_record([
            s.institution_id.clone(),
            s.uda_id.clone(),
            s.counts.e.to_string(),
            s.counts.g.to_string(),
            s.counts.a.to_string(),
            s.counts.l.to_string(),
            s.total.to_string(),
            s.score.to_string(),
            r.rank.to_string(),
            r.class.map(|c| c.to_string()).unwrap_or_default(),
            r.class_rank.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    Ok(())
}
