//! Whole-corpus runs of each indicator, grouped per UDA. The CLI and the
//! end-to-end tests both go through here.

use std::collections::BTreeMap;

use crate::corpus::Corpus;
use crate::credit::{allocate_all, CreditShare};
use crate::error::ComputeError;
use crate::impact::{article_impact, ImpactRecord};
use crate::indicators::{
    excellence_scores, national_rp, sds_productivity_table, select_excellent,
    uda_productivity_all, ExcellenceScore, ExcellentSet, RpNational, Scenario, SdsProductivity,
    UdaProductivity,
};
use crate::peer_eval::{peer_rank_table, peer_udas, PeerTable};

pub type ScoreTable = BTreeMap<String, BTreeMap<String, f64>>;

pub fn peer_tables(corpus: &Corpus) -> Result<BTreeMap<String, PeerTable>, ComputeError> {
    peer_udas(corpus)
        .into_iter()
        .map(|u| peer_rank_table(corpus, &u).map(|t| (u, t)))
        .collect()
}

/// uda → institution → R
pub fn peer_scores(tables: &BTreeMap<String, PeerTable>) -> ScoreTable {
    tables
        .iter()
        .map(|(u, t)| {
            let m = t
                .rows
                .iter()
                .map(|r| (r.summary.institution_id.clone(), r.summary.score))
                .collect();
            (u.clone(), m)
        })
        .collect()
}

pub struct ExcellenceRun {
    pub sets: BTreeMap<String, ExcellentSet>,
    pub scores: BTreeMap<String, Vec<ExcellenceScore>>,
}

/// Excellence indicator for every UDA of the taxonomy that has publications.
pub fn excellence(
    corpus: &Corpus,
    impact: &BTreeMap<String, ImpactRecord>,
    scenario: Scenario,
) -> Result<ExcellenceRun, ComputeError> {
    let mut sets = BTreeMap::new();
    let mut scores = BTreeMap::new();
    for uda in corpus.taxonomy().udas() {
        let set = match select_excellent(corpus, impact, uda, scenario) {
            Ok(s) => s,
            Err(ComputeError::EmptyPool(_)) => continue,
            Err(e) => return Err(e),
        };
        scores.insert(uda.to_string(), excellence_scores(corpus, &set)?);
        sets.insert(uda.to_string(), set);
    }
    Ok(ExcellenceRun { sets, scores })
}

/// uda → institution → I, skipping undefined values.
pub fn excellence_score_table(run: &ExcellenceRun) -> ScoreTable {
    run.scores
        .iter()
        .map(|(u, rows)| {
            let m = rows
                .iter()
                .filter_map(|r| r.indicator.map(|i| (r.institution_id.clone(), i)))
                .collect();
            (u.clone(), m)
        })
        .collect()
}

pub struct ProductivityRun {
    pub credits: Vec<CreditShare>,
    pub sds: BTreeMap<(String, String), SdsProductivity>,
    pub national: BTreeMap<String, f64>,
    pub uda: BTreeMap<String, Vec<UdaProductivity>>,
}

pub fn productivity(
    corpus: &Corpus,
    impact: &BTreeMap<String, ImpactRecord>,
    mode: RpNational,
) -> Result<ProductivityRun, ComputeError> {
    let credits = allocate_all(corpus);
    let sds = sds_productivity_table(corpus, impact, &credits)?;
    let national = national_rp(corpus, &sds, mode);
    let mut uda = BTreeMap::new();
    for u in corpus.taxonomy().udas() {
        let rows = uda_productivity_all(corpus, &sds, &national, u)?;
        if !rows.is_empty() {
            uda.insert(u.to_string(), rows);
        }
    }
    Ok(ProductivityRun { credits, sds, national, uda })
}

pub fn productivity_score_table(run: &ProductivityRun) -> ScoreTable {
    run.uda
        .iter()
        .map(|(u, rows)| {
            (u.clone(), rows.iter().map(|r| (r.institution_id.clone(), r.rp)).collect())
        })
        .collect()
}

/// Convenience: impact for the whole corpus.
pub fn impact(corpus: &Corpus) -> BTreeMap<String, ImpactRecord> {
    article_impact(corpus)
}
