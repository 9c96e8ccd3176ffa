//! Bibliometric excellence and productivity indicators.
//!
//! Excellence: the national publications of a UDA are ordered by impact and
//! the top `k` form the excellent set, with `k` either 10% of the pool
//! (scenario A) or 25% of the UDA's national staff (scenario B). Each
//! institution's share of excellent publications is divided by its share
//! of staff.
//!
//! Productivity: fractional credited impact per unit of staff at SDS level,
//! then a staff-weighted mean of nationally normalized SDS values per UDA.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::corpus::Corpus;
use crate::credit::CreditShare;
use crate::error::ComputeError;
use crate::impact::ImpactRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    /// Top 10% of the UDA's publications.
    A,
    /// As many publications as 25% of the UDA's national staff.
    B,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::A => "A",
            Scenario::B => "B",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Scenario::A),
            "B" | "b" => Ok(Scenario::B),
            other => Err(format!("unknown scenario `{other}` (expected A or B)")),
        }
    }
}

/// Half-up rounding to a non-negative count.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Size of the excellent set, clamped to the pool.
pub fn target_k(scenario: Scenario, pool_size: usize, national_staff: f64) -> usize {
    let k = match scenario {
        // integer form of round(0.10·n) avoids 0.1's binary representation
        Scenario::A => (pool_size + 5) / 10,
        Scenario::B => round_half_up(0.25 * national_staff),
    };
    k.min(pool_size)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcellentSet {
    pub uda_id: String,
    pub scenario: Scenario,
    pub pool_size: usize,
    pub k: usize,
    /// Selected publications in selection order.
    pub pub_ids: Vec<String>,
    /// AII of the last selected publication.
    pub threshold_aii: Option<f64>,
}

/// Total order used for selection: AII, then citations, then pub_id, all
/// descending.
pub fn excellence_cmp(a: (f64, u64, &str), b: (f64, u64, &str)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| b.1.cmp(&a.1))
        .then_with(|| b.2.cmp(a.2))
}

/// Publication indices of the UDA pool sorted by [`excellence_cmp`].
pub fn ranked_pool(
    corpus: &Corpus,
    impact: &BTreeMap<String, ImpactRecord>,
    uda_id: &str,
) -> Vec<usize> {
    let pubs = corpus.publications();
    let key = |i: usize| {
        let p = &pubs[i];
        (impact[&p.pub_id].aii, p.citations, p.pub_id.as_str())
    };
    let mut pool = corpus.publications_in_uda(uda_id);
    pool.sort_by(|&a, &b| excellence_cmp(key(a), key(b)));
    pool
}

pub fn select_excellent(
    corpus: &Corpus,
    impact: &BTreeMap<String, ImpactRecord>,
    uda_id: &str,
    scenario: Scenario,
) -> Result<ExcellentSet, ComputeError> {
    let pool = ranked_pool(corpus, impact, uda_id);
    if pool.is_empty() {
        return Err(ComputeError::EmptyPool(uda_id.into()));
    }
    let k = target_k(scenario, pool.len(), corpus.staff_uda(uda_id));
    let pubs = corpus.publications();
    let pub_ids: Vec<String> = pool[..k].iter().map(|&i| pubs[i].pub_id.clone()).collect();
    let threshold_aii = pub_ids.last().map(|id| impact[id].aii);
    Ok(ExcellentSet {
        uda_id: uda_id.into(),
        scenario,
        pool_size: pool.len(),
        k,
        pub_ids,
        threshold_aii,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcellenceScore {
    pub institution_id: String,
    pub uda_id: String,
    pub ne_i: usize,
    pub ne: usize,
    pub rs_i: f64,
    pub rs: f64,
    /// `None` when the institution has zero staff in the UDA.
    pub indicator: Option<f64>,
}

/// Excellence indicator for every institution with roster rows in the UDA.
/// Co-authored publications count in full for each participating
/// institution.
pub fn excellence_scores(
    corpus: &Corpus,
    set: &ExcellentSet,
) -> Result<Vec<ExcellenceScore>, ComputeError> {
    let uda = set.uda_id.as_str();
    let rs = corpus.staff_uda(uda);
    if rs == 0.0 {
        return Err(ComputeError::ZeroDenominator { uda: uda.into(), what: "national staff" });
    }
    let ne = set.pub_ids.len();
    if ne == 0 {
        return Err(ComputeError::ZeroDenominator {
            uda: uda.into(),
            what: "excellent publication count",
        });
    }
    let mut ne_by_inst: BTreeMap<&str, usize> = BTreeMap::new();
    for id in &set.pub_ids {
        let idx = corpus.publication_index(id).expect("selected from corpus");
        let insts: BTreeSet<&str> = corpus
            .attributions(idx)
            .iter()
            .filter(|a| a.uda_id == uda)
            .map(|a| a.institution_id.as_str())
            .collect();
        for i in insts {
            *ne_by_inst.entry(i).or_default() += 1;
        }
    }
    Ok(corpus
        .institutions_in_uda(uda)
        .into_iter()
        .map(|inst| {
            let ne_i = ne_by_inst.get(inst).copied().unwrap_or(0);
            let rs_i = corpus.staff_inst_uda(inst, uda);
            let indicator =
                (rs_i > 0.0).then(|| (ne_i as f64 / ne as f64) / (rs_i / rs));
            ExcellenceScore {
                institution_id: inst.into(),
                uda_id: uda.into(),
                ne_i,
                ne,
                rs_i,
                rs,
                indicator,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RpNational {
    /// National credited impact over national staff.
    #[default]
    Weighted,
    /// Plain mean of institutional values over institutions with staff.
    Unweighted,
}

impl FromStr for RpNational {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weighted" => Ok(RpNational::Weighted),
            "unweighted" => Ok(RpNational::Unweighted),
            other => Err(format!("unknown rp_national `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdsProductivity {
    pub institution_id: String,
    pub sds_id: String,
    pub uda_id: String,
    pub staff: f64,
    pub n_pubs: usize,
    /// Σ_j AII_j · n_{j,i,s}
    pub credited_impact: f64,
    pub rp: f64,
}

fn sds_cell(
    corpus: &Corpus,
    institution: &str,
    sds: &str,
    n_pubs: usize,
    credited_impact: f64,
) -> Result<SdsProductivity, ComputeError> {
    let staff = corpus.staff_inst_sds(institution, sds);
    if staff == 0.0 && n_pubs > 0 {
        return Err(ComputeError::RosterInconsistency {
            institution: institution.into(),
            sds: sds.into(),
        });
    }
    Ok(SdsProductivity {
        institution_id: institution.into(),
        sds_id: sds.into(),
        uda_id: corpus.taxonomy().uda_of(sds).unwrap_or_default().into(),
        staff,
        n_pubs,
        credited_impact,
        rp: if n_pubs == 0 { 0.0 } else { credited_impact / staff },
    })
}

/// Productivity of a single (institution, SDS) cell.
pub fn sds_productivity(
    corpus: &Corpus,
    impact: &BTreeMap<String, ImpactRecord>,
    credits: &[CreditShare],
    institution: &str,
    sds: &str,
) -> Result<SdsProductivity, ComputeError> {
    let key = (institution.to_string(), sds.to_string());
    let mut n = 0;
    let mut total = 0.0;
    for c in credits {
        if let Some(w) = c.shares.get(&key) {
            n += 1;
            total += impact[&c.pub_id].aii * w;
        }
    }
    sds_cell(corpus, institution, sds, n, total)
}

/// Productivity for every (institution, SDS) cell with roster rows or
/// credited publications, keyed in sorted order.
pub fn sds_productivity_table(
    corpus: &Corpus,
    impact: &BTreeMap<String, ImpactRecord>,
    credits: &[CreditShare],
) -> Result<BTreeMap<(String, String), SdsProductivity>, ComputeError> {
    let mut acc: BTreeMap<(String, String), (usize, f64)> = BTreeMap::new();
    for r in corpus.roster().iter() {
        acc.entry((r.institution_id.clone(), r.sds_id.clone())).or_default();
    }
    for c in credits {
        let aii = impact[&c.pub_id].aii;
        for (key, w) in &c.shares {
            let e = acc.entry(key.clone()).or_default();
            e.0 += 1;
            e.1 += aii * w;
        }
    }
    acc.into_iter()
        .map(|((i, s), (n, total))| {
            let cell = sds_cell(corpus, &i, &s, n, total)?;
            Ok(((i, s), cell))
        })
        .collect()
}

/// National reference RP_s per SDS.
pub fn national_rp(
    corpus: &Corpus,
    table: &BTreeMap<(String, String), SdsProductivity>,
    mode: RpNational,
) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for cell in table.values() {
        let e = sums.entry(cell.sds_id.as_str()).or_default();
        e.0 += cell.staff * cell.rp;
        if cell.staff > 0.0 {
            e.1 += cell.rp;
            e.2 += 1;
        }
    }
    sums.into_iter()
        .map(|(s, (weighted, plain, count))| {
            let rs = corpus.staff_sds(s);
            let v = match mode {
                RpNational::Weighted if rs > 0.0 => weighted / rs,
                RpNational::Unweighted if count > 0 => plain / count as f64,
                _ => 0.0,
            };
            (s.to_string(), v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct UdaComponent {
    pub sds_id: String,
    /// RP_{i,s} / RP_s
    pub ratio: f64,
    /// Staff weight after dropping SDSs with RP_s = 0.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UdaProductivity {
    pub institution_id: String,
    pub uda_id: String,
    pub staff: f64,
    pub rp: f64,
    pub components: Vec<UdaComponent>,
}

pub fn uda_productivity(
    corpus: &Corpus,
    table: &BTreeMap<(String, String), SdsProductivity>,
    national: &BTreeMap<String, f64>,
    institution: &str,
    uda: &str,
) -> Result<UdaProductivity, ComputeError> {
    let staff = corpus.staff_inst_uda(institution, uda);
    if staff == 0.0 {
        return Err(ComputeError::NoStaff { institution: institution.into(), uda: uda.into() });
    }
    let mut parts = Vec::new();
    for sds in corpus.taxonomy().sds_of(uda) {
        let rs_is = corpus.staff_inst_sds(institution, sds);
        let rp_s = national.get(sds).copied().unwrap_or(0.0);
        if rs_is == 0.0 || rp_s == 0.0 {
            continue;
        }
        let rp_is = table
            .get(&(institution.to_string(), sds.to_string()))
            .map_or(0.0, |c| c.rp);
        parts.push((sds, rp_is / rp_s, rs_is));
    }
    let kept: f64 = parts.iter().map(|p| p.2).sum();
    let components: Vec<UdaComponent> = parts
        .into_iter()
        .map(|(s, ratio, rs)| UdaComponent { sds_id: s.into(), ratio, weight: rs / kept })
        .collect();
    let rp = components.iter().map(|c| c.ratio * c.weight).sum();
    Ok(UdaProductivity {
        institution_id: institution.into(),
        uda_id: uda.into(),
        staff,
        rp,
        components,
    })
}

/// UDA productivity of every institution with positive staff in the UDA.
pub fn uda_productivity_all(
    corpus: &Corpus,
    table: &BTreeMap<(String, String), SdsProductivity>,
    national: &BTreeMap<String, f64>,
    uda: &str,
) -> Result<Vec<UdaProductivity>, ComputeError> {
    corpus
        .institutions_in_uda(uda)
        .into_iter()
        .filter(|i| corpus.staff_inst_uda(i, uda) > 0.0)
        .map(|i| uda_productivity(corpus, table, national, i, uda))
        .collect()
}

pub fn write_excellence_csv<W: std::io::Write>(
    rows: &[ExcellenceScore],
    w: &mut csv::Writer<W>,
) -> csv::Result<()> {
    for r in rows {
        w.write_record([
            r.institution_id.clone(),
            r.uda_id.clone(),
            r.ne_i.to_string(),
            r.ne.to_string(),
            r.rs_i.to_string(),
            r.rs.to_string(),
            r.indicator.map(|x| x.to_string()).unwrap_or_default(),
        ])?;
    }
    Ok(())
}

pub const EXCELLENCE_HEADER: [&str; 7] = ["institution_id", "uda_id", "ne_i", "ne", "rs_i", "rs", "I"];
pub const SDS_HEADER: [&str; 7] =
    ["institution_id", "sds_id", "uda_id", "staff", "n_pubs", "credited_impact", "rp"];
pub const UDA_HEADER: [&str; 4] = ["institution_id", "uda_id", "staff", "rp"];

pub fn write_sds_csv<W: std::io::Write>(
    table: &BTreeMap<(String, String), SdsProductivity>,
    w: &mut csv::Writer<W>,
) -> csv::Result<()> {
    w.write_record(SDS_HEADER)?;
    for c in table.values() {
        w.write_record([
            c.institution_id.clone(),
            c.sds_id.clone(),
            c.uda_id.clone(),
            c.staff.to_string(),
            c.n_pubs.to_string(),
            c.credited_impact.to_string(),
            c.rp.to_string(),
        ])?;
    }
    Ok(())
}

pub fn write_uda_csv<W: std::io::Write>(
    rows: &[UdaProductivity],
    w: &mut csv::Writer<W>,
) -> csv::Result<()> {
    for r in rows {
        w.write_record([
            r.institution_id.clone(),
            r.uda_id.clone(),
            r.staff.to_string(),
            r.rp.to_string(),
        ])?;
    }
    Ok(())
}
