//! Rank lists and the statistics used to compare two of them.
//!
//! Two rank conventions live here side by side. Displayed ranks, percentiles
//! and quartiles use competition ranking (ties share the minimum rank). The
//! Spearman statistic uses average ranks, which is the standard treatment of
//! ties for a rank correlation.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::ComputeError;

/// Sample sizes up to this bound get an exact permutation p-value.
pub const EXACT_PERMUTATION_MAX_N: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub institution_id: String,
    pub score: f64,
    pub rank: usize,
    pub percentile: f64,
    pub quartile: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankList {
    pub uda_id: String,
    /// Sorted by rank, then institution id.
    pub rows: Vec<RankRow>,
}

impl RankList {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, institution: &str) -> Option<&RankRow> {
        self.rows.iter().find(|r| r.institution_id == institution)
    }

    pub fn scores(&self) -> BTreeMap<String, f64> {
        self.rows
            .iter()
            .map(|r| (r.institution_id.clone(), r.score))
            .collect()
    }
}

/// Competition ranks on descending value: ties share the minimum rank.
pub fn competition_ranks(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|w| *w > v).count())
        .collect()
}

/// Average (fractional) ranks on ascending value.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank mean((i+1)..=(j+1))
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn percentile_of(rank: usize, n: usize) -> f64 {
    if n <= 1 {
        100.0
    } else {
        100.0 * (n - rank) as f64 / (n - 1) as f64
    }
}

pub fn quartile_of(rank: usize, n: usize) -> u8 {
    (1 + 4 * (rank - 1) / n).min(4) as u8
}

pub fn build_ranklist(
    scores: &BTreeMap<String, f64>,
    uda_id: &str,
) -> Result<RankList, ComputeError> {
    if scores.is_empty() {
        return Err(ComputeError::EmptyScores);
    }
    if let Some((id, _)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(ComputeError::NonFiniteScore(id.clone()));
    }
    let values: Vec<f64> = scores.values().copied().collect();
    let ranks = competition_ranks(&values);
    let n = values.len();
    let mut rows: Vec<RankRow> = scores
        .iter()
        .zip(ranks)
        .map(|((id, &score), rank)| RankRow {
            institution_id: id.clone(),
            score,
            rank,
            percentile: percentile_of(rank, n),
            quartile: quartile_of(rank, n),
        })
        .collect();
    rows.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.institution_id.cmp(&b.institution_id)));
    Ok(RankList { uda_id: uda_id.to_string(), rows })
}

/// Institutions common to both lists, with their scores, plus the ones
/// present on a single side.
#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub common: Vec<(String, f64, f64)>,
    pub only_left: Vec<String>,
    pub only_right: Vec<String>,
}

pub fn intersect(left: &RankList, right: &RankList) -> Intersection {
    let l = left.scores();
    let r = right.scores();
    Intersection {
        common: l
            .iter()
            .filter_map(|(id, &ls)| r.get(id).map(|&rs| (id.clone(), ls, rs)))
            .collect(),
        only_left: l.keys().filter(|k| !r.contains_key(*k)).cloned().collect(),
        only_right: r.keys().filter(|k| !l.contains_key(*k)).cloned().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PValueMethod {
    ExactPermutation,
    TApproximation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpearmanResult {
    pub n: usize,
    pub rho: f64,
    pub p_two_tailed: f64,
    pub method: PValueMethod,
}

impl SpearmanResult {
    pub fn stars(&self) -> &'static str {
        significance_stars(self.p_two_tailed)
    }
}

/// `***` below 0.01, `**` below 0.05.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else {
        ""
    }
}

fn centered(ranks: &[f64]) -> Vec<f64> {
    let mean = ranks.iter().sum::<f64>() / ranks.len() as f64;
    ranks.iter().map(|r| r - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spearman's rho over paired scores: Pearson correlation of average ranks.
pub fn spearman_scores(left: &[f64], right: &[f64]) -> Result<SpearmanResult, ComputeError> {
    assert_eq!(left.len(), right.len(), "paired samples");
    let n = left.len();
    if n < 3 {
        return Err(ComputeError::TooFewCommon(n));
    }
    let x = centered(&average_ranks(left));
    let y = centered(&average_ranks(right));
    let sxx = dot(&x, &x);
    let syy = dot(&y, &y);
    if sxx == 0.0 || syy == 0.0 {
        return Err(ComputeError::ZeroVariance);
    }
    let sxy = dot(&x, &y);
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);

    let (p, method) = if n <= EXACT_PERMUTATION_MAX_N {
        (exact_permutation_p(&x, &y), PValueMethod::ExactPermutation)
    } else {
        (t_approximation_p(rho, n), PValueMethod::TApproximation)
    };
    Ok(SpearmanResult { n, rho, p_two_tailed: p, method })
}

/// Two-tailed p from t = rho·sqrt((n−2)/(1−rho²)) with n−2 degrees of freedom.
pub fn t_approximation_p(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Fraction of all n! re-pairings whose |rho| is at least the observed one.
/// The rank marginals are fixed, so comparing |Σ x·y| suffices.
fn exact_permutation_p(x: &[f64], y: &[f64]) -> f64 {
    let observed = dot(x, y).abs();
    let tol = 1e-9 * (dot(x, x) * dot(y, y)).sqrt();
    let mut perm: Vec<f64> = y.to_vec();
    let n = perm.len();
    let mut hits: u64 = 0;
    let mut total: u64 = 0;
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; n];
    let mut visit = |p: &[f64]| {
        total += 1;
        if dot(x, p).abs() >= observed - tol {
            hits += 1;
        }
    };
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

/// Spearman over the intersection of two rank lists, re-ranked within it.
pub fn spearman(left: &RankList, right: &RankList) -> Result<SpearmanResult, ComputeError> {
    let inter = intersect(left, right);
    let l: Vec<f64> = inter.common.iter().map(|c| c.1).collect();
    let r: Vec<f64> = inter.common.iter().map(|c| c.2).collect();
    spearman_scores(&l, &r)
}

/// Summary of absolute shifts for one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftStats {
    /// Percentage of institutions whose value changed.
    pub var_pct: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

impl ShiftStats {
    fn from_abs(deltas: &[f64]) -> Self {
        let n = deltas.len() as f64;
        let changed = deltas.iter().filter(|d| **d != 0.0).count() as f64;
        let mut sorted = deltas.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 {
            sorted[m / 2]
        } else {
            (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0
        };
        Self {
            var_pct: 100.0 * changed / n,
            max: sorted.last().copied().unwrap_or(0.0),
            mean: deltas.iter().sum::<f64>() / n,
            median,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstitutionShift {
    pub institution_id: String,
    pub left_rank: usize,
    pub right_rank: usize,
    pub left_percentile: f64,
    pub right_percentile: f64,
    pub left_quartile: u8,
    pub right_quartile: u8,
}

impl InstitutionShift {
    pub fn quartile_leap(&self) -> u8 {
        self.left_quartile.abs_diff(self.right_quartile)
    }
}

/// Histogram of |Δquartile|; risers improve (move toward quartile 1) from
/// the left list to the right one, fallers move toward quartile 4.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LeapHistogram {
    pub counts: [usize; 4],
    pub risers: [usize; 4],
    pub fallers: [usize; 4],
}

impl LeapHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftReport {
    pub uda_id: String,
    pub n: usize,
    pub spearman_rho: f64,
    pub p_two_tailed: f64,
    pub stars: &'static str,
    pub percentile: ShiftStats,
    pub quartile: ShiftStats,
    pub leaps: LeapHistogram,
    pub shifts: Vec<InstitutionShift>,
    pub only_left: Vec<String>,
    pub only_right: Vec<String>,
}

fn restricted_shifts(inter: &Intersection, uda: &str) -> Result<Vec<InstitutionShift>, ComputeError> {
    let l: BTreeMap<String, f64> = inter.common.iter().map(|c| (c.0.clone(), c.1)).collect();
    let r: BTreeMap<String, f64> = inter.common.iter().map(|c| (c.0.clone(), c.2)).collect();
    let lr = build_ranklist(&l, uda)?;
    let rr = build_ranklist(&r, uda)?;
    Ok(inter
        .common
        .iter()
        .map(|(id, _, _)| {
            let a = lr.get(id).expect("common");
            let b = rr.get(id).expect("common");
            InstitutionShift {
                institution_id: id.clone(),
                left_rank: a.rank,
                right_rank: b.rank,
                left_percentile: a.percentile,
                right_percentile: b.percentile,
                left_quartile: a.quartile,
                right_quartile: b.quartile,
            }
        })
        .collect())
}

fn histogram(shifts: &[InstitutionShift]) -> LeapHistogram {
    let mut h = LeapHistogram::default();
    for s in shifts {
        let leap = s.quartile_leap() as usize;
        h.counts[leap] += 1;
        if s.right_quartile < s.left_quartile {
            h.risers[leap] += 1;
        } else if s.right_quartile > s.left_quartile {
            h.fallers[leap] += 1;
        }
    }
    h
}

pub fn shift_report(left: &RankList, right: &RankList) -> Result<ShiftReport, ComputeError> {
    let inter = intersect(left, right);
    let n = inter.common.len();
    if n < 3 {
        return Err(ComputeError::TooFewCommon(n));
    }
    let l: Vec<f64> = inter.common.iter().map(|c| c.1).collect();
    let r: Vec<f64> = inter.common.iter().map(|c| c.2).collect();
    let sp = spearman_scores(&l, &r)?;
    let shifts = restricted_shifts(&inter, &left.uda_id)?;

    let dp: Vec<f64> = shifts
        .iter()
        .map(|s| (s.left_percentile - s.right_percentile).abs())
        .collect();
    let dq: Vec<f64> = shifts.iter().map(|s| s.quartile_leap() as f64).collect();

    Ok(ShiftReport {
        uda_id: left.uda_id.clone(),
        n,
        spearman_rho: sp.rho,
        p_two_tailed: sp.p_two_tailed,
        stars: sp.stars(),
        percentile: ShiftStats::from_abs(&dp),
        quartile: ShiftStats::from_abs(&dq),
        leaps: histogram(&shifts),
        shifts,
        only_left: inter.only_left,
        only_right: inter.only_right,
    })
}

pub fn leap_matrix(left: &RankList, right: &RankList) -> Result<LeapHistogram, ComputeError> {
    let inter = intersect(left, right);
    if inter.common.len() < 3 {
        return Err(ComputeError::TooFewCommon(inter.common.len()));
    }
    Ok(histogram(&restricted_shifts(&inter, &left.uda_id)?))
}
