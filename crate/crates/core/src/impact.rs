//! Article Impact Index: citations normalized by the median citations of
//! every loaded publication sharing the same year and subject category.
//!
//! A publication listed under several categories is normalized against each
//! pool separately and the AII is the mean of those values. Pools whose
//! median is zero fall back to the pool mean; when the mean is zero too,
//! every member has zero citations and normalizes to zero.

use std::collections::BTreeMap;

use crate::corpus::Corpus;

pub type PoolKey = (i32, String);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolStats {
    pub size: usize,
    pub median: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    None,
    Mean,
    Zero,
}

impl Fallback {
    pub fn as_str(self) -> &'static str {
        match self {
            Fallback::None => "none",
            Fallback::Mean => "mean",
            Fallback::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryImpact {
    pub category: String,
    pub year: i32,
    pub median: f64,
    pub normalized: f64,
    pub fallback: Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactRecord {
    pub pub_id: String,
    pub aii: f64,
    pub per_category: Vec<CategoryImpact>,
}

/// Median with the mean-of-middle-pair convention for even sizes.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

fn pools(corpus: &Corpus) -> BTreeMap<PoolKey, Vec<f64>> {
    let mut pools: BTreeMap<PoolKey, Vec<f64>> = BTreeMap::new();
    for p in corpus.publications() {
        // a category listed twice on one record still counts once
        let mut cats: Vec<&String> = p.categories.iter().collect();
        cats.sort();
        cats.dedup();
        for c in cats {
            pools
                .entry((p.year, c.clone()))
                .or_default()
                .push(p.citations as f64);
        }
    }
    pools
}

pub fn compute_pool_stats(corpus: &Corpus) -> BTreeMap<PoolKey, PoolStats> {
    pools(corpus)
        .into_iter()
        .map(|(k, mut v)| {
            let size = v.len();
            let mean = v.iter().sum::<f64>() / size as f64;
            let median = median(&mut v).expect("non-empty pool");
            (k, PoolStats { size, median, mean })
        })
        .collect()
}

pub fn compute_medians(corpus: &Corpus) -> BTreeMap<PoolKey, f64> {
    compute_pool_stats(corpus)
        .into_iter()
        .map(|(k, s)| (k, s.median))
        .collect()
}

fn normalize(citations: u64, stats: &PoolStats) -> (f64, Fallback) {
    let c = citations as f64;
    if stats.median > 0.0 {
        (c / stats.median, Fallback::None)
    } else if stats.mean > 0.0 {
        (c / stats.mean, Fallback::Mean)
    } else {
        (0.0, Fallback::Zero)
    }
}

/// AII for every publication, keyed by pub_id.
pub fn article_impact(corpus: &Corpus) -> BTreeMap<String, ImpactRecord> {
    let stats = compute_pool_stats(corpus);
    article_impact_with(corpus, &stats)
}

pub fn article_impact_with(
    corpus: &Corpus,
    stats: &BTreeMap<PoolKey, PoolStats>,
) -> BTreeMap<String, ImpactRecord> {
    corpus
        .publications()
        .iter()
        .map(|p| {
            let mut cats: Vec<&String> = p.categories.iter().collect();
            cats.sort();
            cats.dedup();
            let per_category: Vec<CategoryImpact> = cats
                .into_iter()
                .map(|c| {
                    let s = &stats[&(p.year, c.clone())];
                    let (normalized, fallback) = normalize(p.citations, s);
                    CategoryImpact {
                        category: c.clone(),
                        year: p.year,
                        median: s.median,
                        normalized,
                        fallback,
                    }
                })
                .collect();
            let aii = per_category.iter().map(|c| c.normalized).sum::<f64>()
                / per_category.len() as f64;
            (p.pub_id.clone(), ImpactRecord { pub_id: p.pub_id.clone(), aii, per_category })
        })
        .collect()
}

pub fn write_impact_csv<W: std::io::Write>(
    impact: &BTreeMap<String, ImpactRecord>,
    w: &mut csv::Writer<W>,
) -> csv::Result<()> {
    w.write_record(["pub_id", "aii"])?;
    for r in impact.values() {
        w.write_record([r.pub_id.clone(), r.aii.to_string()])?;
    }
    Ok(())
}

pub fn write_impact_audit_csv<W: std::io::Write>(
    impact: &BTreeMap<String, ImpactRecord>,
    w: &mut csv::Writer<W>,
) -> csv::Result<()> {
    w.write_record(["pub_id", "category", "year", "median", "normalized", "fallback"])?;
    for r in impact.values() {
        for c in &r.per_category {
            w.write_record([
                r.pub_id.clone(),
                c.category.clone(),
                c.year.to_string(),
                c.median.to_string(),
                c.normalized.to_string(),
                c.fallback.as_str().to_string(),
            ])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AuthorSlot, Publication, Roster, Taxonomy};

    fn corpus(pubs: &[(&str, i32, &[&str], u64)]) -> Corpus {
        let publications = pubs
            .iter()
            .map(|(id, year, cats, c)| Publication {
                pub_id: id.to_string(),
                year: *year,
                categories: cats.iter().map(|s| s.to_string()).collect(),
                citations: *c,
                authors: vec![AuthorSlot { position: 1, researcher_id: None }],
            })
            .collect();
        Corpus::from_parts(
            Taxonomy::default(),
            Roster::default(),
            publications,
            vec![],
            None,
        )
        .unwrap()
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&mut [10.0, 0.0, 3.0]), Some(3.0));
        assert_eq!(median(&mut [2.0, 4.0]), Some(3.0));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn pools_split_by_year_and_category() {
        let c = corpus(&[
            ("a", 2001, &["X"], 0),
            ("b", 2001, &["X"], 3),
            ("c", 2001, &["X"], 10),
            ("d", 2002, &["X"], 7),
        ]);
        let m = compute_medians(&c);
        assert_eq!(m[&(2001, "X".into())], 3.0);
        assert_eq!(m[&(2002, "X".into())], 7.0);
    }

    #[test]
    fn direct_ratio_and_identity() {
        let c = corpus(&[
            ("a", 2001, &["X"], 0),
            ("b", 2001, &["X"], 3),
            ("c", 2001, &["X"], 6),
        ]);
        let imp = article_impact(&c);
        assert_eq!(imp["c"].aii, 2.0);
        assert_eq!(imp["b"].aii, 1.0);
        assert_eq!(imp["a"].aii, 0.0);
    }

    #[test]
    fn multi_category_mean() {
        // pool X medians 2, pool Y median 4; publication m cites 4 and sits in both
        let c = corpus(&[
            ("x1", 2001, &["X"], 1),
            ("x2", 2001, &["X"], 2),
            ("y1", 2001, &["Y"], 4),
            ("y2", 2001, &["Y"], 5),
            ("m", 2001, &["X", "Y"], 4),
        ]);
        let m = compute_medians(&c);
        assert_eq!(m[&(2001, "X".into())], 2.0);
        assert_eq!(m[&(2001, "Y".into())], 4.0);
        let imp = article_impact(&c);
        assert_eq!(imp["m"].aii, 1.5);
        assert_eq!(imp["m"].per_category.len(), 2);
    }

    #[test]
    fn zero_median_falls_back_to_mean_then_zero() {
        let c = corpus(&[
            ("a", 2001, &["S"], 0),
            ("b", 2001, &["S"], 0),
            ("c", 2001, &["S"], 6),
            ("z", 2001, &["Z"], 0),
        ]);
        let imp = article_impact(&c);
        assert_eq!(imp["c"].aii, 3.0);
        assert_eq!(imp["c"].per_category[0].fallback, Fallback::Mean);
        assert_eq!(imp["a"].aii, 0.0);
        assert_eq!(imp["z"].aii, 0.0);
        assert_eq!(imp["z"].per_category[0].fallback, Fallback::Zero);
    }

    #[test]
    fn scale_free_within_pool() {
        let base = [("a", 2001, &["X"][..], 1), ("b", 2001, &["X"][..], 4), ("c", 2001, &["X"][..], 9)];
        let scaled: Vec<_> = base.iter().map(|(i, y, c, n)| (*i, *y, *c, n * 7)).collect();
        let a = article_impact(&corpus(&base));
        let b = article_impact(&corpus(&scaled));
        for k in ["a", "b", "c"] {
            assert!((a[k].aii - b[k].aii).abs() < 1e-12);
        }
    }
}
