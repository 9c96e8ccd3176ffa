//! Fractional author credit per (institution, SDS).
//!
//! Outside the life sciences every byline slot weighs 1/A. For publications
//! in a life-science category the byline position matters: when the first
//! and last author are in the same institution they take 40% each and the
//! others share 20%; otherwise first and last take 30% each, second and
//! second-to-last 15% each, and the others share 10%. When those named roles
//! fall on the same slot (short bylines) the slot sums its roles and the
//! vector is rescaled to total 1. Unlinked slots feed `external_share`.

use std::collections::BTreeMap;

use crate::corpus::{Corpus, Publication};

pub const EXTERNAL: &str = "_external";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Uniform,
    Positional,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Uniform => "uniform",
            Scheme::Positional => "positional",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreditShare {
    pub pub_id: String,
    /// (institution_id, sds_id) → weight
    pub shares: BTreeMap<(String, String), f64>,
    pub external_share: f64,
    pub scheme: Scheme,
}

impl CreditShare {
    pub fn total(&self) -> f64 {
        self.shares.values().sum::<f64>() + self.external_share
    }
}

pub fn uniform_weights(authors: usize) -> Vec<f64> {
    vec![1.0 / authors as f64; authors]
}

/// Positional weights for `authors` slots. `same_institution` selects the
/// 40/20/40 split; otherwise the 30/15/10/15/30 split.
pub fn positional_weights(authors: usize, same_institution: bool) -> Vec<f64> {
    assert!(authors > 0);
    let last = authors - 1;
    let mut w = vec![0.0; authors];
    let mut named = vec![false; authors];
    let mut assign = |w: &mut Vec<f64>, slot: usize, x: f64| {
        w[slot] += x;
        named[slot] = true;
    };
    let others_pool = if same_institution {
        assign(&mut w, 0, 0.40);
        assign(&mut w, last, 0.40);
        0.20
    } else {
        assign(&mut w, 0, 0.30);
        assign(&mut w, last, 0.30);
        assign(&mut w, 1.min(last), 0.15);
        assign(&mut w, last.saturating_sub(1), 0.15);
        0.10
    };
    let others: Vec<usize> = (0..authors).filter(|&i| !named[i]).collect();
    for &i in &others {
        w[i] += others_pool / others.len() as f64;
    }
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    w
}

pub fn scheme_for(publication: &Publication, corpus: &Corpus) -> Scheme {
    let tax = corpus.taxonomy();
    if publication.categories.iter().any(|c| tax.is_life_science(c)) {
        Scheme::Positional
    } else {
        Scheme::Uniform
    }
}

/// First and last authors both linked and in the same institution.
fn first_last_same_institution(publication: &Publication, corpus: &Corpus) -> bool {
    let inst = |slot: Option<&crate::corpus::AuthorSlot>| {
        slot.and_then(|s| s.researcher_id.as_deref())
            .and_then(|id| corpus.roster().get(id))
            .map(|r| r.institution_id.as_str())
    };
    match (inst(publication.authors.first()), inst(publication.authors.last())) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    }
}

pub fn allocate_credit(publication: &Publication, corpus: &Corpus) -> CreditShare {
    let scheme = scheme_for(publication, corpus);
    let n = publication.authors.len();
    let weights = match scheme {
        Scheme::Uniform => uniform_weights(n),
        Scheme::Positional => {
            positional_weights(n, first_last_same_institution(publication, corpus))
        }
    };
    let mut shares: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut external_share = 0.0;
    for (slot, w) in publication.authors.iter().zip(weights) {
        match slot.researcher_id.as_deref().and_then(|id| corpus.roster().get(id)) {
            Some(r) => {
                *shares
                    .entry((r.institution_id.clone(), r.sds_id.clone()))
                    .or_insert(0.0) += w
            }
            None => external_share += w,
        }
    }
    CreditShare { pub_id: publication.pub_id.clone(), shares, external_share, scheme }
}

/// n_{j,i,s}: the share of (institution, sds), zero when absent.
pub fn institution_fraction(share: &CreditShare, institution: &str, sds: &str) -> f64 {
    share
        .shares
        .get(&(institution.to_string(), sds.to_string()))
        .copied()
        .unwrap_or(0.0)
}

/// Credit for every publication, in corpus order.
pub fn allocate_all(corpus: &Corpus) -> Vec<CreditShare> {
    corpus
        .publications()
        .iter()
        .map(|p| allocate_credit(p, corpus))
        .collect()
}

pub fn write_credit_audit_csv<W: std::io::Write>(
    credits: &[CreditShare],
    w: &mut csv::Writer<W>,
) -> csv::Result<()> {
    w.write_record(["pub_id", "institution_id", "sds_id", "weight", "scheme"])?;
    for c in credits {
        for ((inst, sds), weight) in &c.shares {
            w.write_record([&c.pub_id, inst, sds, &weight.to_string(), c.scheme.as_str()])?;
        }
        if c.external_share > 0.0 {
            w.write_record([
                c.pub_id.as_str(),
                EXTERNAL,
                "",
                &c.external_share.to_string(),
                c.scheme.as_str(),
            ])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AuthorSlot, Researcher, Roster, Taxonomy};

    fn corpus_with(pubs: Vec<Publication>) -> Corpus {
        let tax = Taxonomy::new(
            [("S1".into(), "U".into()), ("S2".into(), "U".into()), ("S3".into(), "V".into())],
            ["Cell Biology".to_string()],
        )
        .unwrap();
        let r = |id: &str, inst: &str, sds: &str| Researcher {
            researcher_id: id.into(),
            institution_id: inst.into(),
            sds_id: sds.into(),
            fte: 1.0,
        };
        let roster = Roster::new([
            r("a", "U1", "S1"),
            r("b", "U1", "S1"),
            r("c", "U2", "S2"),
            r("d", "U1", "S3"),
            r("e", "U3", "S2"),
        ])
        .unwrap();
        Corpus::from_parts(tax, roster, pubs, vec![], None).unwrap()
    }

    fn publication(cat: &str, authors: &[Option<&str>]) -> Publication {
        Publication {
            pub_id: "p".into(),
            year: 2002,
            categories: vec![cat.into()],
            citations: 1,
            authors: authors
                .iter()
                .enumerate()
                .map(|(i, a)| AuthorSlot { position: i as u32 + 1, researcher_id: a.map(String::from) })
                .collect(),
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn uniform_fractions() {
        let p = publication("Physics", &[Some("a"), Some("b"), Some("c"), None]);
        let c = corpus_with(vec![p.clone()]);
        let s = allocate_credit(&p, &c);
        assert_eq!(s.scheme, Scheme::Uniform);
        assert!(close(institution_fraction(&s, "U1", "S1"), 0.5));
        assert!(close(institution_fraction(&s, "U2", "S2"), 0.25));
        assert!(close(s.external_share, 0.25));
        assert_eq!(institution_fraction(&s, "U9", "S1"), 0.0);
    }

    #[test]
    fn same_institution_first_last() {
        let w = positional_weights(5, true);
        let expect = [0.4, 0.2 / 3.0, 0.2 / 3.0, 0.2 / 3.0, 0.4];
        assert!(w.iter().zip(expect).all(|(a, b)| close(*a, b)), "{w:?}");

        let p = publication("Cell Biology", &[Some("a"), Some("c"), None, Some("e"), Some("b")]);
        let c = corpus_with(vec![p.clone()]);
        let s = allocate_credit(&p, &c);
        assert_eq!(s.scheme, Scheme::Positional);
        assert!(close(institution_fraction(&s, "U1", "S1"), 0.8));
        assert!(close(institution_fraction(&s, "U2", "S2"), 0.2 / 3.0));
        assert!(close(s.external_share, 0.2 / 3.0));
    }

    #[test]
    fn different_institutions_six_authors() {
        let w = positional_weights(6, false);
        let expect = [0.30, 0.15, 0.05, 0.05, 0.15, 0.30];
        assert!(w.iter().zip(expect).all(|(a, b)| close(*a, b)), "{w:?}");
    }

    #[test]
    fn short_bylines_renormalize() {
        // A = 1 .. 4, both branches
        let table: [(usize, bool, &[f64]); 8] = [
            (1, true, &[1.0]),
            (1, false, &[1.0]),
            (2, true, &[0.5, 0.5]),
            (2, false, &[0.5, 0.5]),
            (3, true, &[0.4, 0.2, 0.4]),
            (3, false, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
            (4, true, &[0.4, 0.1, 0.1, 0.4]),
            (4, false, &[1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0]),
        ];
        for (a, same, expect) in table {
            let w = positional_weights(a, same);
            assert!(
                w.iter().zip(expect).all(|(x, y)| close(*x, *y)),
                "A={a} same={same}: {w:?}"
            );
        }
    }

    #[test]
    fn unlinked_last_author_forces_different_branch() {
        let p = publication("Cell Biology", &[Some("a"), Some("b"), Some("c"), None]);
        let c = corpus_with(vec![p.clone()]);
        let s = allocate_credit(&p, &c);
        assert!(close(s.external_share, 1.0 / 3.0));
        assert!(close(institution_fraction(&s, "U1", "S1"), 0.5));
    }

    #[test]
    fn same_institution_different_sds_are_separate() {
        let p = publication("Physics", &[Some("a"), Some("d")]);
        let c = corpus_with(vec![p.clone()]);
        let s = allocate_credit(&p, &c);
        assert_eq!(s.shares.len(), 2);
        assert!(close(institution_fraction(&s, "U1", "S3"), 0.5));
    }

    #[test]
    fn single_linked_author_takes_all() {
        let p = publication("Physics", &[Some("a")]);
        let c = corpus_with(vec![p.clone()]);
        assert_eq!(institution_fraction(&allocate_credit(&p, &c), "U1", "S1"), 1.0);
    }
}
