//! Whole-pipeline properties on generated corpora.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use research_assess::corpus::{write_corpus, StaffScope};
use research_assess::credit::write_credit_audit_csv;
use research_assess::funding::{allocate, funding_delta, DEFAULT_WEIGHTS};
use research_assess::impact::{compute_pool_stats, write_impact_csv};
use research_assess::indicators::{write_sds_csv, RpNational, Scenario};
use research_assess::peer_eval::{peer_rank_table, Rating};
use research_assess::pipeline;
use research_assess::ranklab::{build_ranklist, leap_matrix, shift_report};
use research_assess::synthgen::{
    generate, generate_corpus, generate_in_memory, generate_submissions, SubmissionParams,
    SubmissionStrategy, SynthConfig,
};
use research_assess::{load_corpus, Corpus};

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| generate_in_memory(&SynthConfig::default()).unwrap())
}

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        n_udas: 3,
        sds_per_uda: vec![4, 3, 5],
        n_institutions: 15,
        life_science_udas: vec![1],
        ..SynthConfig::default()
    }
}

#[test]
fn default_config_has_the_reference_shape() {
    let c = corpus();
    let udas = c.taxonomy().udas();
    assert_eq!(udas.len(), 8);
    assert!(c.institutions().len() <= 69 && c.institutions().len() >= 60);
    let staff: f64 = udas.iter().map(|u| c.staff_uda(u)).sum();
    let researchers = c.roster().len();
    assert!((25_000..=39_000).contains(&researchers), "{researchers}");
    assert!(staff <= researchers as f64);
    let pubs = c.publications().len() as f64;
    assert!((pubs - 84_289.0).abs() / 84_289.0 <= 0.2, "{pubs}");
}

#[test]
fn round_trip_reports_same_staff_totals() {
    let dir = tempfile::tempdir().unwrap();
    let original = generate(&small(3), dir.path()).unwrap();
    let loaded = load_corpus(dir.path()).unwrap();
    assert_eq!(loaded.publications(), original.publications());
    assert_eq!(loaded.roster(), original.roster());
    assert_eq!(loaded.peer_outcomes(), original.peer_outcomes());
    assert_eq!(loaded.size_classes(), original.size_classes());
    for u in original.taxonomy().udas() {
        assert_eq!(loaded.staff_uda(u), original.staff_uda(u));
    }

    let again = tempfile::tempdir().unwrap();
    write_corpus(&loaded, again.path()).unwrap();
    let reloaded = load_corpus(again.path()).unwrap();
    assert_eq!(reloaded.publications(), loaded.publications());
}

#[test]
fn same_seed_writes_identical_directories() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = SynthConfig { seed: 42, ..small(0) };
    generate(&cfg, a.path()).unwrap();
    generate(&cfg, b.path()).unwrap();
    let files = |d: &std::path::Path| {
        let mut v: Vec<_> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(&p).unwrap()))
            .collect();
        v.sort();
        v
    };
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
}

#[test]
fn uda_staff_is_sum_over_its_sds() {
    let c = corpus();
    for u in c.taxonomy().udas() {
        let by_sds: f64 = c.taxonomy().sds_of(u).iter().map(|s| c.staff_sds(s)).sum();
        let direct: f64 = c
            .roster()
            .iter()
            .filter(|r| c.taxonomy().uda_of(&r.sds_id) == Some(u))
            .map(|r| r.fte)
            .sum();
        assert!((c.staff_uda(u) - direct).abs() < 1e-9);
        assert!((by_sds - direct).abs() < 1e-9);
        assert!((c.staff(StaffScope::uda(u)).unwrap() - direct).abs() < 1e-9);
    }
}

#[test]
fn pool_median_matches_sort_and_pick() {
    let cfg = SynthConfig {
        n_udas: 1,
        sds_per_uda: vec![2],
        n_institutions: 40,
        categories_per_uda: 1,
        multi_category_prob: 0.0,
        years: vec![2002],
        life_science_udas: vec![],
        ..SynthConfig::default()
    };
    let mut checked = 0;
    for seed in 0..30 {
        let c = generate_in_memory(&SynthConfig { seed, ..cfg.clone() }).unwrap();
        let n = c.publications().len();
        // keep an odd-sized prefix of 1001 draws where available
        let take = if n >= 1001 { 1001 } else { n - (1 - n % 2) };
        let mut cites: Vec<u64> = c.publications()[..take].iter().map(|p| p.citations).collect();
        let sub = Corpus::from_parts(
            c.taxonomy().clone(),
            c.roster().clone(),
            c.publications()[..take].to_vec(),
            vec![],
            None,
        )
        .unwrap();
        let stats = compute_pool_stats(&sub);
        assert_eq!(stats.len(), 1);
        cites.sort_unstable();
        let pick = cites[take / 2] as f64;
        assert_eq!(stats.values().next().unwrap().median, pick);
        if take == 1001 {
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn credit_sums_to_one_on_every_publication() {
    let c = corpus();
    let run = pipeline::productivity(c, &pipeline::impact(c), RpNational::Weighted).unwrap();
    assert_eq!(run.credits.len(), c.publications().len());
    for share in &run.credits {
        assert!((share.total() - 1.0).abs() < 1e-9, "{}", share.pub_id);
    }
}

fn read_rows(bytes: &[u8]) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_reader(bytes);
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            headers.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect()
        })
        .collect()
}

fn csv_bytes(fill: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w).unwrap();
    w.into_inner().unwrap()
}

#[test]
fn sds_cells_match_resummation_of_audit_files() {
    let c = generate_in_memory(&small(5)).unwrap();
    let impact = pipeline::impact(&c);
    let run = pipeline::productivity(&c, &impact, RpNational::Weighted).unwrap();
    let credit = read_rows(&csv_bytes(|w| write_credit_audit_csv(&run.credits, w)));
    let aii: BTreeMap<String, f64> = read_rows(&csv_bytes(|w| write_impact_csv(&impact, w)))
        .into_iter()
        .map(|r| (r["pub_id"].clone(), r["aii"].parse().unwrap()))
        .collect();
    let cells = read_rows(&csv_bytes(|w| write_sds_csv(&run.sds, w)));

    let mut sums: BTreeMap<(String, String), (f64, BTreeSet<String>)> = BTreeMap::new();
    for row in &credit {
        let w: f64 = row["weight"].parse().unwrap();
        let e = sums.entry((row["institution_id"].clone(), row["sds_id"].clone())).or_default();
        e.0 += aii[&row["pub_id"]] * w;
        e.1.insert(row["pub_id"].clone());
    }
    let staff: BTreeMap<(String, String), f64> = c
        .roster()
        .iter()
        .fold(BTreeMap::new(), |mut m, r| {
            *m.entry((r.institution_id.clone(), r.sds_id.clone())).or_default() += r.fte;
            m
        });
    assert!(!cells.is_empty());
    for cell in &cells {
        let key = (cell["institution_id"].clone(), cell["sds_id"].clone());
        let (total, pubs) = sums.get(&key).cloned().unwrap_or_default();
        let credited: f64 = cell["credited_impact"].parse().unwrap();
        assert!((credited - total).abs() < 1e-9, "{key:?}");
        assert_eq!(cell["n_pubs"].parse::<usize>().unwrap(), pubs.len());
        let rp: f64 = cell["rp"].parse().unwrap();
        let expected = if pubs.is_empty() { 0.0 } else { total / staff[&key] };
        assert!((rp - expected).abs() < 1e-9, "{key:?}: {rp} vs {expected}");
    }
}

#[test]
fn national_mean_of_uda_productivity_is_one() {
    for c in [corpus().clone(), generate_in_memory(&small(8)).unwrap()] {
        let run = pipeline::productivity(&c, &pipeline::impact(&c), RpNational::Weighted).unwrap();
        for (u, rows) in &run.uda {
            // the identity needs every SDS of the UDA to have RP_s > 0
            if c.taxonomy().sds_of(u).iter().any(|s| c.staff_sds(s) > 0.0 && run.national.get(*s).copied().unwrap_or(0.0) == 0.0) {
                continue;
            }
            let staff: f64 = rows.iter().map(|r| r.staff).sum();
            let mean = rows.iter().map(|r| r.staff * r.rp).sum::<f64>() / staff;
            assert!((mean - 1.0).abs() < 1e-9, "{u}: {mean}");
        }
    }
}

#[test]
fn leap_buckets_and_funding_deltas_conserve() {
    let c = corpus();
    let impact = pipeline::impact(c);
    let a = pipeline::excellence_score_table(&pipeline::excellence(c, &impact, Scenario::A).unwrap());
    let b = pipeline::excellence_score_table(&pipeline::excellence(c, &impact, Scenario::B).unwrap());
    let p = pipeline::productivity_score_table(&pipeline::productivity(c, &impact, RpNational::Weighted).unwrap());
    for (u, scores) in &b {
        let left = build_ranklist(scores, u).unwrap();
        let right = build_ranklist(&p[u], u).unwrap();
        let report = shift_report(&left, &right).unwrap();
        assert_eq!(report.leaps.total(), report.n);
        assert_eq!(leap_matrix(&left, &right).unwrap(), report.leaps);

        // same institution set and staff on both sides
        let common: BTreeMap<String, f64> =
            a[u].iter().filter(|(k, _)| scores.contains_key(*k)).map(|(k, v)| (k.clone(), *v)).collect();
        let other: BTreeMap<String, f64> =
            scores.iter().filter(|(k, _)| common.contains_key(*k)).map(|(k, v)| (k.clone(), *v)).collect();
        let staff: BTreeMap<String, f64> = common.keys().map(|k| (k.clone(), c.staff_inst_uda(k, u))).collect();
        let budget = 1.0e7;
        let fl = allocate(&build_ranklist(&common, u).unwrap(), &staff, budget, DEFAULT_WEIGHTS).unwrap();
        let fr = allocate(&build_ranklist(&other, u).unwrap(), &staff, budget, DEFAULT_WEIGHTS).unwrap();
        let sum: f64 = funding_delta(&fl, &fr).unwrap().iter().map(|d| d.delta).sum();
        assert!(sum.abs() <= 1e-9 * budget, "{u}: {sum}");
    }
}

#[test]
fn noise_free_ratings_reach_top_grade_within_quota() {
    let cfg = SynthConfig { peer_noise: 1.0, ..small(11) };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = generate_corpus(&cfg, &mut rng).unwrap();
    let impact = pipeline::impact(&c);
    let params = SubmissionParams::from(&cfg);
    let subs = generate_submissions(&c, &impact, &params, &mut rng);
    // with noise-free ratings the best AII submission of each UDA is rated E
    let mut udas_with_e = BTreeSet::new();
    for s in &subs {
        if s.rating == Rating::E {
            udas_with_e.insert(s.uda_id.clone());
        }
    }
    assert_eq!(udas_with_e.len(), c.taxonomy().udas().len());
    let per_cell = subs.iter().fold(BTreeMap::new(), |mut m: BTreeMap<(String, String), usize>, s| {
        *m.entry((s.institution_id.clone(), s.uda_id.clone())).or_default() += 1;
        m
    });
    for ((inst, uda), n) in per_cell {
        let staff = c.staff_inst_uda(&inst, &uda);
        assert!(n <= (staff / cfg.submission_rate).ceil().max(1.0) as usize);
    }
}

#[test]
fn random_submissions_move_peer_rankings() {
    let base = SynthConfig { peer_noise: 1.0, ..small(12) };
    let run = |strategy| {
        let c = generate_in_memory(&SynthConfig { submission_strategy: strategy, ..base.clone() }).unwrap();
        c.taxonomy()
            .udas()
            .iter()
            .map(|u| {
                let t = peer_rank_table(&c, u).unwrap();
                let scores = t.rows.iter().map(|r| (r.summary.institution_id.clone(), r.summary.score)).collect();
                (u.to_string(), build_ranklist(&scores, u).unwrap())
            })
            .collect::<BTreeMap<_, _>>()
    };
    let best = run(SubmissionStrategy::BestAii);
    let random = run(SubmissionStrategy::Random);
    let moved: f64 = best
        .iter()
        .map(|(u, l)| shift_report(l, &random[u]).unwrap().percentile.var_pct)
        .sum();
    assert!(moved > 0.0);
}
