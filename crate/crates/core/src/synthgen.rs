//! Seeded synthetic corpora.
//!
//! Institutions get a size factor and a latent quality; quality shifts the
//! log-citation location of the publications they lead, so bibliometric
//! indicators recover it with sampling noise. Panel ratings are a monotone
//! function of each submitted output's impact percentile blended with
//! uniform noise: `peer_noise = 1` makes ratings a deterministic function of
//! impact, `peer_noise = 0` makes them independent of it.
//!
//! All draws come from one ChaCha8 stream seeded by `seed` and consumed in a
//! fixed (sorted) order. Integer draws are platform independent; citation
//! counts go through `exp` and are floored, so a last-ulp libm difference
//! can in principle move a count by one on another platform.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    write_corpus, AuthorSlot, Corpus, CorpusError, PeerOutcome, Publication, Researcher, Roster,
    SizeClass, Taxonomy,
};
use crate::impact::{article_impact, ImpactRecord};
use crate::indicators::excellence_cmp;
use crate::peer_eval::Rating;
use crate::ranklab::average_ranks;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubmissionStrategy {
    #[default]
    BestAii,
    Random,
    WorstAii,
}

impl FromStr for SubmissionStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "best_aii" => Ok(Self::BestAii),
            "random" => Ok(Self::Random),
            "worst_aii" => Ok(Self::WorstAii),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

impl fmt::Display for SubmissionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BestAii => "best_aii",
            Self::Random => "random",
            Self::WorstAii => "worst_aii",
        })
    }
}

/// Staff per active (institution, SDS) cell: discretized lognormal with the
/// given mean, at least 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaffDist {
    pub mean: f64,
    pub sigma: f64,
}

/// Citations: `floor(exp(N(location + pool offset + quality, scale)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CitationDist {
    pub location: f64,
    pub scale: f64,
    /// Std-dev of the per (year, category) location offset.
    pub pool_jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoauthorDist {
    /// Poisson mean of byline slots beyond the lead author.
    pub mean: f64,
    /// Chance that a linked co-author comes from another institution.
    pub cross_institution_prob: f64,
    pub max_authors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_udas: usize,
    /// SDS count per UDA; a single value applies to every UDA.
    pub sds_per_uda: Vec<usize>,
    pub n_institutions: usize,
    /// Chance an institution is active in a UDA.
    pub uda_presence: f64,
    /// Chance an active institution staffs a given SDS of the UDA.
    pub sds_presence: f64,
    pub staff_per_cell: StaffDist,
    /// Lognormal sigma of the institution size factor.
    pub institution_size_sigma: f64,
    /// Std-dev of institution quality on the log-citation scale.
    pub institution_quality_sigma: f64,
    /// Chance a researcher is half-time (fte 0.5).
    pub part_time_prob: f64,
    pub pubs_per_researcher: f64,
    pub years: Vec<i32>,
    pub categories_per_uda: usize,
    pub multi_category_prob: f64,
    pub citation: CitationDist,
    pub coauthors: CoauthorDist,
    pub external_author_prob: f64,
    /// Indices (0-based) of UDAs whose categories are life-science.
    pub life_science_udas: Vec<usize>,
    /// Agreement between panel ratings and impact, 0..=1.
    pub peer_noise: f64,
    /// Researchers per submitted output.
    pub submission_rate: f64,
    pub submission_strategy: SubmissionStrategy,
    /// Percentile cuts for E, G, A (descending).
    pub rating_cuts: [f64; 3],
    pub emit_size_classes: bool,
}

/// Discipline labels used when at most eight UDAs are generated.
pub const UDA_NAMES: [&str; 8] = ["MATH", "PHYS", "CHEM", "EARTH", "BIO", "MED", "AGRI", "ENG"];

impl Default for SynthConfig {
    /// Shaped like the Italian hard-science system of 2001–2003: eight UDAs
    /// with 183 SDSs, 69 universities, ~32k staff, ~84k publications.
    fn default() -> Self {
        Self {
            seed: 42,
            n_udas: 8,
            sds_per_uda: vec![10, 8, 12, 12, 19, 50, 30, 42],
            n_institutions: 69,
            uda_presence: 0.83,
            sds_presence: 0.6,
            staff_per_cell: StaffDist { mean: 5.4, sigma: 0.7 },
            institution_size_sigma: 0.5,
            institution_quality_sigma: 0.6,
            part_time_prob: 0.05,
            pubs_per_researcher: 2.64,
            years: vec![2001, 2002, 2003],
            categories_per_uda: 6,
            multi_category_prob: 0.25,
            citation: CitationDist { location: 1.5, scale: 1.0, pool_jitter: 0.3 },
            coauthors: CoauthorDist { mean: 3.0, cross_institution_prob: 0.2, max_authors: 30 },
            external_author_prob: 0.2,
            life_science_udas: vec![4, 5, 6],
            peer_noise: 0.2,
            submission_rate: 4.0,
            submission_strategy: SubmissionStrategy::BestAii,
            rating_cuts: [0.8, 0.5, 0.2],
            emit_size_classes: true,
        }
    }
}

impl SynthConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::Config(m));
        if self.n_udas == 0 || self.n_institutions == 0 || self.categories_per_uda == 0 {
            return err("n_udas, n_institutions and categories_per_uda must be ≥ 1".into());
        }
        if self.sds_per_uda.is_empty()
            || (self.sds_per_uda.len() != 1 && self.sds_per_uda.len() != self.n_udas)
            || self.sds_per_uda.contains(&0)
        {
            return err("sds_per_uda needs one value or one per uda, all ≥ 1".into());
        }
        if self.years.is_empty() {
            return err("years must be non-empty".into());
        }
        for (name, p) in [
            ("uda_presence", self.uda_presence),
            ("sds_presence", self.sds_presence),
            ("part_time_prob", self.part_time_prob),
            ("multi_category_prob", self.multi_category_prob),
            ("external_author_prob", self.external_author_prob),
            ("coauthors.cross_institution_prob", self.coauthors.cross_institution_prob),
            ("peer_noise", self.peer_noise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return err(format!("{name} = {p} is not a probability"));
            }
        }
        if !(self.staff_per_cell.mean >= 1.0) || self.staff_per_cell.sigma < 0.0 {
            return err("staff_per_cell.mean must be ≥ 1 and sigma ≥ 0".into());
        }
        if !(self.pubs_per_researcher > 0.0) || self.coauthors.mean < 0.0 {
            return err("pubs_per_researcher must be > 0 and coauthors.mean ≥ 0".into());
        }
        if self.coauthors.max_authors == 0 {
            return err("coauthors.max_authors must be ≥ 1".into());
        }
        if !(self.submission_rate > 0.0) {
            return err("submission_rate must be > 0".into());
        }
        let c = self.rating_cuts;
        if !(c[0] >= c[1] && c[1] >= c[2] && (0.0..=1.0).contains(&c[0]) && c[2] >= 0.0) {
            return err("rating_cuts must be descending within [0,1]".into());
        }
        if self.citation.scale < 0.0 || self.citation.pool_jitter < 0.0
            || self.institution_size_sigma < 0.0 || self.institution_quality_sigma < 0.0
        {
            return err("dispersion parameters must be ≥ 0".into());
        }
        if let Some(&u) = self.life_science_udas.iter().find(|&&u| u >= self.n_udas) {
            return err(format!("life_science_udas index {u} out of range"));
        }
        Ok(())
    }

    fn sds_count(&self, uda: usize) -> usize {
        if self.sds_per_uda.len() == 1 {
            self.sds_per_uda[0]
        } else {
            self.sds_per_uda[uda]
        }
    }
}

pub fn uda_name(idx: usize, n_udas: usize) -> String {
    if n_udas <= UDA_NAMES.len() {
        UDA_NAMES[idx].to_string()
    } else {
        format!("UDA{:02}", idx + 1)
    }
}

fn category_name(uda: &str, k: usize) -> String {
    format!("{uda}-C{:02}", k + 1)
}

/// Peer ratings and selection parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmissionParams {
    pub strategy: SubmissionStrategy,
    pub rate: f64,
    pub peer_noise: f64,
    pub rating_cuts: [f64; 3],
}

impl From<&SynthConfig> for SubmissionParams {
    fn from(c: &SynthConfig) -> Self {
        Self {
            strategy: c.submission_strategy,
            rate: c.submission_rate,
            peer_noise: c.peer_noise,
            rating_cuts: c.rating_cuts,
        }
    }
}

/// Number of outputs an institution submits in a UDA: one per `rate`
/// researchers, rounded up, at least one when it has staff.
pub fn submission_quota(staff: f64, rate: f64) -> usize {
    if staff <= 0.0 {
        0
    } else {
        ((staff / rate).ceil() as usize).max(1)
    }
}

fn rating_for(position: f64, cuts: [f64; 3]) -> Rating {
    if position >= cuts[0] {
        Rating::E
    } else if position >= cuts[1] {
        Rating::G
    } else if position >= cuts[2] {
        Rating::A
    } else {
        Rating::L
    }
}

/// Selects each institution's submissions per UDA and rates them.
///
/// Candidates are the publications attributed to the institution in the
/// UDA. Ratings use the mid-rank percentile of each submission's AII among
/// all submissions of the UDA, blended with a uniform draw.
pub fn generate_submissions(
    corpus: &Corpus,
    impact: &BTreeMap<String, ImpactRecord>,
    params: &SubmissionParams,
    rng: &mut impl Rng,
) -> Vec<PeerOutcome> {
    let pubs = corpus.publications();
    // (institution, uda) → candidate publication indices
    let mut candidates: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for idx in 0..pubs.len() {
        let mut seen = std::collections::BTreeSet::new();
        for a in corpus.attributions(idx) {
            if seen.insert((a.institution_id.as_str(), a.uda_id.as_str())) {
                candidates
                    .entry((a.institution_id.as_str(), a.uda_id.as_str()))
                    .or_default()
                    .push(idx);
            }
        }
    }

    let key = |i: usize| (impact[&pubs[i].pub_id].aii, pubs[i].citations, pubs[i].pub_id.as_str());
    let mut submitted: BTreeMap<&str, Vec<(&str, usize)>> = BTreeMap::new();
    for ((inst, uda), mut cand) in candidates {
        let quota = submission_quota(corpus.staff_inst_uda(inst, uda), params.rate);
        let chosen: Vec<usize> = match params.strategy {
            SubmissionStrategy::BestAii => {
                cand.sort_by(|&a, &b| excellence_cmp(key(a), key(b)));
                cand.into_iter().take(quota).collect()
            }
            SubmissionStrategy::WorstAii => {
                cand.sort_by(|&a, &b| excellence_cmp(key(b), key(a)));
                cand.into_iter().take(quota).collect()
            }
            SubmissionStrategy::Random => {
                cand.shuffle(rng);
                cand.into_iter().take(quota).collect()
            }
        };
        submitted.entry(uda).or_default().extend(chosen.into_iter().map(|i| (inst, i)));
    }

    let mut out = Vec::new();
    for (uda, subs) in submitted {
        let aii: Vec<f64> = subs.iter().map(|&(_, i)| key(i).0).collect();
        let ranks = average_ranks(&aii);
        let n = subs.len();
        for ((inst, _), rank) in subs.iter().zip(ranks) {
            let pct = if n > 1 { (rank - 1.0) / (n - 1) as f64 } else { 0.5 };
            let noise: f64 = rng.gen();
            let position = params.peer_noise * pct + (1.0 - params.peer_noise) * noise;
            out.push(PeerOutcome {
                institution_id: inst.to_string(),
                uda_id: uda.to_string(),
                rating: rating_for(position, params.rating_cuts),
            });
        }
    }
    out
}

fn lognormal_with_mean(mean: f64, sigma: f64) -> LogNormal<f64> {
    LogNormal::new(mean.ln() - sigma * sigma / 2.0, sigma).expect("valid lognormal")
}

/// Builds the in-memory corpus (without peer outcomes).
pub fn generate_corpus(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Corpus, SynthError> {
    config.validate()?;
    let udas: Vec<String> = (0..config.n_udas).map(|u| uda_name(u, config.n_udas)).collect();

    let mut tax_entries = Vec::new();
    let mut sds_by_uda: Vec<Vec<String>> = Vec::new();
    for (u, name) in udas.iter().enumerate() {
        let list: Vec<String> = (0..config.sds_count(u)).map(|k| format!("{name}/{:02}", k + 1)).collect();
        tax_entries.extend(list.iter().map(|s| (s.clone(), name.clone())));
        sds_by_uda.push(list);
    }
    let categories: Vec<Vec<String>> = udas
        .iter()
        .map(|u| (0..config.categories_per_uda).map(|k| category_name(u, k)).collect())
        .collect();
    let life_science: Vec<String> = config
        .life_science_udas
        .iter()
        .flat_map(|&u| categories[u].iter().cloned())
        .collect();
    let taxonomy = Taxonomy::new(tax_entries, life_science)?;

    let size_dist = lognormal_with_mean(1.0, config.institution_size_sigma);
    let quality_dist = Normal::new(0.0, config.institution_quality_sigma).expect("sigma ≥ 0");
    let institutions: Vec<(String, f64, f64)> = (0..config.n_institutions)
        .map(|i| {
            let size = size_dist.sample(rng);
            let quality = quality_dist.sample(rng);
            (format!("INST{:03}", i + 1), size, quality)
        })
        .collect();

    // Roster, and researcher pools per (institution, uda) and per uda.
    let mut researchers = Vec::new();
    let mut lead_info: Vec<(usize, usize)> = Vec::new(); // (institution, uda) per researcher
    let mut pool_iu: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut pool_u: Vec<Vec<usize>> = vec![Vec::new(); config.n_udas];
    for (i, (inst, size, _)) in institutions.iter().enumerate() {
        for u in 0..config.n_udas {
            if !rng.gen_bool(config.uda_presence) {
                continue;
            }
            let sds_list = &sds_by_uda[u];
            let mut active: Vec<bool> = sds_list.iter().map(|_| rng.gen_bool(config.sds_presence)).collect();
            if !active.contains(&true) {
                let k = rng.gen_range(0..active.len());
                active[k] = true;
            }
            let cell = lognormal_with_mean(config.staff_per_cell.mean * size, config.staff_per_cell.sigma);
            for (s, sds) in sds_list.iter().enumerate() {
                if !active[s] {
                    continue;
                }
                let n = (cell.sample(rng).round() as usize).max(1);
                for _ in 0..n {
                    let idx = researchers.len();
                    let fte = if rng.gen_bool(config.part_time_prob) { 0.5 } else { 1.0 };
                    researchers.push(Researcher {
                        researcher_id: format!("R{:06}", idx + 1),
                        institution_id: inst.clone(),
                        sds_id: sds.clone(),
                        fte,
                    });
                    lead_info.push((i, u));
                    pool_iu.entry((i, u)).or_default().push(idx);
                    pool_u[u].push(idx);
                }
            }
        }
    }
    if researchers.is_empty() {
        return Err(SynthError::Config("configuration produced an empty roster".into()));
    }

    let pool_offset = Normal::new(0.0, config.citation.pool_jitter).expect("jitter ≥ 0");
    let mut offsets: BTreeMap<(i32, usize, usize), f64> = BTreeMap::new();
    for &y in &config.years {
        for u in 0..config.n_udas {
            for k in 0..config.categories_per_uda {
                offsets.insert((y, u, k), pool_offset.sample(rng));
            }
        }
    }

    let pubs_per = Poisson::new(config.pubs_per_researcher).expect("λ > 0");
    let extra_slots = (config.coauthors.mean > 0.0)
        .then(|| Poisson::new(config.coauthors.mean).expect("λ > 0"));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut publications = Vec::new();
    for (lead, &(i, u)) in lead_info.iter().enumerate() {
        let count = pubs_per.sample(rng) as usize;
        for _ in 0..count {
            let year = config.years[rng.gen_range(0..config.years.len())];
            let k = rng.gen_range(0..config.categories_per_uda);
            let mut cats = vec![categories[u][k].clone()];
            if config.categories_per_uda > 1 && rng.gen_bool(config.multi_category_prob) {
                let mut k2 = rng.gen_range(0..config.categories_per_uda - 1);
                if k2 >= k {
                    k2 += 1;
                }
                cats.push(categories[u][k2].clone());
            }

            let extra = extra_slots.as_ref().map_or(0, |d| d.sample(rng) as usize);
            let extra = extra.min(config.coauthors.max_authors - 1);
            let mut slots: Vec<Option<usize>> = vec![Some(lead)];
            for _ in 0..extra {
                if rng.gen_bool(config.external_author_prob) {
                    slots.push(None);
                    continue;
                }
                let pool = if rng.gen_bool(config.coauthors.cross_institution_prob) {
                    &pool_u[u]
                } else {
                    &pool_iu[&(i, u)]
                };
                let pick = pool[rng.gen_range(0..pool.len())];
                // a researcher appears at most once per byline
                slots.push((!slots.contains(&Some(pick))).then_some(pick));
            }
            slots.shuffle(rng);

            let mut location = config.citation.location + institutions[i].2;
            let cat_offsets: Vec<f64> = cats
                .iter()
                .map(|c| {
                    let kk = categories[u].iter().position(|x| x == c).expect("own category");
                    offsets[&(year, u, kk)]
                })
                .collect();
            location += cat_offsets.iter().sum::<f64>() / cat_offsets.len() as f64;
            let z: f64 = unit.sample(rng);
            let citations = (location + config.citation.scale * z).exp().floor() as u64;

            publications.push(Publication {
                pub_id: format!("P{:07}", publications.len() + 1),
                year,
                categories: cats,
                citations,
                authors: slots
                    .into_iter()
                    .enumerate()
                    .map(|(pos, r)| AuthorSlot {
                        position: pos as u32 + 1,
                        researcher_id: r.map(|x| researchers[x].researcher_id.clone()),
                    })
                    .collect(),
            });
        }
    }

    let roster = Roster::new(researchers)?;
    let mut corpus = Corpus::from_parts(taxonomy, roster, publications, vec![], None)?;
    if config.emit_size_classes {
        let classes = size_classes(&corpus);
        corpus = Corpus::from_parts(
            corpus.taxonomy().clone(),
            corpus.roster().clone(),
            corpus.publications().to_vec(),
            vec![],
            Some(classes),
        )?;
    }
    Ok(corpus)
}

/// Staff quartiles within each UDA: largest quarter `very_large` and so on.
fn size_classes(corpus: &Corpus) -> BTreeMap<(String, String), SizeClass> {
    let mut out = BTreeMap::new();
    for uda in corpus.taxonomy().udas() {
        let staff: BTreeMap<String, f64> = corpus
            .institutions_in_uda(uda)
            .into_iter()
            .map(|i| (i.to_string(), corpus.staff_inst_uda(i, uda)))
            .collect();
        let Ok(list) = crate::ranklab::build_ranklist(&staff, uda) else { continue };
        for r in list.rows {
            let class = match r.quartile {
                1 => SizeClass::VeryLarge,
                2 => SizeClass::Large,
                3 => SizeClass::Medium,
                _ => SizeClass::Small,
            };
            out.insert((r.institution_id, uda.to_string()), class);
        }
    }
    out
}

/// Full generation: corpus plus rated submissions.
pub fn generate_in_memory(config: &SynthConfig) -> Result<Corpus, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let corpus = generate_corpus(config, &mut rng)?;
    let impact = article_impact(&corpus);
    let outcomes = generate_submissions(&corpus, &impact, &config.into(), &mut rng);
    Ok(Corpus::from_parts(
        corpus.taxonomy().clone(),
        corpus.roster().clone(),
        corpus.publications().to_vec(),
        outcomes,
        corpus.size_classes().cloned(),
    )?)
}

/// Generates a corpus and writes it to `out`.
pub fn generate(config: &SynthConfig, out: impl AsRef<Path>) -> Result<Corpus, SynthError> {
    let corpus = generate_in_memory(config)?;
    write_corpus(&corpus, out)?;
    Ok(corpus)
}
