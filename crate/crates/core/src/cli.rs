//! Command-line front end.
//!
//! Every command writes its outputs into `--out` through a temp-file and
//! rename, then drops a `<command>.manifest.json` sidecar listing inputs and
//! outputs with their SHA-256 digests. Exit codes: 1 usage, 2 validation,
//! 3 computation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::corpus::{
    load_corpus, Corpus, CorpusError, Severity, LIFE_SCIENCE_FILE, PEER_FILE, PUBLICATIONS_FILE,
    RESEARCHERS_FILE, SIZE_CLASS_FILE, TAXONOMY_FILE,
};
use crate::credit::write_credit_audit_csv;
use crate::error::ComputeError;
use crate::funding::{allocate, funding_delta, write_delta_csv, write_funding_csv, DEFAULT_WEIGHTS};
use crate::impact::{write_impact_audit_csv, write_impact_csv};
use crate::indicators::{
    write_excellence_csv, write_sds_csv, write_uda_csv, RpNational, Scenario, EXCELLENCE_HEADER,
    UDA_HEADER,
};
use crate::peer_eval::{write_peer_csv, PEER_CSV_HEADER};
use crate::pipeline::{self, ScoreTable};
use crate::ranklab::{build_ranklist, shift_report, ShiftReport};
use crate::synthgen::{self, SynthConfig, SynthError};

#[derive(Debug, Parser)]
#[command(name = "rassess", version, about = "Peer-review and bibliometric research assessment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic corpus.
    Synth {
        /// JSON config; fields not given take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load a corpus and print validation findings.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Peer quality index and rank tables per UDA.
    Peer(CorpusArgs),
    /// Article impact and the excellence indicator.
    Excellence {
        #[command(flatten)]
        io: CorpusArgs,
        /// A or B; both when omitted.
        #[arg(long)]
        scenario: Option<Scenario>,
    },
    /// Fractional-credit research productivity at SDS and UDA level.
    Productivity {
        #[command(flatten)]
        io: CorpusArgs,
        #[arg(long, default_value = "weighted")]
        rp_national: RpNational,
    },
    /// Compare two score tables per UDA.
    Compare {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Score column of the left file (auto-detected when omitted).
        #[arg(long)]
        left_column: Option<String>,
        #[arg(long)]
        right_column: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Allocate a budget per UDA over quartile classes.
    Fund {
        /// Score table whose quartiles define the classes.
        #[arg(long)]
        ranking: PathBuf,
        /// CSV with institution_id, optional uda_id, and staff (or rs_i).
        #[arg(long)]
        staff: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        budget: f64,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_WEIGHTS)]
        weights: Vec<f64>,
        /// Second score table; writes per-institution funding deltas.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Restrict to one UDA.
        #[arg(long)]
        uda: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("computation: {0}")]
    Computation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Computation(_) => 3,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ComputeError> for CliError {
    fn from(e: ComputeError) -> Self {
        CliError::Computation(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Config(m) => CliError::Validation(m),
            SynthError::Corpus(c) => CliError::Computation(c.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Computation(format!("{}: {e}", path.display()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Digest over the corpus files present in `dir`, in a fixed order.
pub fn corpus_digest(dir: &Path) -> Result<String, CliError> {
    let mut h = Sha256::new();
    for name in [
        TAXONOMY_FILE,
        LIFE_SCIENCE_FILE,
        RESEARCHERS_FILE,
        PUBLICATIONS_FILE,
        PEER_FILE,
        SIZE_CLASS_FILE,
    ] {
        let p = dir.join(name);
        if p.exists() {
            let bytes = fs::read(&p).map_err(|e| io_err(&p, e))?;
            h.update(name.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
    }
    Ok(hex(&h.finalize()))
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus_digest: Option<String>,
    pub inputs: Vec<FileDigest>,
    pub tool_version: String,
    pub timestamp: String,
    pub outputs: Vec<FileDigest>,
}

/// Collects outputs of one command; files appear only once fully written.
struct OutputDir {
    dir: PathBuf,
    written: Vec<FileDigest>,
}

impl OutputDir {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| io_err(&target, e))?;
        self.written.push(FileDigest { file: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn write_csv(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        fill(&mut w).map_err(|e| CliError::Computation(e.to_string()))?;
        let bytes = w.into_inner().map_err(|e| CliError::Computation(e.to_string()))?;
        self.write(name, &bytes)
    }

    fn finish(
        self,
        command: &str,
        arguments: &[String],
        corpus_digest: Option<String>,
        inputs: Vec<FileDigest>,
    ) -> Result<Vec<FileDigest>, CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            arguments: arguments.to_vec(),
            corpus_digest,
            inputs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            outputs: self.written,
        };
        let name = format!("{command}.manifest.json");
        let path = self.dir.join(&name);
        let json = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::Computation(e.to_string()))?;
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, json).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
        Ok(manifest.outputs)
    }
}

fn file_digest(path: &Path) -> Result<FileDigest, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(FileDigest { file: path.display().to_string(), sha256: sha256_hex(&bytes) })
}

fn load(dir: &Path) -> Result<Corpus, CliError> {
    let corpus = load_corpus(dir)?;
    let errors: Vec<String> = corpus
        .validate()
        .into_iter()
        .filter(|f| f.severity == Severity::Error)
        .map(|f| f.message)
        .collect();
    if !errors.is_empty() {
        return Err(CliError::Validation(errors.join("; ")));
    }
    Ok(corpus)
}

/// File-name-safe form of an identifier.
pub fn slug(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

const SCORE_COLUMNS: [&str; 4] = ["score", "R", "I", "rp"];

/// Reads `institution_id,uda_id,<score>` rows into uda → institution → score.
/// Blank scores are skipped. Without `uda_id`, all rows go to UDA `all`.
pub fn read_score_table(path: &Path, column: Option<&str>) -> Result<ScoreTable, CliError> {
    let bad = |m: String| CliError::Validation(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let pos = |name: &str| headers.iter().position(|h| h == name);
    let inst = pos("institution_id").ok_or_else(|| bad("missing institution_id column".into()))?;
    let uda = pos("uda_id");
    let score = match column {
        Some(c) => pos(c).ok_or_else(|| bad(format!("missing column `{c}`")))?,
        None => SCORE_COLUMNS
            .iter()
            .find_map(|c| pos(c))
            .ok_or_else(|| bad(format!("no score column (expected one of {SCORE_COLUMNS:?})")))?,
    };
    let mut out: ScoreTable = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let raw = rec.get(score).unwrap_or("").trim();
        if raw.is_empty() {
            continue;
        }
        let value: f64 = raw
            .parse()
            .map_err(|_| bad(format!("line {}: `{raw}` is not a number", i + 2)))?;
        let u = uda.and_then(|k| rec.get(k)).unwrap_or("all").to_string();
        let id = rec.get(inst).unwrap_or("").to_string();
        if out.entry(u).or_default().insert(id.clone(), value).is_some() {
            return Err(bad(format!("line {}: duplicate institution `{id}`", i + 2)));
        }
    }
    Ok(out)
}

/// Reads institution staff; keyed by UDA when the file has `uda_id`, else
/// under `None` for every UDA.
fn read_staff(path: &Path) -> Result<BTreeMap<Option<String>, BTreeMap<String, f64>>, CliError> {
    let bad = |m: String| CliError::Validation(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let pos = |name: &str| headers.iter().position(|h| h == name);
    let inst = pos("institution_id").ok_or_else(|| bad("missing institution_id column".into()))?;
    let col = pos("staff")
        .or_else(|| pos("rs_i"))
        .ok_or_else(|| bad("missing staff (or rs_i) column".into()))?;
    let uda = pos("uda_id");
    let mut out: BTreeMap<Option<String>, BTreeMap<String, f64>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let raw = rec.get(col).unwrap_or("").trim();
        let value: f64 = raw
            .parse()
            .map_err(|_| bad(format!("line {}: `{raw}` is not a number", i + 2)))?;
        let key = uda.and_then(|k| rec.get(k)).map(String::from);
        out.entry(key).or_default().insert(rec.get(inst).unwrap_or("").to_string(), value);
    }
    Ok(out)
}

fn f3(x: f64) -> String {
    format!("{x:.3}")
}

fn compare_markdown(reports: &[ShiftReport], left: &Path, right: &Path) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Ranking comparison\n");
    let name = |p: &Path| p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let _ = writeln!(s, "Left: `{}`  ", name(left));
    let _ = writeln!(s, "Right: `{}`\n", name(right));
    let _ = writeln!(
        s,
        "Spearman rho uses average ranks for ties; percentiles and quartiles use competition ranks \
         (ties share the minimum rank) recomputed over the institutions common to both lists. \
         Significance: *** p < 0.01, ** p < 0.05.\n"
    );
    let _ = writeln!(
        s,
        "| UDA | n | rho | p | sig | pct var % | pct max | pct mean | pct median | q var % | q max | q mean | q median |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|---|---|");
    for r in reports {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {:.0} | {:.0} | {:.0} | {:.0} | {:.0} | {:.0} | {:.0} | {:.0} |",
            r.uda_id,
            r.n,
            f3(r.spearman_rho),
            f3(r.p_two_tailed),
            r.stars,
            r.percentile.var_pct,
            r.percentile.max,
            r.percentile.mean,
            r.percentile.median,
            r.quartile.var_pct,
            r.quartile.max,
            r.quartile.mean,
            r.quartile.median,
        );
    }
    let _ = writeln!(s, "\n## Quartile leaps\n");
    let _ = writeln!(s, "| UDA | 0 | 1 | 2 | 3 | 3 risers | 3 fallers |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|");
    for r in reports {
        let h = &r.leaps;
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.uda_id, h.counts[0], h.counts[1], h.counts[2], h.counts[3], h.risers[3], h.fallers[3]
        );
    }
    s
}

/// Runs a parsed command; `raw_args` is recorded in the manifest.
pub fn run(cli: Cli, raw_args: &[String]) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { config, seed, out } => {
            let mut cfg = match &config {
                Some(p) => {
                    let text = fs::read_to_string(p)
                        .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
                    serde_json::from_str::<SynthConfig>(&text)
                        .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
                }
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let corpus = synthgen::generate(&cfg, &out)?;
            eprintln!(
                "wrote {} researchers, {} publications, {} peer outputs to {}",
                corpus.roster().len(),
                corpus.publications().len(),
                corpus.peer_outcomes().len(),
                out.display()
            );
            let inputs = config.as_deref().map(file_digest).transpose()?.into_iter().collect();
            let mut outdir = OutputDir::new(&out)?;
            let cfg_json = serde_json::to_vec_pretty(&cfg).map_err(|e| CliError::Computation(e.to_string()))?;
            outdir.write("synth_config.json", &cfg_json)?;
            let digest = corpus_digest(&out)?;
            outdir.finish("synth", raw_args, Some(digest), inputs)?;
        }
        Command::Validate { corpus } => {
            let c = load_corpus(&corpus)?;
            let findings = c.validate();
            for f in &findings {
                println!("{f}");
            }
            for u in c.taxonomy().udas() {
                println!(
                    "{u}: {} SDS, {} institutions, staff {}",
                    c.taxonomy().sds_count(u),
                    c.institutions_in_uda(u).len(),
                    c.staff_uda(u)
                );
            }
            println!(
                "{} researchers, {} publications, {} peer outputs; {} finding(s)",
                c.roster().len(),
                c.publications().len(),
                c.peer_outcomes().len(),
                findings.len()
            );
            if findings.iter().any(|f| f.severity == Severity::Error) {
                return Err(CliError::Validation("corpus has errors".into()));
            }
        }
        Command::Peer(io) => {
            let corpus = load(&io.corpus)?;
            let tables = pipeline::peer_tables(&corpus)?;
            if tables.is_empty() {
                return Err(ComputeError::NoPeerData("any".into()).into());
            }
            let mut out = OutputDir::new(&io.out)?;
            out.write_csv("peer.csv", |w| {
                w.write_record(PEER_CSV_HEADER)?;
                tables.values().try_for_each(|t| write_peer_csv(t, w))
            })?;
            for (uda, t) in &tables {
                out.write_csv(&format!("peer_{}.csv", slug(uda)), |w| {
                    w.write_record(PEER_CSV_HEADER)?;
                    write_peer_csv(t, w)
                })?;
            }
            out.finish("peer", raw_args, Some(corpus_digest(&io.corpus)?), vec![])?;
        }
        Command::Excellence { io, scenario } => {
            let corpus = load(&io.corpus)?;
            let impact = pipeline::impact(&corpus);
            let mut out = OutputDir::new(&io.out)?;
            out.write_csv("impact.csv", |w| write_impact_csv(&impact, w))?;
            out.write_csv("impact_audit.csv", |w| write_impact_audit_csv(&impact, w))?;
            let scenarios = match scenario {
                Some(s) => vec![s],
                None => vec![Scenario::A, Scenario::B],
            };
            for s in scenarios {
                let run = pipeline::excellence(&corpus, &impact, s)?;
                out.write_csv(&format!("excellence_{s}.csv"), |w| {
                    w.write_record(EXCELLENCE_HEADER)?;
                    run.scores.values().try_for_each(|rows| write_excellence_csv(rows, w))
                })?;
                out.write_csv(&format!("excellent_set_{s}.csv"), |w| {
                    w.write_record(["uda_id", "scenario", "pool_size", "k", "order", "pub_id", "aii"])?;
                    for set in run.sets.values() {
                        for (i, id) in set.pub_ids.iter().enumerate() {
                            w.write_record([
                                set.uda_id.clone(),
                                s.to_string(),
                                set.pool_size.to_string(),
                                set.k.to_string(),
                                (i + 1).to_string(),
                                id.clone(),
                                impact[id].aii.to_string(),
                            ])?;
                        }
                    }
                    Ok(())
                })?;
            }
            out.finish("excellence", raw_args, Some(corpus_digest(&io.corpus)?), vec![])?;
        }
        Command::Productivity { io, rp_national } => {
            let corpus = load(&io.corpus)?;
            let impact = pipeline::impact(&corpus);
            let run = pipeline::productivity(&corpus, &impact, rp_national)?;
            let mut out = OutputDir::new(&io.out)?;
            out.write_csv("credit_audit.csv", |w| write_credit_audit_csv(&run.credits, w))?;
            out.write_csv("impact.csv", |w| write_impact_csv(&impact, w))?;
            out.write_csv("productivity_sds.csv", |w| write_sds_csv(&run.sds, w))?;
            out.write_csv("productivity_national.csv", |w| {
                w.write_record(["sds_id", "rp_national"])?;
                for (s, v) in &run.national {
                    w.write_record([s.clone(), v.to_string()])?;
                }
                Ok(())
            })?;
            out.write_csv("productivity_uda.csv", |w| {
                w.write_record(UDA_HEADER)?;
                run.uda.values().try_for_each(|rows| write_uda_csv(rows, w))
            })?;
            out.finish("productivity", raw_args, Some(corpus_digest(&io.corpus)?), vec![])?;
        }
        Command::Compare { left, right, left_column, right_column, out } => {
            let l = read_score_table(&left, left_column.as_deref())?;
            let r = read_score_table(&right, right_column.as_deref())?;
            let mut reports = Vec::new();
            let mut unmatched: Vec<(String, String, &str)> = Vec::new();
            for (uda, ls) in &l {
                let Some(rs) = r.get(uda) else {
                    unmatched.extend(ls.keys().map(|i| (uda.clone(), i.clone(), "left")));
                    continue;
                };
                let report = shift_report(&build_ranklist(ls, uda)?, &build_ranklist(rs, uda)?)?;
                unmatched.extend(report.only_left.iter().map(|i| (uda.clone(), i.clone(), "left")));
                unmatched.extend(report.only_right.iter().map(|i| (uda.clone(), i.clone(), "right")));
                reports.push(report);
            }
            for (uda, rs) in &r {
                if !l.contains_key(uda) {
                    unmatched.extend(rs.keys().map(|i| (uda.clone(), i.clone(), "right")));
                }
            }
            if reports.is_empty() {
                return Err(CliError::Computation("no UDA present in both tables".into()));
            }
            let mut outdir = OutputDir::new(&out)?;
            outdir.write("compare.md", compare_markdown(&reports, &left, &right).as_bytes())?;
            outdir.write_csv("compare.csv", |w| {
                w.write_record([
                    "uda_id", "n", "rho", "p", "stars", "pct_var", "pct_max", "pct_mean", "pct_median",
                    "q_var", "q_max", "q_mean", "q_median",
                ])?;
                for r in &reports {
                    w.write_record([
                        r.uda_id.clone(),
                        r.n.to_string(),
                        r.spearman_rho.to_string(),
                        r.p_two_tailed.to_string(),
                        r.stars.to_string(),
                        r.percentile.var_pct.to_string(),
                        r.percentile.max.to_string(),
                        r.percentile.mean.to_string(),
                        r.percentile.median.to_string(),
                        r.quartile.var_pct.to_string(),
                        r.quartile.max.to_string(),
                        r.quartile.mean.to_string(),
                        r.quartile.median.to_string(),
                    ])?;
                }
                Ok(())
            })?;
            for r in &reports {
                outdir.write_csv(&format!("leap_{}.csv", slug(&r.uda_id)), |w| {
                    w.write_record(["leap", "count", "risers", "fallers"])?;
                    for k in 0..4 {
                        w.write_record([
                            k.to_string(),
                            r.leaps.counts[k].to_string(),
                            r.leaps.risers[k].to_string(),
                            r.leaps.fallers[k].to_string(),
                        ])?;
                    }
                    Ok(())
                })?;
                outdir.write_csv(&format!("shifts_{}.csv", slug(&r.uda_id)), |w| {
                    w.write_record([
                        "institution_id", "left_rank", "right_rank", "left_percentile",
                        "right_percentile", "left_quartile", "right_quartile",
                    ])?;
                    for s in &r.shifts {
                        w.write_record([
                            s.institution_id.clone(),
                            s.left_rank.to_string(),
                            s.right_rank.to_string(),
                            s.left_percentile.to_string(),
                            s.right_percentile.to_string(),
                            s.left_quartile.to_string(),
                            s.right_quartile.to_string(),
                        ])?;
                    }
                    Ok(())
                })?;
            }
            outdir.write_csv("unmatched.csv", |w| {
                w.write_record(["uda_id", "institution_id", "present_in"])?;
                for (u, i, side) in &unmatched {
                    w.write_record([u.as_str(), i, side])?;
                }
                Ok(())
            })?;
            outdir.finish("compare", raw_args, None, vec![file_digest(&left)?, file_digest(&right)?])?;
        }
        Command::Fund { ranking, staff, budget, weights, compare, uda, out } => {
            let weights: [f64; 4] = weights
                .try_into()
                .map_err(|_| CliError::Usage("--weights needs exactly four values".into()))?;
            let ranks = read_score_table(&ranking, None)?;
            let other = compare.as_deref().map(|p| read_score_table(p, None)).transpose()?;
            let staff_table = read_staff(&staff)?;
            let mut outdir = OutputDir::new(&out)?;
            let mut any = false;
            for (u, scores) in &ranks {
                if uda.as_ref().is_some_and(|x| x != u) {
                    continue;
                }
                let staff_u = staff_table
                    .get(&Some(u.clone()))
                    .or_else(|| staff_table.get(&None))
                    .ok_or_else(|| CliError::Validation(format!("no staff rows for uda `{u}`")))?;
                let left = allocate(&build_ranklist(scores, u)?, staff_u, budget, weights)?;
                outdir.write_csv(&format!("funding_{}.csv", slug(u)), |w| write_funding_csv(&left, w))?;
                if let Some(other) = &other {
                    let rs = other
                        .get(u)
                        .ok_or_else(|| CliError::Validation(format!("comparison table lacks uda `{u}`")))?;
                    // deltas are taken over the institutions both rankings share
                    let common = |a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>| {
                        a.iter()
                            .filter(|(k, _)| b.contains_key(*k))
                            .map(|(k, v)| (k.clone(), *v))
                            .collect::<BTreeMap<_, _>>()
                    };
                    let (lc, rc) = (common(scores, rs), common(rs, scores));
                    let dropped = scores.len() + rs.len() - 2 * lc.len();
                    if dropped > 0 {
                        eprintln!("{u}: {dropped} institution(s) ranked on one side only, left out of the delta");
                    }
                    let left_c = allocate(&build_ranklist(&lc, u)?, staff_u, budget, weights)?;
                    let right_c = allocate(&build_ranklist(&rc, u)?, staff_u, budget, weights)?;
                    let delta = funding_delta(&left_c, &right_c)?;
                    outdir.write_csv(&format!("funding_delta_{}.csv", slug(u)), |w| {
                        write_delta_csv(&left_c, &delta, w)
                    })?;
                }
                any = true;
            }
            if !any {
                return Err(CliError::Computation("no UDA to fund".into()));
            }
            let mut inputs = vec![file_digest(&ranking)?, file_digest(&staff)?];
            if let Some(p) = &compare {
                inputs.push(file_digest(p)?);
            }
            outdir.finish("fund", raw_args, None, inputs)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; returns the
/// process exit code.
pub fn main_with_args(args: Vec<String>) -> ExitCode {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli, &args[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
