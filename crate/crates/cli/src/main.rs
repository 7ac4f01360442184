//! `majinlink`: link shadow-library items to bibliographic works.
//!
//! Every stage reads and writes plain files under one data directory
//! (`--dir`, default `out`), so stages can be rerun independently.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use majinlink_core::catalogue::{
    decade_histogram, emit_catalogue, herfindahl_rows, language_counts, read_share_tables,
    write_herfindahl_csv, write_language_csv, CatalogueEntry,
};
use majinlink_core::crawl_planner::{expand, FixtureProvider, DEFAULT_MAX_DEPTH};
use majinlink_core::dedup::signature_file::write_signatures;
use majinlink_core::dedup::{
    cluster, compute_signatures, optimal_params, Cluster, Verification, DEFAULT_NUM_PERM,
};
use majinlink_core::evaluation::{
    ambiguous_subset_report, build_plan_tasks, default_grid, pr_curve, read_labels, resolve_labels,
    score_distribution_stats, stratified_sample, Label, PlanTask, Resampler, StratifiedPlan,
    DEFAULT_RESAMPLES,
};
use majinlink_core::ingest::{load_shingles, run_ingest, ShadowItem, TriageDecision};
use majinlink_core::jsonl::{read_jsonl, write_jsonl};
use majinlink_core::linkage::{apply_threshold, link, write_candidates, Candidate};
use majinlink_core::records::{filter_datable_works, EditionRecord, WorkRecord};
use majinlink_core::synth::{SynthConfig, SynthCorpus};
use majinlink_eval_service::{serve, ServiceConfig, ServiceState};

#[derive(Parser)]
#[command(name = "majinlink", version, about = "Bibliographic record linkage for shadow-library catalogues")]
struct Cli {
    /// Data directory shared by all stages.
    #[arg(short, long, global = true, default_value = "out")]
    dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with known item-to-work truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Triage items, extract texts and write shingle sets.
    Ingest {
        /// JSON Lines of shadow-library items.
        #[arg(long)]
        items: PathBuf,
        /// Directory holding `<item_id>.<ext>` payloads.
        #[arg(long)]
        payloads: PathBuf,
    },
    /// Keep only works with a first-publication year.
    FilterWorks {
        #[arg(long)]
        works: PathBuf,
    },
    /// MinHash signatures, LSH and near-duplicate clusters.
    Dedup(DedupArgs),
    /// Identifier join and title scoring of clusters against works.
    Link(LinkArgs),
    /// Human-evaluation sampling and precision/recall estimation.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Write the linked catalogue for one language.
    Emit {
        #[arg(long, default_value = "en")]
        lang: String,
        #[arg(long, default_value_t = majinlink_core::linkage::DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Language concentration and decade histograms.
    Stats {
        /// CSV of per-corpus language shares in percent.
        #[arg(long)]
        table1: Option<PathBuf>,
        /// Works file for an additional decade histogram, undated included.
        #[arg(long)]
        works: Option<PathBuf>,
    },
    /// Simulate a breadth-first metadata crawl over a fixture graph.
    CrawlSim {
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
        max_depth: usize,
    },
    /// Run the labeling HTTP backend.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        texts: Option<PathBuf>,
        #[arg(long, default_value_t = 80.0)]
        threshold: f64,
    },
}

#[derive(Args)]
struct DedupArgs {
    #[arg(long, default_value_t = majinlink_core::dedup::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_NUM_PERM)]
    num_perm: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Drop clusters smaller than this.
    #[arg(long, default_value_t = 1)]
    min_cluster_size: usize,
    /// Verify pairs with exact Jaccard instead of the signature estimate.
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct LinkArgs {
    /// Reported acceptance threshold; all scored candidates are written.
    #[arg(long, default_value_t = majinlink_core::linkage::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Cluster language to keep, or `all`.
    #[arg(long, default_value = "en")]
    language: String,
    #[arg(long)]
    editions: PathBuf,
    /// Defaults to `works_datable.jsonl` in the data directory.
    #[arg(long)]
    works: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Draw the stratified evaluation sample into `plan.jsonl`.
    Sample {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        works: Option<PathBuf>,
    },
    /// Precision, recall and retention per threshold into `pr_curve.csv`.
    Curve {
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Summary of scores and labels at one threshold.
    Report {
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 80.0)]
        threshold: f64,
        /// Second-pass labels for the ambiguous subset.
        #[arg(long)]
        relabels: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::init_from_env(env_logger::Env::default().default_filter_or("info"));
    let cli = Cli::parse();
    let dir = cli.dir;
    match cli.command {
        Command::Synth { out, seed } => synth(&out, seed),
        Command::Ingest { items, payloads } => ingest(&dir, &items, &payloads),
        Command::FilterWorks { works } => filter_works(&dir, &works),
        Command::Dedup(args) => dedup(&dir, &args),
        Command::Link(args) => link_cmd(&dir, &args),
        Command::Eval { command } => match command {
            EvalCommand::Sample { seed, works } => eval_sample(&dir, seed, works),
            EvalCommand::Curve { labels, resamples, seed } => eval_curve(&dir, labels, resamples, seed),
            EvalCommand::Report { labels, threshold, relabels } => eval_report(&dir, labels, threshold, relabels),
        },
        Command::Emit { lang, threshold } => emit(&dir, &lang, threshold),
        Command::Stats { table1, works } => stats(&dir, table1, works),
        Command::CrawlSim { fixture, max_depth } => crawl_sim(&dir, &fixture, max_depth),
        Command::Serve { port, plan, labels, texts, threshold } => {
            serve_cmd(&dir, port, plan, labels, texts, threshold)
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn works_path(dir: &Path, works: Option<PathBuf>) -> PathBuf {
    works.unwrap_or_else(|| dir.join("works_datable.jsonl"))
}

fn synth(out: &Path, seed: u64) -> Result<()> {
    let corpus = SynthCorpus::generate(&SynthConfig { seed, ..SynthConfig::default() });
    corpus.write_to_dir(out)?;
    println!(
        "wrote {} works, {} editions, {} items to {}",
        corpus.works.len(),
        corpus.editions.len(),
        corpus.items.len(),
        out.display()
    );
    Ok(())
}

fn ingest(dir: &Path, items: &Path, payloads: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let items: Vec<ShadowItem> = read_jsonl(items)?;
    let report = run_ingest(&items, payloads, dir)?;
    println!("items: {}", items.len());
    for d in [
        TriageDecision::Retained,
        TriageDecision::PdfDiscarded,
        TriageDecision::FormatDiscarded,
        TriageDecision::TooSmall,
        TriageDecision::TooLarge,
        TriageDecision::MissingPayload,
        TriageDecision::ExtractionFailed,
        TriageDecision::EmptyText,
    ] {
        println!("{d:?}: {}", report.count(d));
    }
    Ok(())
}

fn filter_works(dir: &Path, works: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let works: Vec<WorkRecord> = read_jsonl(works)?;
    let split = filter_datable_works(works);
    write_jsonl(dir.join("works_datable.jsonl"), &split.retained)?;
    println!(
        "retained {} of {} works ({:.1}%)",
        split.retained.len(),
        split.retained.len() + split.discarded.len(),
        100.0 * split.retained_fraction()
    );
    Ok(())
}

fn dedup(dir: &Path, args: &DedupArgs) -> Result<()> {
    let items: Vec<ShadowItem> = read_jsonl(dir.join("items.jsonl"))?;
    let sets = load_shingles(&items, &dir.join("shingles"))?;
    let params = optimal_params(args.threshold, args.num_perm, 0.5, 0.5)?;
    log::info!("LSH bands={} rows={}", params.bands, params.rows);
    let signatures = compute_signatures(&sets, args.num_perm, args.seed)?;
    let out = BufWriter::new(File::create(dir.join("signatures.bin"))?);
    write_signatures(out, args.num_perm, args.seed, &signatures)?;

    let verification = if args.exact {
        Verification::Exact(&sets)
    } else {
        Verification::Estimated
    };
    let clusters: Vec<Cluster> = cluster(&items, &signatures, &params, verification)?
        .into_iter()
        .filter(|c| c.len() >= args.min_cluster_size)
        .collect();
    write_jsonl(dir.join("clusters.jsonl"), &clusters)?;
    let multi = clusters.iter().filter(|c| !c.is_singleton()).count();
    println!(
        "bands={} rows={} clusters={} multi-item={}",
        params.bands,
        params.rows,
        clusters.len(),
        multi
    );
    Ok(())
}

fn link_cmd(dir: &Path, args: &LinkArgs) -> Result<()> {
    let clusters: Vec<Cluster> = read_jsonl(dir.join("clusters.jsonl"))?;
    let clusters: Vec<Cluster> = if args.language == "all" {
        clusters
    } else {
        clusters.into_iter().filter(|c| c.language == args.language).collect()
    };
    let works: Vec<WorkRecord> = read_jsonl(works_path(dir, args.works.clone()))?;
    let editions: Vec<EditionRecord> = read_jsonl(&args.editions)?;
    let report = link(&clusters, &works, &editions)?;
    write_candidates(dir.join("candidates.jsonl"), &report.candidates)?;
    write_jsonl(dir.join("dropped.jsonl"), &report.dropped)?;
    let (accepted, _) = apply_threshold(&report.candidates, args.threshold);
    println!(
        "candidates={} accepted(>={})={} dropped={}",
        report.candidates.len(),
        args.threshold,
        accepted.len(),
        report.dropped.len()
    );
    Ok(())
}

fn eval_sample(dir: &Path, seed: u64, works: Option<PathBuf>) -> Result<()> {
    let candidates: Vec<Candidate> = read_jsonl(dir.join("candidates.jsonl"))?;
    let works: Vec<WorkRecord> = read_jsonl(works_path(dir, works))?;
    let clusters: Vec<Cluster> = read_jsonl(dir.join("clusters.jsonl"))?;
    let plan = StratifiedPlan::default_plan();
    let sample = stratified_sample(&candidates, &plan, seed)?;
    for s in &sample.shortfall {
        log::warn!(
            "bin {} has {} of {} requested candidates",
            s.bin,
            s.available,
            s.requested
        );
    }
    let tasks = build_plan_tasks(&sample, &works, &clusters)?;
    write_jsonl(dir.join("plan.jsonl"), &tasks)?;
    println!("sampled {} of {} planned candidates", tasks.len(), plan.total());
    Ok(())
}

fn plan_scores(dir: &Path) -> Result<Vec<(majinlink_core::evaluation::CandidateKey, f64)>> {
    let tasks: Vec<PlanTask> = read_jsonl(dir.join("plan.jsonl"))?;
    Ok(tasks.into_iter().map(|t| (t.candidate, t.title_score)).collect())
}

fn eval_curve(dir: &Path, labels: Option<PathBuf>, resamples: usize, seed: u64) -> Result<()> {
    let labels = read_labels(labels.unwrap_or_else(|| dir.join("labels.jsonl")))?;
    let resolved = resolve_labels(&labels);
    let scores = plan_scores(dir)?;
    let curve = pr_curve(&resolved, &scores, &default_grid(), Resampler::Bootstrap { resamples, seed })?;
    curve.write_csv(File::create(dir.join("pr_curve.csv"))?)?;
    println!(
        "curve over {} conclusive labels ({} unknown, {} sampled)",
        curve.labeled, curve.unknown, curve.total
    );
    Ok(())
}

fn eval_report(dir: &Path, labels: Option<PathBuf>, threshold: f64, relabels: Option<PathBuf>) -> Result<()> {
    let candidates: Vec<Candidate> = read_jsonl(dir.join("candidates.jsonl"))?;
    if let Ok(q) = score_distribution_stats(&candidates) {
        println!("title score median {:.1} (IQR {:.1}-{:.1})", q.median, q.q1, q.q3);
    }
    let labels = read_labels(labels.unwrap_or_else(|| dir.join("labels.jsonl")))?;
    let resolved = resolve_labels(&labels);
    let count = |l: Label| resolved.values().filter(|v| **v == l).count();
    println!(
        "labels: yes={} no={} unknown={}",
        count(Label::Yes),
        count(Label::No),
        count(Label::Unknown)
    );
    let scores = plan_scores(dir)?;
    match pr_curve(&resolved, &scores, &[threshold], Resampler::bootstrap(1)) {
        Ok(curve) => {
            let p = curve.point(0);
            let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
            println!(
                "at {threshold}: precision {} recall {} retention {:.3}",
                fmt(p.precision),
                fmt(p.recall),
                p.retention
            );
        }
        Err(e) => println!("no curve: {e}"),
    }
    let relabels = relabels
        .map(|p| read_labels(p).map(|l| resolve_labels(&l)))
        .transpose()?;
    let amb = ambiguous_subset_report(&resolved, &candidates, threshold, relabels.as_ref());
    println!(
        "ambiguous above threshold: {} of {} labeled",
        amb.items.len(),
        amb.labeled_above
    );
    Ok(())
}

fn emit(dir: &Path, lang: &str, threshold: f64) -> Result<()> {
    let candidates: Vec<Candidate> = read_jsonl(dir.join("candidates.jsonl"))?;
    let clusters: Vec<Cluster> = read_jsonl(dir.join("clusters.jsonl"))?;
    let works: Vec<WorkRecord> = read_jsonl(dir.join("works_datable.jsonl"))?;
    let (accepted, _) = apply_threshold(&candidates, threshold);
    let catalogue = emit_catalogue(&accepted, &works, &clusters, lang)?;
    write_jsonl(dir.join(format!("catalogue_{lang}.jsonl")), &catalogue.entries)?;
    let c = &catalogue.coverage;
    println!(
        "entries={} with_genres={} with_reviews={} undated_skipped={}",
        c.entries, c.with_genres, c.with_reviews_count, c.undated_skipped
    );
    Ok(())
}

fn write_decades(path: &Path, years: impl IntoIterator<Item = Option<i32>>) -> Result<()> {
    let hist = decade_histogram(years);
    hist.write_csv(File::create(path)?)?;
    println!(
        "{}: {} dated, super-exponential={}",
        path.display(),
        hist.total() - hist.undated,
        hist.is_super_exponential()
    );
    Ok(())
}

fn stats(dir: &Path, table1: Option<PathBuf>, works: Option<PathBuf>) -> Result<()> {
    let stats_dir = dir.join("stats");
    ensure_dir(&stats_dir)?;
    let mut wrote = false;
    if let Some(path) = table1 {
        let tables = read_share_tables(File::open(&path).with_context(|| format!("opening {}", path.display()))?)?;
        let rows = herfindahl_rows(&tables)?;
        write_herfindahl_csv(File::create(stats_dir.join("herfindahl.csv"))?, &rows)?;
        for r in &rows {
            println!("{}: H={:.4} H*={:.4}", r.corpus, r.herfindahl, r.herfindahl_normalized);
        }
        wrote = true;
    }
    let clusters_path = dir.join("clusters.jsonl");
    if clusters_path.exists() {
        let clusters: Vec<Cluster> = read_jsonl(&clusters_path)?;
        let rows = language_counts(clusters.iter().map(|c| c.language.as_str()));
        write_language_csv(File::create(stats_dir.join("languages.csv"))?, &rows)?;
        wrote = true;
    }
    if let Some(path) = works {
        let works: Vec<WorkRecord> = read_jsonl(path)?;
        write_decades(&stats_dir.join("decades_works.csv"), works.iter().map(|w| w.first_publication_year))?;
        wrote = true;
    }
    let mut catalogues = BTreeSet::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(lang) = name.strip_prefix("catalogue_").and_then(|n| n.strip_suffix(".jsonl")) {
            catalogues.insert(lang.to_string());
        }
    }
    for lang in catalogues {
        let entries: Vec<CatalogueEntry> = read_jsonl(dir.join(format!("catalogue_{lang}.jsonl")))?;
        write_decades(
            &stats_dir.join(format!("decades_catalogue_{lang}.csv")),
            entries.iter().map(|e| Some(e.first_publication_year)),
        )?;
        wrote = true;
    }
    if !wrote {
        bail!("nothing to summarize: pass --table1 or --works, or run dedup/emit first");
    }
    Ok(())
}

fn crawl_sim(dir: &Path, fixture: &Path, max_depth: usize) -> Result<()> {
    ensure_dir(dir)?;
    let provider = FixtureProvider::load(fixture)?;
    let state = expand(&provider, max_depth);
    state.write_series_csv(File::create(dir.join("crawl_series.csv"))?)?;
    println!("new works by depth: {:?}", state.works_series());
    if !state.failures.is_empty() {
        println!("{} provider failures", state.failures.len());
    }
    Ok(())
}

fn serve_cmd(
    dir: &Path,
    port: u16,
    plan: Option<PathBuf>,
    labels: Option<PathBuf>,
    texts: Option<PathBuf>,
    threshold: f64,
) -> Result<()> {
    let plan = plan.or_else(|| Some(dir.join("plan.jsonl")).filter(|p| p.exists()));
    if plan.is_none() {
        log::warn!("no plan loaded; task requests will return 409");
    }
    let mut config = ServiceConfig::new(labels.unwrap_or_else(|| dir.join("labels.jsonl")));
    config.texts_dir = texts.or_else(|| Some(dir.join("texts")).filter(|p| p.is_dir()));
    config.threshold = threshold;
    let state = Arc::new(ServiceState::from_files(config, plan.as_deref())?);
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(serve(addr, state))?;
    Ok(())
}
