use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use kc_eval::extraction::{
    build_backend, run_extraction_batch, run_judge_batch, BackendKind, ExtractionCache, ExtractionFailure,
    ExtractionStore, Extractor, ExtractorConfig, SubjectSelection,
};
use kc_eval::hint_metrics::{evaluate_hints, group_by_length, GroupedProportion, LengthGrouping, Metric};
use kc_eval::ingest::{
    load_checkpoints, load_dataset_dir, load_hints, Dataset, LoadSummary, CHECKPOINTS_FILE,
    DEFAULT_LINKAGE_WINDOW_SECONDS, HINTS_FILE,
};
use kc_eval::model::{validate_database, Severity};
use kc_eval::progression::{aggregate_rq1, build_pairs, green_reduction_stats, DEFAULT_IDLE_CAP_SECONDS};
use kc_eval::report::{
    self, bars_from_absolute, bars_from_proportional, ChartMode, RunManifest, RQ1_ABSOLUTE_FILE,
    RQ1_GREEN_STATS_FILE, RQ1_PROPORTIONAL_FILE, RQ2_FILE, RQ3_FILE, SUMMARY_FILE,
};
use kc_eval::stats::{
    draw_labeling_sample, labeling_candidates, read_rater_csv, score_labels, write_labeling_csv, LabelingSample,
    TTestVariant,
};
use kc_eval::synth::{generate, verify_stub_round_trip, SynthConfig};
use kc_eval::{ExtractionError, KcDatabase};
use serde::Serialize;

use crate::args::*;
use crate::config::FileConfig;

pub const DEFAULT_SAMPLE_SIZE: usize = 63;
pub const DEFAULT_OVERLAP_FRACTION: f64 = 0.22;
pub const DEFAULT_SAMPLE_SEED: u64 = 0;

#[derive(Debug)]
pub enum Failure {
    /// A required value is missing; `path` names the subcommand for usage.
    Usage { path: Vec<&'static str>, message: String },
    /// Bad input data or arguments: exit 1.
    Input(anyhow::Error),
    /// Anything else: exit 2.
    Internal(anyhow::Error),
}

pub type Outcome = Result<(), Failure>;

trait Classify<T> {
    fn input(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
    fn internal(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into().context(what())))
    }

    fn internal(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure::Internal(e.into().context(what())))
    }
}

/// Corrupt caches and I/O faults are internal; config problems are input.
fn extraction_failure(e: ExtractionError) -> Failure {
    match e {
        ExtractionError::Config(_) => Failure::Input(e.into()),
        other => Failure::Internal(other.into()),
    }
}

pub struct Ctx {
    pub config: FileConfig,
    pub config_path: Option<PathBuf>,
    pub command_line: Vec<String>,
    pub started_at: String,
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn require<T>(value: Option<T>, flag: &str, path: &[&'static str]) -> Result<T, Failure> {
    value.ok_or_else(|| Failure::Usage {
        path: path.to_vec(),
        message: format!("the following required argument was not provided: --{flag}"),
    })
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).internal(|| format!("cannot create {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).internal(|| format!("cannot write {}", path.display()))
}

/// Writes data to stdout; a closed pipe is not an error.
fn emit_stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    text
}

impl Ctx {
    fn kcdb(&self, args: &DbArgs, path: &[&'static str]) -> Result<(KcDatabase, PathBuf), Failure> {
        let db_path = require(pick(args.kcdb.clone(), self.config.kcdb.clone()), "kcdb", path)?;
        let db = KcDatabase::load_validated(&db_path).input(|| format!("KC database {}", db_path.display()))?;
        Ok((db, db_path))
    }

    /// Loads the dataset; returns it with the input files read.
    fn dataset(
        &self,
        args: &DataArgs,
        db: &KcDatabase,
        path: &[&'static str],
    ) -> Result<(Dataset, Vec<PathBuf>, [LoadSummary; 2]), Failure> {
        let window = pick(args.linkage_window, self.config.linkage_window).unwrap_or(DEFAULT_LINKAGE_WINDOW_SECONDS);
        let term = pick(args.term.clone(), self.config.term.clone());
        let dir = pick(args.dataset.clone(), self.config.dataset.clone());
        let checkpoints = pick(args.checkpoints.clone(), self.config.checkpoints.clone());
        let hints = pick(args.hints.clone(), self.config.hints.clone());
        if let Some(dir) = dir.filter(|_| args.checkpoints.is_none()) {
            let (ds, cp, hs) = load_dataset_dir(&dir, db, window, term.as_deref())
                .input(|| format!("dataset {}", dir.display()))?;
            let mut inputs = vec![dir.join(CHECKPOINTS_FILE)];
            if dir.join(HINTS_FILE).exists() {
                inputs.push(dir.join(HINTS_FILE));
            }
            return Ok((ds, inputs, [cp, hs]));
        }
        let Some(cp_path) = checkpoints else {
            return Err(Failure::Usage {
                path: path.to_vec(),
                message: "one of --dataset or --checkpoints is required".into(),
            });
        };
        let term = term.unwrap_or_else(|| "term".into());
        let (mut ds, cp) =
            load_checkpoints(&cp_path, db, &term).input(|| format!("checkpoints {}", cp_path.display()))?;
        let mut inputs = vec![cp_path];
        let mut hs = LoadSummary::default();
        if let Some(h) = hints {
            hs = load_hints(&h, &mut ds, window).input(|| format!("hints {}", h.display()))?;
            inputs.push(h);
        }
        Ok((ds, inputs, [cp, hs]))
    }

    fn extractor_config(&self, args: &BackendArgs) -> Result<ExtractorConfig, Failure> {
        let c = &self.config;
        let mut config = ExtractorConfig::default();
        let backend = match args.backend {
            Some(BackendChoice::Stub) => Some(BackendKind::Stub),
            Some(BackendChoice::Remote) => Some(BackendKind::Remote),
            None => match c.backend.as_deref() {
                None => None,
                Some("stub") => Some(BackendKind::Stub),
                Some("remote") => Some(BackendKind::Remote),
                Some(other) => return Err(Failure::Input(anyhow!("config: unknown backend {other:?}"))),
            },
        };
        if let Some(b) = backend {
            config.backend = b;
        }
        config.endpoint = pick(args.endpoint.clone(), c.endpoint.clone());
        if let Some(v) = pick(args.model.clone(), c.model.clone()) {
            config.model_name = v;
        }
        if let Some(v) = pick(args.temperature, c.temperature) {
            config.temperature = v;
        }
        if let Some(v) = pick(args.max_parallel, c.max_parallel) {
            config.max_parallel = v;
        }
        if let Some(v) = pick(args.retry_limit, c.retry_limit) {
            config.retry_limit = v;
        }
        config.cache_path = pick(args.cache.clone(), c.cache.clone());
        if let Some(v) = pick(args.api_key_env.clone(), c.api_key_env.clone()) {
            config.api_key_env = v;
        }
        if let Some(v) = pick(args.timeout, c.timeout) {
            config.timeout_seconds = v;
        }
        if let Some(v) = c.auth_header.clone() {
            config.auth_header = v;
        }
        if let Some(v) = c.response_text_pointer.clone() {
            config.response_text_pointer = v;
        }
        if let Some(v) = c.prompt_template_code.clone() {
            config.prompt_template_code = v;
        }
        if let Some(v) = c.prompt_template_hint.clone() {
            config.prompt_template_hint = v;
        }
        if let Some(v) = c.prompt_template_judge.clone() {
            config.prompt_template_judge = v;
        }
        config.problem_statements = c.problem_statements.clone();
        config.validate().map_err(extraction_failure)?;
        Ok(config)
    }

    fn extractions(&self, flag: &Option<PathBuf>, db: &KcDatabase, path: &[&'static str]) -> Result<(ExtractionStore, PathBuf), Failure> {
        let p = require(pick(flag.clone(), self.config.extractions.clone()), "extractions", path)?;
        let store = ExtractionStore::load(&p).input(|| format!("extractions {}", p.display()))?;
        store.validate(db).input(|| format!("extractions {}", p.display()))?;
        Ok((store, p))
    }

    fn manifest(&self, dir: &Path, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<(), Failure> {
        let inputs = RunManifest::digests(inputs).internal(|| "hashing inputs".into())?;
        let config_hashes = match &self.config_path {
            Some(p) => RunManifest::digests(std::slice::from_ref(p)).internal(|| "hashing config".into())?,
            None => Vec::new(),
        };
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command_line: self.command_line.clone(),
            config_hashes,
            inputs,
            outputs: outputs
                .iter()
                .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
                .collect(),
            started_at: self.started_at.clone(),
            finished_at: chrono::Utc::now().to_rfc3339(),
        };
        manifest.write(dir).internal(|| "writing manifest".into())?;
        Ok(())
    }
}

fn log_loads(ds: &Dataset, loads: &[LoadSummary; 2]) {
    log::info!(
        "loaded {} of {} checkpoint rows, {} of {} hint rows",
        loads[0].ingested,
        loads[0].rows,
        loads[1].ingested,
        loads[1].rows
    );
    if !ds.dropped.is_empty() {
        log::warn!("{} rows dropped; run `ingest validate` for reasons", ds.dropped.len());
    }
}

pub fn run(cli: Command, ctx: &Ctx) -> Outcome {
    match cli {
        Command::Ingest(IngestCommand::Validate(a)) => ingest_validate(ctx, &a),
        Command::Extract(ExtractCommand::Code(a)) => extract(ctx, &a, SubjectSelection::Code, "code"),
        Command::Extract(ExtractCommand::Hints(a)) => extract(ctx, &a, SubjectSelection::Hints, "hints"),
        Command::Extract(ExtractCommand::Judge(a)) => judge(ctx, &a),
        Command::Analyze(AnalyzeCommand::Rq1(a)) => analyze_rq1(ctx, &a),
        Command::Analyze(AnalyzeCommand::Rq2(a)) => analyze_hints(ctx, &a, Metric::Top3),
        Command::Analyze(AnalyzeCommand::Rq3(a)) => analyze_hints(ctx, &a, Metric::Resolved),
        Command::SampleLabels(a) => sample_labels(ctx, &a),
        Command::Agreement(a) => agreement(ctx, &a),
        Command::Synth(SynthCommand::Generate(a)) => synth_generate(ctx, &a),
        Command::Report(a) => report_cmd(ctx, &a),
    }
}

fn ingest_validate(ctx: &Ctx, a: &ValidateArgs) -> Outcome {
    const PATH: &[&str] = &["ingest", "validate"];
    let db_path = require(pick(a.db.kcdb.clone(), ctx.config.kcdb.clone()), "kcdb", PATH)?;
    let db = KcDatabase::load(&db_path).input(|| format!("KC database {}", db_path.display()))?;
    let findings = validate_database(&db);
    let mut text = String::new();
    let fatal = findings.iter().filter(|f| f.severity == Severity::Error).count();
    let _ = writeln!(text, "kc database: {} KCs, {} categories", db.kcs.len(), db.categories.len());
    for f in &findings {
        let _ = writeln!(text, "  {f}");
    }
    if fatal > 0 {
        emit_stdout(&text);
        return Err(Failure::Input(anyhow!("KC database has {fatal} error(s)")));
    }
    let (ds, _, loads) = ctx.dataset(&a.data, &db, PATH)?;
    let _ = writeln!(text, 
        "checkpoints: {} rows, {} ingested, {} dropped",
        loads[0].rows, loads[0].ingested, loads[0].dropped
    );
    let _ = writeln!(text, "hints: {} rows, {} linked, {} dropped", loads[1].rows, loads[1].ingested, loads[1].dropped);
    let _ = writeln!(text, "streams: {}", ds.streams.len());
    for d in &ds.dropped {
        let source = match d.source {
            kc_eval::ingest::RowSource::Checkpoints => "checkpoints",
            kc_eval::ingest::RowSource::Hints => "hints",
        };
        let _ = writeln!(text, "drop {source}:{}: {}", d.line, d.reason);
    }
    emit_stdout(&text);
    Ok(())
}

fn write_drops(path: Option<&Path>, drops: &[ExtractionFailure]) -> Outcome {
    for d in drops {
        log::warn!("{} {} failed after {} attempt(s): {}", d.subject_kind, d.subject_id, d.attempts, d.reason);
    }
    if let Some(p) = path {
        write_text(p, &pretty(&drops))?;
    }
    Ok(())
}

fn open_cache(config: &ExtractorConfig) -> Result<ExtractionCache, Failure> {
    match &config.cache_path {
        Some(p) => ExtractionCache::open(p).map_err(extraction_failure),
        None => Ok(ExtractionCache::in_memory()),
    }
}

fn extract(ctx: &Ctx, a: &ExtractArgs, selection: SubjectSelection, name: &'static str) -> Outcome {
    let path = ["extract", name];
    let (db, _) = ctx.kcdb(&a.db, &path)?;
    let out = require(pick(a.out.clone(), ctx.config.out.clone()), "out", &path)?;
    let (ds, _, loads) = ctx.dataset(&a.data, &db, &path)?;
    log_loads(&ds, &loads);
    let config = ctx.extractor_config(&a.backend)?;
    let cache = open_cache(&config)?;
    let backend = build_backend(&config).map_err(extraction_failure)?;
    let extractor = Extractor::new(&db, &config, backend.as_ref(), &cache);
    let outcome = run_extraction_batch(&ds, &extractor, selection).map_err(extraction_failure)?;

    let mut store = if out.exists() {
        ExtractionStore::load(&out).input(|| format!("existing extractions {}", out.display()))?
    } else {
        ExtractionStore::new()
    };
    let extracted = outcome.store.len();
    store.merge(outcome.store);
    store.save(&out).map_err(extraction_failure)?;
    log::info!(
        "{extracted} {name} records ({} backend calls, {} cache hits, {} failed) -> {}",
        outcome.backend_calls,
        outcome.cache_hits,
        outcome.drops.len(),
        out.display()
    );
    write_drops(pick(a.drop_report.clone(), ctx.config.drop_report.clone()).as_deref(), &outcome.drops)
}

fn judge(ctx: &Ctx, a: &JudgeArgs) -> Outcome {
    const PATH: &[&str] = &["extract", "judge"];
    let (db, _) = ctx.kcdb(&a.db, PATH)?;
    let (store, _) = ctx.extractions(&a.extractions, &db, PATH)?;
    let out = require(pick(a.out.clone(), ctx.config.out.clone()), "out", PATH)?;
    let (ds, _, loads) = ctx.dataset(&a.data, &db, PATH)?;
    log_loads(&ds, &loads);
    let config = ctx.extractor_config(&a.backend)?;
    let cache = open_cache(&config)?;
    let backend = build_backend(&config).map_err(extraction_failure)?;
    let extractor = Extractor::new(&db, &config, backend.as_ref(), &cache);
    let outcome = run_judge_batch(&ds, &extractor, &store).map_err(extraction_failure)?;
    outcome.store.save(&out).map_err(extraction_failure)?;
    log::info!("judged {} records, {} revised -> {}", outcome.store.len(), outcome.revised, out.display());
    write_drops(pick(a.drop_report.clone(), ctx.config.drop_report.clone()).as_deref(), &outcome.failures)
}

fn out_dir(ctx: &Ctx, flag: &Option<PathBuf>, path: &[&'static str]) -> Result<PathBuf, Failure> {
    let dir = require(pick(flag.clone(), ctx.config.out_dir.clone()), "out-dir", path)?;
    create_dir(&dir)?;
    Ok(dir)
}

fn analyze_rq1(ctx: &Ctx, a: &Rq1Args) -> Outcome {
    const PATH: &[&str] = &["analyze", "rq1"];
    let (db, db_path) = ctx.kcdb(&a.db, PATH)?;
    let (store, ext_path) = ctx.extractions(&a.extractions, &db, PATH)?;
    let dir = out_dir(ctx, &a.out_dir, PATH)?;
    let (ds, mut inputs, loads) = ctx.dataset(&a.data, &db, PATH)?;
    log_loads(&ds, &loads);
    inputs.insert(0, db_path);
    inputs.push(ext_path);
    let idle_cap = pick(a.idle_cap, ctx.config.idle_cap).unwrap_or(DEFAULT_IDLE_CAP_SECONDS);

    let pairs = build_pairs(&ds, &store, idle_cap);
    if !pairs.drops.is_empty() {
        log::warn!("{} progression pairs dropped (missing code extraction)", pairs.drops.len());
    }
    let rq1 = aggregate_rq1(&pairs.pairs, &ds.problem_ids(), &ds.term_label);
    for notice in &rq1.notices {
        log::warn!("{notice}");
    }
    let mut outputs = report::write_rq1_tables(&rq1.aggregates, &dir).internal(|| "writing RQ1 tables".into())?;

    let baseline = pick(a.baseline_dataset.clone(), ctx.config.baseline_dataset.clone());
    if let Some(base_dir) = baseline {
        let base_ext = require(
            pick(a.baseline_extractions.clone(), ctx.config.baseline_extractions.clone()),
            "baseline-extractions",
            PATH,
        )?;
        let window = pick(a.data.linkage_window, ctx.config.linkage_window).unwrap_or(DEFAULT_LINKAGE_WINDOW_SECONDS);
        let (base_ds, _, _) = load_dataset_dir(&base_dir, &db, window, None)
            .input(|| format!("baseline dataset {}", base_dir.display()))?;
        let base_store = ExtractionStore::load(&base_ext).input(|| format!("baseline extractions {}", base_ext.display()))?;
        let base_pairs = build_pairs(&base_ds, &base_store, idle_cap);
        let variant = if a.welch || ctx.config.welch == Some(true) {
            TTestVariant::Welch
        } else {
            TTestVariant::Pooled
        };
        let stats = green_reduction_stats(&base_pairs.pairs, &pairs.pairs, variant).input(|| "green reduction test".into())?;
        let path = dir.join(RQ1_GREEN_STATS_FILE);
        write_text(
            &path,
            &pretty(&serde_json::json!({
                "baseline_term": base_ds.term_label,
                "term": ds.term_label,
                "comparison": stats,
            })),
        )?;
        outputs.push(path);
        inputs.push(base_dir.join(CHECKPOINTS_FILE));
        inputs.push(base_ext);
    }
    ctx.manifest(&dir, &inputs, &outputs)
}

#[derive(Serialize)]
struct Overall {
    numerator: usize,
    denominator: usize,
    proportion: Option<f64>,
}

impl From<&GroupedProportion> for Overall {
    fn from(g: &GroupedProportion) -> Self {
        Overall {
            numerator: g.numerator,
            denominator: g.denominator,
            proportion: g.proportion,
        }
    }
}

#[derive(Serialize)]
struct HintSummary {
    term: String,
    assignment: String,
    hints_evaluated: usize,
    no_kc_hints: usize,
    rq2_top3_overall: Overall,
    rq3_resolved_overall: Overall,
    notes: Vec<String>,
}

fn analyze_hints(ctx: &Ctx, a: &HintMetricArgs, metric: Metric) -> Outcome {
    let path: &[&'static str] = match metric {
        Metric::Top3 => &["analyze", "rq2"],
        Metric::Resolved => &["analyze", "rq3"],
    };
    let (db, db_path) = ctx.kcdb(&a.db, path)?;
    let (store, ext_path) = ctx.extractions(&a.extractions, &db, path)?;
    let dir = out_dir(ctx, &a.out_dir, path)?;
    let (ds, mut inputs, loads) = ctx.dataset(&a.data, &db, path)?;
    log_loads(&ds, &loads);
    inputs.insert(0, db_path);
    inputs.push(ext_path);

    let report = evaluate_hints(&ds, &store);
    for notice in &report.notices {
        log::warn!("{notice}");
    }
    let top3 = group_by_length(&report.evaluations, Metric::Top3);
    let resolved = group_by_length(&report.evaluations, Metric::Resolved);
    let (grouping, file): (&LengthGrouping, &str) = match metric {
        Metric::Top3 => (&top3, RQ2_FILE),
        Metric::Resolved => (&resolved, RQ3_FILE),
    };
    let table = dir.join(file);
    report::write_bucket_table(&ds.term_label, &db.assignment_id, &grouping.buckets, &table)
        .internal(|| "writing bucket table".into())?;

    let summary = HintSummary {
        term: ds.term_label.clone(),
        assignment: db.assignment_id.clone(),
        hints_evaluated: report.evaluations.len(),
        no_kc_hints: top3.no_kc_hints,
        rq2_top3_overall: (&top3.overall).into(),
        rq3_resolved_overall: (&resolved.overall).into(),
        notes: vec![
            "hints on checkpoints with no missing KCs are not applicable for top-3 overlap".into(),
            "hints on a stream's last checkpoint are not applicable for resolution".into(),
            "overall proportions cover hints with at least one KC".into(),
        ],
    };
    let summary_path = dir.join(SUMMARY_FILE);
    write_text(&summary_path, &pretty(&summary))?;
    ctx.manifest(&dir, &inputs, &[table, summary_path])
}

fn sample_path(csv: &Path) -> PathBuf {
    csv.with_extension("sample.json")
}

fn sample_labels(ctx: &Ctx, a: &SampleLabelsArgs) -> Outcome {
    const PATH: &[&str] = &["sample-labels"];
    let (db, _) = ctx.kcdb(&a.db, PATH)?;
    let (store, _) = ctx.extractions(&a.extractions, &db, PATH)?;
    let out = require(pick(a.out.clone(), ctx.config.out.clone()), "out", PATH)?;
    let (ds, _, _) = ctx.dataset(&a.data, &db, PATH)?;
    let n = pick(a.n, ctx.config.n).unwrap_or(DEFAULT_SAMPLE_SIZE);
    let seed = pick(a.seed, ctx.config.seed).unwrap_or(DEFAULT_SAMPLE_SEED);
    let frac = pick(a.overlap_fraction, ctx.config.overlap_fraction).unwrap_or(DEFAULT_OVERLAP_FRACTION);

    let candidates = labeling_candidates(&ds, &store);
    let sample = draw_labeling_sample(&candidates, n, seed, frac).input(|| "drawing labeling sample".into())?;
    write_labeling_csv(&sample, &out).internal(|| format!("writing {}", out.display()))?;
    let sidecar = sample_path(&out);
    write_text(&sidecar, &pretty(&sample))?;
    log::info!(
        "{} items ({} joint) -> {}, sample -> {}",
        sample.items.len(),
        sample.joint_count(),
        out.display(),
        sidecar.display()
    );
    Ok(())
}

fn agreement(ctx: &Ctx, a: &AgreementArgs) -> Outcome {
    const PATH: &[&str] = &["agreement"];
    let sample_file = require(pick(a.sample.clone(), ctx.config.sample.clone()), "sample", PATH)?;
    let raters = if a.raters.is_empty() { ctx.config.raters.clone() } else { a.raters.clone() };
    if raters.is_empty() {
        return Err(Failure::Usage {
            path: PATH.to_vec(),
            message: "at least one --rater file is required".into(),
        });
    }
    let text = std::fs::read_to_string(&sample_file).input(|| format!("cannot read {}", sample_file.display()))?;
    let sample: LabelingSample =
        serde_json::from_str(&text).input(|| format!("malformed sample {}", sample_file.display()))?;
    let mut labels = Vec::new();
    for r in &raters {
        labels.push(read_rater_csv(r).input(|| format!("rater file {}", r.display()))?);
    }
    let score = score_labels(&sample, &labels).input(|| "scoring labels".into())?;
    for pair in &score.pairs {
        if let Some(notice) = &pair.notice {
            log::warn!("{notice}");
        }
    }
    let text = pretty(&score);
    emit_stdout(&text);
    if let Some(out) = pick(a.out.clone(), ctx.config.out.clone()) {
        write_text(&out, &text)?;
    }
    Ok(())
}

fn synth_generate(ctx: &Ctx, a: &SynthArgs) -> Outcome {
    const PATH: &[&str] = &["synth", "generate"];
    let (db, db_path) = ctx.kcdb(&a.db, PATH)?;
    let dir = out_dir(ctx, &a.out_dir, PATH)?;
    let mut config: SynthConfig = ctx.config.synth.clone().unwrap_or_default();
    if let Some(v) = pick(a.seed, ctx.config.seed) {
        config.seed = v;
    }
    if let Some(v) = pick(a.n_students, ctx.config.n_students) {
        config.n_students = v;
    }
    if let Some(v) = pick(a.q_top3, ctx.config.q_top3) {
        config.q_top3 = v;
    }
    if let Some(v) = pick(a.term.clone(), ctx.config.term.clone()) {
        config.term_label = v;
    }
    let output = generate(&config, &db).input(|| "synthetic generation".into())?;
    let mismatched = verify_stub_round_trip(&output, &db);
    if !mismatched.is_empty() {
        return Err(Failure::Internal(anyhow!(
            "stub extraction disagrees with planted KCs for {} checkpoints, first {}",
            mismatched.len(),
            mismatched[0]
        )));
    }
    let written = output.write_dir(&dir).internal(|| format!("writing {}", dir.display()))?;
    log::info!(
        "{} checkpoints, {} hints -> {}",
        output.checkpoints.len(),
        output.hints.len(),
        dir.display()
    );
    ctx.manifest(&dir, &[db_path], &written)
}

fn file_stem_part(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn report_cmd(ctx: &Ctx, a: &ReportArgs) -> Outcome {
    const PATH: &[&str] = &["report"];
    let in_dir = require(pick(a.in_dir.clone(), ctx.config.in_dir.clone()), "in-dir", PATH)?;
    let dir = out_dir(ctx, &a.out_dir, PATH)?;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut emit = |name: String, svg: Option<String>, what: &str| -> Outcome {
        match svg {
            Some(svg) => {
                let path = dir.join(name);
                write_text(&path, &svg)?;
                outputs.push(path);
            }
            None => log::warn!("{what}: nothing to draw, no figure written"),
        }
        Ok(())
    };

    let abs = in_dir.join(RQ1_ABSOLUTE_FILE);
    if abs.exists() {
        let rows = report::read_rq1_absolute(&abs).input(|| "reading RQ1 table".into())?;
        let by_term = bars_from_absolute(&rows);
        if by_term.is_empty() {
            log::warn!("{}: no aggregates, no figure written", abs.display());
        }
        for (term, bars) in by_term {
            let svg = report::render_stacked_bars(&term, &bars, ChartMode::Absolute);
            emit(format!("rq1_absolute_{}.svg", file_stem_part(&term)), svg, "rq1 absolute")?;
        }
        inputs.push(abs);
    }
    let prop = in_dir.join(RQ1_PROPORTIONAL_FILE);
    if prop.exists() {
        let rows = report::read_rq1_proportional(&prop).input(|| "reading RQ1 table".into())?;
        for (term, bars) in bars_from_proportional(&rows) {
            let svg = report::render_stacked_bars(&term, &bars, ChartMode::Proportional);
            emit(format!("rq1_proportional_{}.svg", file_stem_part(&term)), svg, "rq1 proportional")?;
        }
        inputs.push(prop);
    }
    for (file, metric, prefix) in [(RQ2_FILE, Metric::Top3, "rq2_overlap"), (RQ3_FILE, Metric::Resolved, "rq3_resolution")] {
        let table = in_dir.join(file);
        if !table.exists() {
            continue;
        }
        let rows = report::read_bucket_table(&table).input(|| format!("reading {}", table.display()))?;
        let mut groups: BTreeMap<(String, String), Vec<GroupedProportion>> = BTreeMap::new();
        for row in rows {
            groups.entry((row.term, row.assignment)).or_default().push(GroupedProportion {
                bucket: row.bucket,
                numerator: row.numerator,
                denominator: row.denominator,
                proportion: row.proportion,
            });
        }
        for ((term, assignment), buckets) in groups {
            let svg = report::render_grouped_bars(&term, &buckets, metric);
            let name = format!("{prefix}_{}_{}.svg", file_stem_part(&term), file_stem_part(&assignment));
            emit(name, svg, prefix)?;
        }
        inputs.push(table);
    }
    if inputs.is_empty() {
        return Err(Failure::Input(anyhow!("no analysis tables found in {}", in_dir.display())));
    }
    ctx.manifest(&dir, &inputs, &outputs)
}
