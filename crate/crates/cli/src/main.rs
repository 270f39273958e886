//! `pkgc`: pretrain, run the completion loop, benchmark mining, generate data.

mod config;

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Arg, ArgMatches, Command};
use thiserror::Error;

use pkgc_api::ApiServer;
use pkgc_core::kg::{load_class_dict, load_triples, partition, DatasetManifest, KgError, PartitionConfig};
use pkgc_core::kge::{read_checkpoint, write_checkpoint, ModelError};
use pkgc_core::mine::{mine, mine_naive, MiningConfig, MiningStats, SemanticValidityFilter};
use pkgc_core::runner::{self, load_resume, LoopState, RunContext, RunError, RunObserver, StepReport};
use pkgc_core::synth::{self, SynthConfig};
use pkgc_core::train::{pretrain, write_train_log, EpochRecord, TrainError, UpdateReport};
use pkgc_core::verify::{OracleVerifier, SessionStore, SessionVerifier, VerdictLog, Verifier};
use pkgc_core::{ClassDict, FactSet, Model, Vocabulary};

use config::{ExperimentConfig, SvfSource, VerifierKind, KEYS};

#[derive(Debug, Error)]
enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Diverged(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<KgError> for CliError {
    fn from(e: KgError) -> Self {
        match e {
            KgError::InvalidRatio(_) | KgError::InfeasibleRatio { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } | TrainError::NonFinite { .. } => CliError::Diverged(e.to_string()),
            TrainError::Config(m) => CliError::Config(m),
            e => CliError::Other(e.to_string()),
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Train { step, source } => match CliError::from(source) {
                CliError::Diverged(m) => CliError::Diverged(format!("update before step {step}: {m}")),
                other => other,
            },
            RunError::Config(m) => CliError::Config(m),
            e => CliError::Other(e.to_string()),
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

fn key_args() -> Vec<Arg> {
    KEYS.iter()
        .map(|k| {
            // Built once per process.
            let long: &'static str = Box::leak(k.name.replace('_', "-").into_boxed_str());
            let arg = Arg::new(k.name).long(long).help(k.help).value_name("VALUE").overrides_with(k.name);
            if k.boolean {
                arg.num_args(0..=1).default_missing_value("true").require_equals(true)
            } else {
                arg.num_args(1)
            }
        })
        .collect()
}

fn experiment_command(name: &'static str, about: &'static str) -> Command {
    Command::new(name)
        .about(about)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key=value file applied over defaults and the manifest"),
        )
        .args(key_args())
}

fn cli() -> Command {
    Command::new("pkgc")
        .about("Progressive knowledge graph completion")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(experiment_command("pretrain", "Partition the dataset and pretrain a model"))
        .subcommand(experiment_command("run", "Run the completion loop"))
        .subcommand(experiment_command("bench-mining", "Time one mining pass per toggle combination"))
        .subcommand(
            Command::new("synth")
                .about("Write a synthetic dataset with classes and a manifest")
                .arg(Arg::new("out").long("out").required(true).value_name("DIR"))
                .arg(Arg::new("entities").long("entities").default_value("1000"))
                .arg(Arg::new("classes").long("classes").default_value("8"))
                .arg(Arg::new("degree").long("degree").default_value("1.5"))
                .arg(Arg::new("seed").long("seed").default_value("0"))
                .arg(Arg::new("rho").long("rho").help("Ratio recorded in the manifest")),
        )
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let result = match matches.subcommand() {
        Some(("pretrain", m)) => resolve_config(m).and_then(|c| cmd_pretrain(&c)),
        Some(("run", m)) => resolve_config(m).and_then(|c| cmd_run(&c)),
        Some(("bench-mining", m)) => resolve_config(m).and_then(|c| cmd_bench_mining(&c)),
        Some(("synth", m)) => cmd_synth(m),
        _ => unreachable!("subcommand required"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pkgc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Defaults, then manifest `rho`/`seed`, then `--config`, then flags.
fn resolve_config(m: &ArgMatches) -> Result<ExperimentConfig> {
    let file_entries = match m.get_one::<String>("config") {
        Some(p) => {
            let path = Path::new(p);
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{p}: {e}")))?;
            pkgc_core::kv::parse(&text)
                .map_err(|e| CliError::Config(format!("{p}:{}: {}", e.line, e.msg)))?
                .into_iter()
                .map(|e| (e.key, e.value, format!("{p}:{}", e.line)))
                .collect()
        }
        None => Vec::new(),
    };
    let flag_entries: Vec<(String, String, String)> = KEYS
        .iter()
        .filter_map(|k| {
            m.get_one::<String>(k.name)
                .map(|v| (k.name.to_owned(), v.clone(), format!("--{}", k.name.replace('_', "-"))))
        })
        .collect();
    let apply = |cfg: &mut ExperimentConfig, entries: &[(String, String, String)]| -> Result<()> {
        for (k, v, origin) in entries {
            cfg.set(k, v).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        }
        Ok(())
    };

    let mut probe = ExperimentConfig::default();
    apply(&mut probe, &file_entries)?;
    apply(&mut probe, &flag_entries)?;
    let mut cfg = ExperimentConfig::default();
    if let Some(ds) = &probe.dataset {
        let manifest = locate_manifest(ds)?;
        if let Some(rho) = manifest.rho {
            cfg.rho = rho;
        }
        if let Some(seed) = manifest.seed {
            cfg.seed = seed;
        }
    }
    apply(&mut cfg, &file_entries)?;
    apply(&mut cfg, &flag_entries)?;
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

fn locate_manifest(path: &Path) -> Result<DatasetManifest> {
    if !path.exists() {
        return Err(CliError::Data(format!("dataset not found: {}", path.display())));
    }
    if path.is_dir() {
        return Ok(DatasetManifest::load(&path.join("manifest.conf"))?);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv" | "txt") => Ok(DatasetManifest {
            triples_path: path.to_owned(),
            classes_path: None,
            rho: None,
            seed: None,
        }),
        _ => Ok(DatasetManifest::load(path)?),
    }
}

struct Dataset {
    vocab: Vocabulary,
    known: FactSet,
    unexplored: FactSet,
    classes: Option<ClassDict>,
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let path = cfg.dataset.as_ref().ok_or_else(|| CliError::Config("no dataset given (--dataset)".into()))?;
    let manifest = locate_manifest(path)?;
    let mut vocab = Vocabulary::new();
    let total = load_triples(&manifest.triples_path, &mut vocab)?;
    let class_path = match &cfg.svf {
        SvfSource::Off => None,
        SvfSource::Manifest => manifest.classes_path.clone(),
        SvfSource::File(p) => Some(p.clone()),
    };
    let classes = match class_path {
        Some(p) => {
            let (dict, report) = load_class_dict(&p, &vocab)?;
            if report.unknown_entities + report.repeated_entities > 0 {
                eprintln!(
                    "{}: skipped {} unknown and {} repeated entities",
                    p.display(),
                    report.unknown_entities,
                    report.repeated_entities
                );
            }
            Some(dict)
        }
        None => None,
    };
    let (known, unexplored) = partition(&total, &PartitionConfig::new(cfg.rho, cfg.seed)?)?;
    eprintln!(
        "dataset: |E|={} |R|={} known={} unexplored={}",
        vocab.num_entities(),
        vocab.num_relations(),
        known.len(),
        unexplored.len()
    );
    Ok(Dataset {
        vocab,
        known,
        unexplored,
        classes,
    })
}

fn prepare_out(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("effective.conf"), cfg.render())?;
    Ok(())
}

fn model_error(e: ModelError) -> CliError {
    CliError::Config(e.to_string())
}

/// Random initialization followed by pretraining; writes the checkpoint and log.
fn pretrain_model(cfg: &ExperimentConfig, data: &Dataset) -> Result<Model> {
    let tc = cfg.train_config();
    let mut model = Model::random(cfg.model, cfg.dim, data.vocab.num_entities(), data.vocab.num_relations(), cfg.seed)
        .map_err(model_error)?;
    let report = pretrain(&mut model, &data.known, &tc, |r| {
        eprintln!("epoch {:>4}  loss {:.6}  reg {:.6}  {} ms", r.epoch, r.mean_loss, r.reg_loss, r.wall_ms)
    })?;
    write_checkpoint(&model, &cfg.out.join("model.ckpt")).map_err(|e| CliError::Other(e.to_string()))?;
    write_train_log(&report, &cfg.out.join("train_log.csv"))?;
    Ok(model)
}

fn load_model(cfg: &ExperimentConfig, data: &Dataset) -> Result<Model> {
    let path = cfg.checkpoint.clone().unwrap_or_else(|| cfg.out.join("model.ckpt"));
    if !path.exists() {
        return Err(CliError::Data(format!(
            "checkpoint not found: {} (run `pkgc pretrain` or pass --pretrain)",
            path.display()
        )));
    }
    let model: Model = read_checkpoint(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    check_model(cfg, data, &model, &path)?;
    Ok(model)
}

fn check_model(cfg: &ExperimentConfig, data: &Dataset, model: &Model, path: &Path) -> Result<()> {
    let want = (cfg.model, cfg.dim, data.vocab.num_entities(), data.vocab.num_relations());
    let got = (model.family(), model.dim(), model.num_entities(), model.num_relations());
    if want != got {
        return Err(CliError::Config(format!(
            "{}: checkpoint is {} dim {} over |E|={} |R|={}, config expects {} dim {} over |E|={} |R|={}",
            path.display(),
            got.0,
            got.1,
            got.2,
            got.3,
            want.0,
            want.1,
            want.2,
            want.3
        )));
    }
    Ok(())
}

fn build_svf(data: &Dataset) -> Option<SemanticValidityFilter> {
    data.classes
        .as_ref()
        .map(|c| SemanticValidityFilter::build(&data.known, c, data.vocab.num_entities(), data.vocab.num_relations()))
}

fn cmd_pretrain(cfg: &ExperimentConfig) -> Result<()> {
    let data = load_dataset(cfg)?;
    prepare_out(cfg)?;
    pretrain_model(cfg, &data)?;
    eprintln!("wrote {}", cfg.out.join("model.ckpt").display());
    Ok(())
}

/// Opens a CSV for appending; writes the header when the file is new or truncated.
fn csv_log(path: &Path, header: &str, append: bool) -> Result<BufWriter<File>> {
    let fresh = !append || !path.exists();
    let f = if fresh {
        File::create(path)?
    } else {
        OpenOptions::new().append(true).open(path)?
    };
    let mut w = BufWriter::new(f);
    if fresh {
        writeln!(w, "{header}")?;
        w.flush()?;
    }
    Ok(w)
}

const UPDATE_LOG_HEADER: &str = "step,epoch,mean_loss,reg_loss,wall_ms";

struct FileObserver {
    mining: BufWriter<File>,
    updates: BufWriter<File>,
    verdicts: VerdictLog,
    n_s: usize,
    error: Option<std::io::Error>,
}

impl FileObserver {
    fn keep(&mut self, r: std::io::Result<()>) {
        if let Err(e) = r {
            self.error.get_or_insert(e);
        }
    }
}

impl RunObserver for FileObserver {
    fn on_update_epoch(&mut self, step: usize, rec: &EpochRecord) {
        let r = writeln!(
            self.updates,
            "{step},{},{:.9},{:.9},{}",
            rec.epoch, rec.mean_loss, rec.reg_loss, rec.wall_ms
        )
        .and_then(|_| self.updates.flush());
        self.keep(r);
    }

    fn on_update(&mut self, step: usize, report: &UpdateReport) {
        if report.skipped {
            eprintln!("update before step {step}: skipped");
        } else {
            eprintln!(
                "update before step {step}: {} epochs, loss {:.6}, mean drift {:.6}",
                report.train.epochs.len(),
                report.train.final_loss().unwrap_or(f64::NAN),
                report.mean_drift
            );
        }
    }

    fn on_step(&mut self, report: &StepReport<'_>) {
        let p = report.point;
        eprintln!(
            "step {:>4}/{}  accepted {:>6}/{:<6}  CR {:.4}  {:.0} ms",
            p.step, self.n_s, p.accepted, p.candidates, p.completion_ratio, report.wall_ms
        );
        if let Some(stats) = report.mining {
            let r = stats.write_csv_rows(report.step, &mut self.mining).and_then(|_| self.mining.flush());
            self.keep(r);
        }
        let r = self.verdicts.record(report.step, &report.verification.verdicts);
        self.keep(r);
    }
}

fn cmd_run(cfg: &ExperimentConfig) -> Result<()> {
    let data = load_dataset(cfg)?;
    prepare_out(cfg)?;
    let ckpt_dir = cfg.out.join("checkpoint");
    let (mut model, mut state) = if cfg.resume {
        let (model, state) = load_resume::<f32>(&ckpt_dir).map_err(|e| CliError::Data(format!("{}: {e}", ckpt_dir.display())))?;
        check_model(cfg, &data, &model, &ckpt_dir)?;
        eprintln!("resuming after step {}", state.step);
        (model, state)
    } else {
        let model = if cfg.pretrain { pretrain_model(cfg, &data)? } else { load_model(cfg, &data)? };
        (model, LoopState::new(data.known.clone(), data.unexplored.len()))
    };
    model.set_rel_norm(cfg.rel_norm);
    let svf = build_svf(&data);
    if svf.is_none() && cfg.svf != SvfSource::Off {
        eprintln!("no class file; semantic filter disabled");
    }

    let tc = cfg.train_config();
    let mc = cfg.mining_config();
    let lc = cfg.loop_config();
    let ctx = RunContext {
        train: &tc,
        mining: &mc,
        looping: &lc,
        svf: svf.as_ref(),
        checkpoint_dir: Some(&ckpt_dir),
    };
    let append = cfg.resume;
    let mut observer = FileObserver {
        mining: csv_log(&cfg.out.join("mining_stats.csv"), MiningStats::CSV_HEADER, append)?,
        updates: csv_log(&cfg.out.join("update_log.csv"), UPDATE_LOG_HEADER, append)?,
        verdicts: {
            let path = cfg.out.join("verdicts.jsonl");
            if !append {
                File::create(&path)?;
            }
            VerdictLog::append_to(&path)?
        },
        n_s: lc.n_s,
        error: None,
    };

    let metrics = match cfg.verifier {
        VerifierKind::Oracle => {
            let mut verifier = OracleVerifier::new(data.unexplored.clone());
            runner::run(&mut model, &mut state, &ctx, &mut verifier, &mut observer)?
        }
        VerifierKind::Session => {
            let addr = cfg.serve.as_deref().expect("validated");
            let store = SessionStore::new();
            let server = ApiServer::start(addr, store.clone())
                .map_err(|e| CliError::Config(format!("cannot serve on {addr}: {e}")))?;
            let id = uuid::Uuid::new_v4().to_string();
            let initial = *state.curve.points.last().expect("curve starts at step 0");
            let mut verifier = SessionVerifier::open(
                store.clone(),
                id.clone(),
                Duration::from_secs_f64(cfg.session_timeout),
                Arc::new(data.vocab.clone()),
                initial,
            );
            eprintln!("session {id} at http://{}/v1/session/{id}/candidates", server.local_addr());
            let result = runner::run(&mut model, &mut state, &ctx, &mut verifier as &mut dyn Verifier, &mut observer);
            store.close(&id);
            server.shutdown()?;
            result?
        }
    };
    if let Some(e) = observer.error.take() {
        return Err(e.into());
    }

    let mut w = BufWriter::new(File::create(cfg.out.join("curve.csv"))?);
    state.curve.write_csv(&mut w)?;
    w.flush()?;
    // Share of F_un the filter can reach; the ideal curve does not account for it.
    let mut json = serde_json::to_value(&metrics).map_err(|e| CliError::Other(e.to_string()))?;
    let cover = svf.as_ref().filter(|_| mc.svf).map(|f| f.cover_rate(&data.unexplored, mc.svf_tails, false));
    json["svf_cover_rate"] = cover.into();
    let json = serde_json::to_string_pretty(&json).map_err(|e| CliError::Other(e.to_string()))?;
    fs::write(cfg.out.join("metrics.json"), json + "\n")?;
    match metrics.cr_at_k {
        Some(cr) => eprintln!("MOAR {:.6}  CR@{} {:.6}", metrics.moar, metrics.k, cr),
        None => eprintln!("MOAR {:.6}  CR@{} n/a", metrics.moar, metrics.k),
    }
    Ok(())
}

const BENCH_HEADER: &str =
    "root_filter,warm_up,svf,wall_ms,speedup,identical,naive_check,batches,queries,candidates,heap_replacements";

fn cmd_bench_mining(cfg: &ExperimentConfig) -> Result<()> {
    let data = load_dataset(cfg)?;
    prepare_out(cfg)?;
    let ckpt = cfg.checkpoint.clone().unwrap_or_else(|| cfg.out.join("model.ckpt"));
    let mut model = if cfg.pretrain {
        pretrain_model(cfg, &data)?
    } else if ckpt.exists() {
        load_model(cfg, &data)?
    } else {
        eprintln!("no checkpoint at {}; mining with a randomly initialized model", ckpt.display());
        Model::random(cfg.model, cfg.dim, data.vocab.num_entities(), data.vocab.num_relations(), cfg.seed)
            .map_err(model_error)?
    };
    model.set_rel_norm(cfg.rel_norm);
    let svf = build_svf(&data);
    let svf_options: &[bool] = if svf.is_some() { &[false, true] } else { &[false] };
    let visited = data.known.clone();

    let mut rows = Vec::new();
    for &use_svf in svf_options {
        for (root_filter, warm_up) in [(false, false), (false, true), (true, false), (true, true)] {
            let mc = MiningConfig {
                root_filter,
                warm_up,
                svf: use_svf,
                ..cfg.mining_config()
            };
            let t0 = Instant::now();
            let mined = mine(&model, &visited, svf.as_ref(), &mc).map_err(|e| CliError::Other(e.to_string()))?;
            let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
            eprintln!("root_filter={root_filter} warm_up={warm_up} svf={use_svf}: {wall_ms:.1} ms");
            rows.push((mc, wall_ms, mined));
        }
    }

    let svf_for = |on: bool| svf.as_ref().filter(|_| on);
    let space = (model.num_entities() as u64).pow(2) * 2 * model.num_relations() as u64;
    let mut naive: Vec<Option<FactSet>> = Vec::new();
    for &use_svf in svf_options {
        naive.push(if space <= cfg.naive_guard {
            let facts = mine_naive(&model, &visited, svf_for(use_svf), cfg.svf_tails, cfg.nc, cfg.naive_guard)
                .map_err(|e| CliError::Other(e.to_string()))?;
            Some(facts.into_iter().map(|(f, _)| f).collect())
        } else {
            None
        });
    }
    if space > cfg.naive_guard {
        eprintln!("candidate space {space} exceeds naive_guard {}; brute-force check skipped", cfg.naive_guard);
    }

    let baseline_ms = rows[0].1;
    let mut w = BufWriter::new(File::create(cfg.out.join("bench_mining.csv"))?);
    writeln!(w, "{BENCH_HEADER}")?;
    for (mc, wall_ms, mined) in &rows {
        let group = usize::from(mc.svf);
        let reference = rows[group * 4].2.fact_set();
        let set = mined.fact_set();
        let check = match &naive[group] {
            Some(n) if *n == set => "match",
            Some(_) => "mismatch",
            None => "skipped",
        };
        let s: &MiningStats = &mined.stats;
        writeln!(
            w,
            "{},{},{},{:.3},{:.3},{},{},{},{},{},{}",
            mc.root_filter,
            mc.warm_up,
            mc.svf,
            wall_ms,
            baseline_ms / wall_ms.max(1e-9),
            set == reference,
            check,
            s.batches.len(),
            s.queries,
            s.candidates,
            s.heap_replacements
        )?;
    }
    w.flush()?;
    eprintln!("wrote {}", cfg.out.join("bench_mining.csv").display());
    Ok(())
}

fn cmd_synth(m: &ArgMatches) -> Result<()> {
    fn num<T: std::str::FromStr>(m: &ArgMatches, key: &str) -> Result<T> {
        let v = m.get_one::<String>(key).expect("has default");
        v.parse().map_err(|_| CliError::Config(format!("--{key}: cannot parse `{v}`")))
    }
    let out = PathBuf::from(m.get_one::<String>("out").expect("required"));
    let cfg = SynthConfig {
        num_entities: num(m, "entities")?,
        num_classes: num(m, "classes")?,
        degree: num(m, "degree")?,
        seed: num(m, "seed")?,
        ..SynthConfig::default()
    };
    let rho = m.get_one::<String>("rho").map(|_| num::<f64>(m, "rho")).transpose()?;
    let kg = synth::generate(&cfg);
    kg.write_dataset(&out, rho, Some(cfg.seed))?;
    eprintln!(
        "wrote {} facts over {} entities and {} relations to {}",
        kg.facts.len(),
        kg.vocab.num_entities(),
        kg.vocab.num_relations(),
        out.display()
    );
    Ok(())
}
