//! `eeglog`: ingestion, training, analytics and fixtures from the shell.
//!
//! Exit status is 0 on success, 1 on usage errors and the error code's
//! `exit_code()` on any engine failure.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use eeglog_core::analytics::{parse_utc_offset, ActivitySeries, ActivitySummary, MemorialMoments, Period, Span};
use eeglog_core::classifier::TrainOptions;
use eeglog_core::datamodel::{profile_by_id, EmotionQuadrant, Scope, SessionLog, Target};
use eeglog_core::ingest::{ingest_session, read_session, resolve_recording_ref, RecordingStatus};
use eeglog_core::recommend::Playlist;
use eeglog_core::store::{encode_document, Store, FORMAT_VERSION};
use eeglog_core::synthgen::{
    generate_corpus, random_history, write_corpus, write_public_fixture, CorpusOptions, CORPUS_EPOCH_TS,
    PUBLIC_TRIAL_SECONDS,
};
use eeglog_core::ingest::write_session;
use eeglog_core::{Error, Result};
use eeglog_service::ops::{self, TrainReport};
use eeglog_service::{resolve_activity_period, ServiceConfig, DEFAULT_RECOMMEND_LIMIT};

use config::{FileConfig, Overrides, Settings};

#[derive(Debug, Parser)]
#[command(name = "eeglog", version, about = "EEG lifelog: ingest, train, detect, review")]
struct Cli {
    /// Print results as JSON documents.
    #[arg(long, global = true)]
    json: bool,
    /// Store directory.
    #[arg(long, global = true, env = "EEGLOG_DATA")]
    data: Option<PathBuf>,
    /// TOML config file (default: ./eeglog.toml when present).
    #[arg(long, global = true, env = "EEGLOG_CONFIG")]
    config: Option<PathBuf>,
    /// Calendar offset for period queries, e.g. +02:00.
    #[arg(long, global = true, env = "EEGLOG_TZ")]
    tz: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// File a session, with its recording, into the store.
    Ingest(IngestArgs),
    /// Train the valence and arousal models of one device and scope.
    Train(TrainArgs),
    /// Show the accuracies of the stored models of a device.
    Evaluate {
        #[arg(long)]
        device: String,
    },
    /// Weekly activity totals.
    Summary(PeriodArgs),
    /// The month's highest and lowest valence and arousal reports.
    Moments(PeriodArgs),
    /// Reported scores over a day, week or month.
    Activity {
        #[command(flatten)]
        period: PeriodArgs,
        #[arg(long, default_value = "valence")]
        dimension: String,
    },
    /// Songs from the user's history that match a quadrant.
    Recommend {
        #[arg(long)]
        user: String,
        #[arg(long)]
        quadrant: String,
        #[arg(long, default_value_t = DEFAULT_RECOMMEND_LIMIT)]
        limit: usize,
    },
    /// Generate synthetic fixtures.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Run the local HTTP service.
    Serve {
        #[arg(long, env = "EEGLOG_PORT")]
        port: Option<u16>,
        #[arg(long)]
        public_root: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// `<recording.csv> <session.json>`, or only `<session.json>` with
    /// `--report-only`.
    #[arg(num_args = 0..=2)]
    paths: Vec<PathBuf>,
    /// Device the recording was made with; must match the session.
    #[arg(long)]
    device: Option<String>,
    /// File the session without a recording.
    #[arg(long)]
    report_only: bool,
    /// Ingest every `*.json` session in a directory, using each session's
    /// `recording_ref` unless `--report-only` is given.
    #[arg(long, conflicts_with = "paths")]
    corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    device: String,
    #[arg(long, default_value = "device")]
    scope: String,
    #[arg(long)]
    public_root: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct PeriodArgs {
    #[arg(long)]
    user: String,
    /// `YYYY-MM-DD`, `YYYY-Www` or `YYYY-MM`.
    #[arg(long)]
    period: String,
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// Sessions and recordings with a known quadrant per trial.
    Corpus {
        #[arg(long)]
        device: String,
        #[arg(long, conflicts_with = "total", required_unless_present = "total")]
        per_quadrant: Option<usize>,
        #[arg(long)]
        total: Option<usize>,
        #[arg(long, default_value_t = 3)]
        users: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Public-dataset tree for general-model training.
    Public {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = PUBLIC_TRIAL_SECONDS)]
        trial_seconds: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report-only sessions for analytics.
    History {
        #[arg(long)]
        user: String,
        #[arg(long, default_value_t = 90)]
        days: u32,
        #[arg(long, default_value_t = 60)]
        sessions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A result that prints as text or as a JSON document.
struct Output {
    text: String,
    json: serde_json::Value,
}

impl Output {
    fn new<T: Serialize>(value: &T, text: String) -> Result<Self> {
        Ok(Self {
            text,
            json: serde_json::from_str(&encode_document(value)?).expect("encoder emits JSON"),
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(out) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("value serializes"));
            } else {
                print!("{}", out.text);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if json {
                let doc = serde_json::json!({
                    "format_version": FORMAT_VERSION,
                    "error": {"code": e.code().as_str(), "message": e.to_string()},
                });
                println!("{doc}");
            }
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.code().exit_code() as u8)
        }
    }
}

fn settings(cli: &Cli, port: Option<u16>, public_root: Option<PathBuf>) -> Result<Settings> {
    let file = FileConfig::load(cli.config.as_deref())?;
    Ok(config::resolve(
        Overrides {
            data_dir: cli.data.clone(),
            port,
            public_root,
            utc_offset: cli.tz.clone(),
            seed: None,
        },
        file,
    ))
}

fn run(cli: Cli) -> Result<Output> {
    match &cli.command {
        Command::Synth(cmd) => synth(cmd),
        Command::Serve { port, public_root } => {
            let s = settings(&cli, *port, public_root.clone())?;
            serve(s)
        }
        cmd => {
            let public_root = match cmd {
                Command::Train(a) => a.public_root.clone(),
                _ => None,
            };
            let s = settings(&cli, None, public_root)?;
            let store = Store::open(&s.data_dir)?;
            store_command(cmd, &store, &s)
        }
    }
}

fn store_command(cmd: &Command, store: &Store, s: &Settings) -> Result<Output> {
    let tz = parse_utc_offset(&s.utc_offset)?;
    match cmd {
        Command::Ingest(a) => ingest(a, store),
        Command::Train(a) => {
            let scope: Scope = a.scope.parse()?;
            let opts = TrainOptions {
                seed: a.seed.unwrap_or(s.seed),
                ..TrainOptions::default()
            };
            let (v, ar) = ops::train(store, &a.device, scope, s.public_root.as_deref(), &opts)?;
            let report = TrainReport::from_models(&v, &ar);
            let mut text = accuracy_table(std::slice::from_ref(&report));
            let _ = writeln!(
                text,
                "features {} -> valence {}, arousal {}; n_train {}, n_test {}",
                report.feature_dim, report.valence_features, report.arousal_features, report.n_train, report.n_test
            );
            Output::new(&report, text)
        }
        Command::Evaluate { device } => {
            profile_by_id(device)?;
            let mut rows = Vec::new();
            for scope in [Scope::Device, Scope::General] {
                match ops::model_pair(store, device, scope) {
                    Ok((v, a)) => rows.push(TrainReport::from_models(&v, &a)),
                    Err(Error::NotFound(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            if rows.is_empty() {
                return Err(Error::NotFound(format!("trained models for {device}")));
            }
            let text = accuracy_table(&rows);
            Output::new(&serde_json::json!({ "device_id": device, "rows": rows }), text)
        }
        Command::Summary(p) => {
            let week: Period = p.period.parse()?;
            let r = ops::summary(store, &p.user, &week, &tz)?;
            Output::new(&r, summary_text(&week, &r))
        }
        Command::Moments(p) => {
            let month: Period = p.period.parse()?;
            let r = ops::moments(store, &p.user, &month, &tz)?;
            Output::new(&r, moments_text(&r))
        }
        Command::Activity { period, dimension } => {
            let dim: Target = dimension.parse()?;
            // a bare span (`--period week`) means the one holding the latest report
            let (span, explicit) = match period.period.parse::<Period>() {
                Ok(p) => (p.span(), Some(period.period.as_str())),
                Err(e) => (period.period.parse::<Span>().map_err(|_| e)?, None),
            };
            let p = resolve_activity_period(store, &period.user, span, explicit, None, &tz)?;
            let r = ops::activity(store, &period.user, &p, dim, &tz)?;
            Output::new(&r, activity_text(&r))
        }
        Command::Recommend { user, quadrant, limit } => {
            let q: EmotionQuadrant = quadrant.parse()?;
            let r = ops::recommend(store, user, q, *limit)?;
            Output::new(&r, playlist_text(&r))
        }
        Command::Synth(_) | Command::Serve { .. } => unreachable!("handled without a store"),
    }
}

#[derive(Serialize)]
struct Ingested {
    user_id: String,
    session_id: String,
    n_trials: usize,
    recording: RecordingStatus,
}

fn ingest_one(store: &Store, session: &SessionLog, recording: Option<&Path>) -> Result<Ingested> {
    let (stored, status) = ingest_session(store, session, recording)?;
    Ok(Ingested {
        user_id: stored.user_id,
        session_id: stored.session_id,
        n_trials: stored.trials.len(),
        recording: status,
    })
}

fn ingest(a: &IngestArgs, store: &Store) -> Result<Output> {
    let check_device = |s: &SessionLog| match &a.device {
        Some(d) if *d != s.device_id => Err(Error::ProfileMismatch {
            expected: s.device_id.clone(),
            got: d.clone(),
        }),
        _ => Ok(()),
    };
    let done: Vec<Ingested> = if let Some(dir) = &a.corpus {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        files
            .iter()
            .map(|path| {
                let session = read_session(path)?;
                check_device(&session)?;
                let recording = (!a.report_only).then(|| resolve_recording_ref(path, &session));
                ingest_one(store, &session, recording.as_deref())
            })
            .collect::<Result<_>>()?
    } else {
        let (recording, session_path) = match (a.paths.as_slice(), a.report_only) {
            ([rec, session], false) => (Some(rec.as_path()), session),
            ([session], true) => (None, session),
            _ => {
                return Err(Error::InvalidInput(
                    "expected <recording.csv> <session.json>, or --report-only <session.json>".into(),
                ))
            }
        };
        let session = read_session(session_path)?;
        check_device(&session)?;
        if recording.is_some() && a.device.is_none() {
            return Err(Error::InvalidInput("--device is required with a recording".into()));
        }
        vec![ingest_one(store, &session, recording)?]
    };
    let mut text = String::new();
    for d in &done {
        let rec = match d.recording {
            RecordingStatus::Stored => "recording stored",
            RecordingStatus::Missing => "no recording",
        };
        let _ = writeln!(text, "ingested {}/{} ({} trials, {rec})", d.user_id, d.session_id, d.n_trials);
    }
    Output::new(&serde_json::json!({ "ingested": done }), text)
}

fn synth(cmd: &SynthCommand) -> Result<Output> {
    match cmd {
        SynthCommand::Corpus {
            device,
            per_quadrant,
            total,
            users,
            seed,
            out,
        } => {
            let profile = profile_by_id(device)?;
            let mut opts = match (per_quadrant, total) {
                (Some(n), _) => CorpusOptions::per_quadrant(*n, *seed),
                (None, Some(n)) => CorpusOptions::total(*n, *seed),
                (None, None) => return Err(Error::InvalidInput("pass --per-quadrant or --total".into())),
            };
            opts.users = *users;
            let corpus = generate_corpus(&profile, &opts)?;
            let paths = write_corpus(&corpus, out)?;
            let summary = serde_json::json!({
                "device_id": device,
                "out": out,
                "n_sessions": paths.len(),
                "n_epochs": corpus.epochs.len(),
            });
            let text = format!(
                "wrote {} sessions ({} epochs) to {}\n",
                paths.len(),
                corpus.epochs.len(),
                out.display()
            );
            Output::new(&summary, text)
        }
        SynthCommand::Public { seed, trial_seconds, out } => {
            write_public_fixture(out, *seed, *trial_seconds)?;
            let text = format!("wrote public fixture to {}\n", out.display());
            Output::new(&serde_json::json!({ "out": out }), text)
        }
        SynthCommand::History {
            user,
            days,
            sessions,
            seed,
            out,
        } => {
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            let history = random_history(user, CORPUS_EPOCH_TS, *days, *sessions, *seed);
            for s in &history {
                write_session(out.join(format!("{}.json", s.session_id)), s)?;
            }
            let text = format!("wrote {} sessions to {}\n", history.len(), out.display());
            Output::new(&serde_json::json!({ "out": out, "n_sessions": history.len() }), text)
        }
    }
}

fn serve(s: Settings) -> Result<Output> {
    let mut config = ServiceConfig::new(&s.data_dir);
    config.public_root = s.public_root;
    config.utc_offset = parse_utc_offset(&s.utc_offset)?;
    config.bind.set_port(s.port);
    config.seed = s.seed;
    eprintln!("serving {} on http://{}/api/v1", s.data_dir.display(), config.bind);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(eeglog_service::serve(config))?;
    Output::new(&serde_json::json!({ "stopped": true }), String::new())
}

fn accuracy_table(rows: &[TrainReport]) -> String {
    let mut t = format!(
        "{:<18} {:<8} {:>8} {:>8} {:>8} {:>8}\n",
        "device_id", "scope", "v_train", "v_test", "a_train", "a_test"
    );
    for r in rows {
        let a = &r.accuracy;
        let _ = writeln!(
            t,
            "{:<18} {:<8} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r.device_id,
            r.scope.as_str(),
            a.v_train,
            a.v_test,
            a.a_train,
            a.a_test
        );
    }
    t
}

fn summary_text(week: &Period, r: &ActivitySummary) -> String {
    format!(
        "{week}: {:.1} EEG minutes, {} reports, {} songs\n",
        r.eeg_minutes, r.n_reports, r.n_songs
    )
}

fn moments_text(m: &MemorialMoments) -> String {
    let mut t = format!("{}\n", m.month);
    for (name, h) in [
        ("max valence", &m.max_valence),
        ("min valence", &m.min_valence),
        ("max arousal", &m.max_arousal),
        ("min arousal", &m.min_arousal),
    ] {
        let _ = writeln!(t, "{name:<12} {:>5.1}  {}  {}", h.value, h.day, h.song.title);
    }
    t
}

fn activity_text(s: &ActivitySeries) -> String {
    let mut t = format!("{} {} ({} reports)\n", s.period, s.dimension.as_str(), s.points.len());
    for p in &s.points {
        let _ = writeln!(t, "{}  {:>5.1}  {}", p.day, p.score, p.song.title);
    }
    t
}

fn playlist_text(p: &Playlist) -> String {
    if p.songs.is_empty() {
        return format!("no songs in this history match {}\n", p.desired);
    }
    let mut t = String::new();
    for (i, e) in p.songs.iter().enumerate() {
        let _ = writeln!(t, "{:>2}. {} ({} listens)", i + 1, e.song.title, e.listen_count);
    }
    t
}
