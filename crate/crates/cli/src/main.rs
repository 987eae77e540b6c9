//! `saasr` command-line front end: simulate sessions, transcribe them,
//! build training labels and score transcripts.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use saasr::decoder::{BigramScorer, ExternalScorer};
use saasr::diarize::{cluster_recognized, recognize_segments, segment_features, transcribe_with_profiles, Counting, DiarizeConfig, Embedding};
use saasr::io::{peek_kind, read_json, score_transcripts, write_json, write_atomic, LabelsFile, ReportFile, SessionFile, TranscriptFile};
use saasr::labels::{build_labels, Scheme};
use saasr::layout::STACK;
use saasr::model::constructed::{pointer_model, PointerGains};
use saasr::model::{Model, SpeakerInventory, SpeakerProfile, Vocabulary};
use saasr::simgen::{generate_meeting, generate_mixture, MeetingConfig, MixtureConfig, Preset, SyntheticSession};
use saasr::{Error, Execution};

#[derive(Parser)]
#[command(name = "saasr", version, about = "Speaker-attributed recognition, diarization and scoring on synthetic sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic session file.
    Simulate(SimulateArgs),
    /// Recognize and attribute a session, writing a transcript file.
    Transcribe(TranscribeArgs),
    /// Score hypothesis transcripts against references.
    Score(ScoreArgs),
    /// Serialize a session's references into training labels.
    BuildLabels(BuildLabelsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Meeting layout: 0S, 0L, 10, 20, 30 or 40.
    #[arg(long, conflicts_with = "mixture")]
    preset: Option<Preset>,
    /// Generate a fully overlapped training-style mixture instead of a meeting.
    #[arg(long)]
    mixture: bool,
    /// Generator configuration (JSON); `--preset` overrides its preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Store features as plain JSON numbers instead of base64 `f32`.
    #[arg(long)]
    array: bool,
    #[arg(long, short)]
    out: PathBuf,
    /// Also write the reader model matching the session layout.
    #[arg(long)]
    write_model: Option<PathBuf>,
    /// Also write the vocabulary, one token per line.
    #[arg(long)]
    write_vocab: Option<PathBuf>,
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    /// Profile-free: decode with example profiles, then count and cluster.
    #[default]
    Clustering,
    /// Decode with the profiles of the people present.
    Profiles,
}

/// Everything that determines a transcription run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    model: Option<PathBuf>,
    vocabulary: Option<PathBuf>,
    /// Profiles file for profile mode; the session's own profiles otherwise.
    profiles: Option<PathBuf>,
    /// Bigram table (JSON list of rows of log-scores) for shallow fusion.
    lm: Option<PathBuf>,
    fusion_weight: f64,
    mode: Mode,
    sequential: bool,
    diarize: DiarizeConfig,
}

#[derive(Args)]
struct TranscribeArgs {
    #[arg(long)]
    session: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Run configuration (JSON); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model parameter file; defaults to the reader model for the session layout.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long)]
    lm: Option<PathBuf>,
    #[arg(long)]
    fusion_weight: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// `query` or `weighted_profile`.
    #[arg(long)]
    embedding: Option<Embedding>,
    /// `nme` or `oracle:K`.
    #[arg(long)]
    counting: Option<Counting>,
    #[arg(long)]
    max_speakers: Option<usize>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Weight of the speaker term added to the beam score.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    length_bonus: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    vad_threshold: Option<f64>,
    #[arg(long)]
    min_silence: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run every stage on the calling thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Breakdown {
    Preset,
}

#[derive(Args)]
struct ScoreArgs {
    /// Reference transcript or session file; repeat once per hypothesis.
    #[arg(long = "ref", required = true)]
    references: Vec<PathBuf>,
    #[arg(long = "hyp", required = true)]
    hypotheses: Vec<PathBuf>,
    #[arg(long, value_enum)]
    breakdown: Option<Breakdown>,
    /// DER frame length in seconds.
    #[arg(long, default_value_t = 0.01)]
    resolution: f64,
    /// Report path; standard output when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildLabelsArgs {
    #[arg(long)]
    session: PathBuf,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Scheme,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_session(path: &Path) -> Result<SyntheticSession> {
    let file: SessionFile = read_json(path)?;
    Ok(file.into_session()?)
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, value).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let session = if a.mixture {
        let cfg: MixtureConfig = match &a.config {
            Some(p) => read_json(p)?,
            None => MixtureConfig::default(),
        };
        if a.print_config {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
        let s = generate_mixture(a.seed, &cfg)?;
        write_json(&a.out, &SessionFile::new(&s, &cfg, !a.array)?)?;
        s
    } else {
        let mut cfg: MeetingConfig = match &a.config {
            Some(p) => read_json(p)?,
            None => MeetingConfig::default(),
        };
        if let Some(p) = a.preset {
            cfg.preset = p;
        }
        if a.print_config {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
        let s = generate_meeting(a.seed, &cfg)?;
        write_json(&a.out, &SessionFile::new(&s, &cfg, !a.array)?)?;
        s
    };
    log::info!("session with {} utterances from {} speakers written to {}", session.references.len(), session.speaker_ids().len(), a.out.display());
    if let Some(p) = &a.write_model {
        let model = pointer_model(&session.layout, session.vocabulary.eos(), session.vocabulary.sc(), &PointerGains::default())?;
        write_atomic(p, model.to_json(!a.array)?.as_bytes())?;
    }
    if let Some(p) = &a.write_vocab {
        write_atomic(p, session.vocabulary.render().as_bytes())?;
    }
    Ok(())
}

fn resolve(a: &TranscribeArgs) -> Result<RunConfig> {
    let mut c: RunConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = a.$flag.clone() { c.$($field).+ = v.into(); })*
        };
    }
    set!(
        model => model, vocab => vocabulary, profiles => profiles, lm => lm, fusion_weight => fusion_weight, mode => mode,
        embedding => diarize.embedding, counting => diarize.counting, max_speakers => diarize.max_speakers,
        beam_width => diarize.beam.beam_width, max_len => diarize.beam.max_len, length_bonus => diarize.beam.length_bonus,
        margin => diarize.margin, vad_threshold => diarize.vad.threshold, min_silence => diarize.vad.min_silence, seed => diarize.seed,
    );
    if let Some(g) = a.gamma {
        c.diarize.beam.speaker_term = Some(g);
    }
    c.sequential |= a.sequential;
    c.diarize.execution = if c.sequential { Execution::Sequential } else { Execution::Parallel };
    c.diarize.validate()?;
    if !c.fusion_weight.is_finite() {
        return Err(Error::Config("fusion weight must be finite".into()).into());
    }
    Ok(c)
}

fn transcribe(a: TranscribeArgs) -> Result<()> {
    let c = resolve(&a)?;
    if a.print_config {
        println!("{}", serde_json::to_string_pretty(&c)?);
    }
    let session = load_session(&a.session)?;
    let model = match &c.model {
        Some(p) => Model::from_json(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => pointer_model(&session.layout, session.vocabulary.eos(), session.vocabulary.sc(), &PointerGains::default())?,
    };
    let vocab = match &c.vocabulary {
        Some(p) => Vocabulary::parse(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => session.vocabulary.clone(),
    };
    if model.vocab_size() != vocab.len() {
        return Err(Error::Schema(format!("model has {} output tokens, vocabulary has {}", model.vocab_size(), vocab.len())).into());
    }
    let lm = match &c.lm {
        Some(p) => {
            let table: Vec<Vec<f64>> = read_json(p)?;
            if table.len() != vocab.len() || table.iter().any(|r| r.len() != vocab.len()) {
                return Err(Error::Schema(format!("bigram table must be {0}x{0}", vocab.len())).into());
            }
            Some(BigramScorer { table, start: vocab.sos(), weight: c.fusion_weight })
        }
        None => None,
    };
    let scorers: Vec<&dyn ExternalScorer> = lm.iter().map(|s| s as &dyn ExternalScorer).collect();

    let segments = segment_features(&session.features, session.layout.energy(), &c.diarize.vad, STACK)?;
    log::info!("{} speech segments", segments.len());
    let utterances = match c.mode {
        Mode::Profiles => {
            let profiles = match &c.profiles {
                Some(p) => read_json::<Vec<SpeakerProfile>>(p)?,
                None => session.relevant_profiles.profiles().to_vec(),
            };
            if profiles.is_empty() {
                return Err(Error::Config("profile mode needs at least one speaker profile".into()).into());
            }
            let inv = SpeakerInventory::new(profiles)?;
            transcribe_with_profiles(&model, &segments, &inv, vocab.specials(), &c.diarize, &scorers)?
        }
        Mode::Clustering => {
            if session.irrelevant_profiles.is_empty() {
                return Err(Error::Config("clustering mode needs example profiles in the session".into()).into());
            }
            let inv = session.example_inventory()?;
            let recognized = recognize_segments(&model, &segments, &inv, vocab.specials(), &c.diarize.beam, c.diarize.margin, &scorers, c.diarize.execution)?;
            let d = cluster_recognized(recognized, &c.diarize)?;
            if let Some(n) = &d.nme {
                log::info!("speaker count {} (neighbourhood size {})", n.k, n.p);
            }
            d.utterances
        }
    };
    write_json(&a.out, &TranscriptFile::from_utterances(Some(session.kind), &utterances, &vocab))?;
    log::info!("{} utterances written to {}", utterances.len(), a.out.display());
    Ok(())
}

fn load_reference(path: &Path) -> Result<TranscriptFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match peek_kind(&text)?.as_str() {
        "session" => {
            let s = load_session(path)?;
            Ok(TranscriptFile::from_references(Some(s.kind), &s.references, &s.vocabulary))
        }
        _ => load_transcript(path),
    }
}

fn load_transcript(path: &Path) -> Result<TranscriptFile> {
    let t: TranscriptFile = read_json(path)?;
    t.check()?;
    Ok(t)
}

fn score(a: ScoreArgs) -> Result<()> {
    if a.references.len() != a.hypotheses.len() {
        return Err(Error::Config(format!("{} --ref files but {} --hyp files", a.references.len(), a.hypotheses.len())).into());
    }
    if !(a.resolution > 0.0) {
        return Err(Error::Config("resolution must be positive".into()).into());
    }
    let mut sessions = Vec::new();
    for (r, h) in a.references.iter().zip(&a.hypotheses) {
        let reference = load_reference(r)?;
        let mut hyp = load_transcript(h)?;
        if hyp.session.is_none() {
            hyp.session = reference.session;
        }
        let name = h.file_stem().map_or_else(|| h.display().to_string(), |s| s.to_string_lossy().into_owned());
        sessions.push(score_transcripts(&name, &reference, &hyp, a.resolution)?);
    }
    emit(a.out.as_deref(), &ReportFile::new(sessions, a.breakdown == Some(Breakdown::Preset)))
}

fn build_labels_cmd(a: BuildLabelsArgs) -> Result<()> {
    let s = load_session(&a.session)?;
    let tokens = build_labels(&s.references, a.scheme, s.vocabulary.specials())?;
    emit(a.out.as_deref(), &LabelsFile::new(a.scheme, tokens, &s.vocabulary))
}

/// 1 for usage and configuration problems, 2 for unreadable or inconsistent
/// data, 3 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Config(_) => 1,
                Error::Schema(_) | Error::Json(_) | Error::Io(_) | Error::Dimension(_) => 2,
                Error::Domain(_) | Error::Contract(_) => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SAASR_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Transcribe(a) => transcribe(a),
        Command::Score(a) => score(a),
        Command::BuildLabels(a) => build_labels_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
