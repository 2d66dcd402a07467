//! Running a federated session either on loopback threads or as one
//! operating-system process per party.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{party_ids, ExperimentConfig, PipelineResult};
use crate::data::{load_csv, write_csv, DataMatrix};
use crate::error::{Error, Result};
use crate::gram::Segment;
use crate::linalg::Matrix;
use crate::protocol::crypto::{CryptoSuite, DalekSuite, SecretKeys};
use crate::protocol::registry::{Endpoint, KeyFile, PartyRegistry, RegistryEntry};
use crate::protocol::session::{
    run_input_party, FunctionOutcome, FunctionParty, FunctionPartyConfig, InputOutcome, InputPartyConfig,
};
use crate::protocol::wire::{decode_matrix, encode_matrix};
use crate::svm::{CvReport, GridSpec};
use crate::PartyId;

const LOOPBACK: &str = "127.0.0.1";
/// Label column used for the CSV files handed to party processes.
pub const LABEL_COLUMN: &str = "label";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PartyLauncher {
    /// Every party on its own thread of this process, talking over
    /// loopback TCP.
    Threads,
    /// Every party as a child process of `exe`, which must provide the
    /// `function-party` and `input-party` subcommands.
    Processes { exe: PathBuf },
}

/// Inputs of one loopback session.
#[derive(Clone, Debug)]
pub struct SessionPlan {
    /// Per party, the samples of each round.
    pub rounds: Vec<Vec<DataMatrix>>,
    pub mask_seed: u64,
    pub width: Option<usize>,
    pub chunk_rows: usize,
    pub timeout: Duration,
    pub training: Option<GridSpec>,
    pub record_frames: bool,
    pub suite: Arc<dyn CryptoSuite>,
    /// Party `i` uses `SecretKeys::from_seed(key_seed + i)`.
    pub key_seed: u64,
}

impl SessionPlan {
    pub fn single_round(parts: Vec<DataMatrix>, mask_seed: u64) -> Self {
        SessionPlan {
            rounds: parts.into_iter().map(|p| vec![p]).collect(),
            mask_seed,
            width: None,
            chunk_rows: crate::protocol::session::DEFAULT_CHUNK_ROWS,
            timeout: crate::protocol::session::DEFAULT_TIMEOUT,
            training: None,
            record_frames: false,
            suite: Arc::new(DalekSuite),
            key_seed: mask_seed ^ 0x5EED,
        }
    }
}

pub struct LoopbackOutcome {
    pub function: FunctionOutcome,
    pub inputs: Vec<InputOutcome>,
    pub registry: PartyRegistry,
    /// Secret keys of the input parties, in registry order. The function
    /// party itself is never given any.
    pub input_secrets: Vec<(PartyId, SecretKeys)>,
}

fn registry_for(suite: &dyn CryptoSuite, secrets: &[(PartyId, SecretKeys)], function: Endpoint) -> Result<PartyRegistry> {
    let entries = secrets
        .iter()
        .map(|(id, sk)| RegistryEntry::new(id.clone(), &suite.public_keys(sk), Endpoint { address: LOOPBACK.into(), port: 0 }))
        .collect();
    PartyRegistry::new(function, entries)
}

pub fn run_loopback(plan: &SessionPlan) -> Result<LoopbackOutcome> {
    let ids = party_ids(plan.rounds.len());
    let secrets: Vec<(PartyId, SecretKeys)> =
        ids.iter().enumerate().map(|(i, id)| (id.clone(), SecretKeys::from_seed(plan.key_seed.wrapping_add(i as u64)))).collect();
    let listener = TcpListener::bind((LOOPBACK, 0))?;
    let port = listener.local_addr()?.port();
    let registry = registry_for(plan.suite.as_ref(), &secrets, Endpoint { address: LOOPBACK.into(), port })?;
    let rounds = plan.rounds.first().map_or(0, Vec::len);
    if plan.rounds.iter().any(|r| r.len() != rounds) {
        return Err(Error::Config("every party needs the same number of rounds".into()));
    }

    let function = FunctionParty::with_listener(
        listener,
        FunctionPartyConfig {
            registry: registry.clone(),
            rounds,
            timeout: plan.timeout,
            record_frames: plan.record_frames,
            training: plan.training.clone(),
        },
    )?;
    let function = thread::spawn(move || function.run());
    let handles: Vec<_> = secrets
        .iter()
        .zip(&plan.rounds)
        .enumerate()
        .map(|(i, ((id, secret), data))| {
            let config = InputPartyConfig {
                party_id: id.clone(),
                registry: registry.clone(),
                secret: secret.clone(),
                suite: Arc::clone(&plan.suite),
                rounds: data.clone(),
                seed: Some(plan.mask_seed),
                width: plan.width,
                private_seed: plan.mask_seed.wrapping_add(1 + i as u64).rotate_left(17),
                chunk_rows: plan.chunk_rows,
                timeout: plan.timeout,
            };
            thread::spawn(move || run_input_party(&config))
        })
        .collect();

    let inputs: Vec<Result<InputOutcome>> = handles.into_iter().map(|h| h.join().expect("input party thread panicked")).collect();
    let function = function.join().expect("function party thread panicked");
    let mut outcomes = Vec::with_capacity(inputs.len());
    let mut errors = Vec::new();
    for result in inputs {
        match result {
            Ok(outcome) => outcomes.push(outcome),
            Err(err) => errors.push(err),
        }
    }
    // a party's own failure explains the session abort others report
    let secondary = |e: &Error| matches!(e, Error::Remote(_) | Error::Io(_) | Error::Protocol(_) | Error::Timeout(_));
    if let Some(pos) = errors.iter().position(|e| !secondary(e)) {
        return Err(errors.swap_remove(pos));
    }
    if let Some(err) = errors.into_iter().next() {
        return Err(err);
    }
    Ok(LoopbackOutcome { function: function?, inputs: outcomes, registry, input_secrets: secrets })
}

/// Federated pipeline; returns the timings, CV report and assembled Gram.
pub fn run_federated(config: &ExperimentConfig, parts: &[DataMatrix], launcher: &PartyLauncher) -> Result<(PipelineResult, Matrix)> {
    match launcher {
        PartyLauncher::Threads => {
            let mut plan = SessionPlan::single_round(parts.to_vec(), config.mask_seed());
            plan.width = config.k;
            plan.chunk_rows = config.chunk_rows;
            plan.timeout = config.timeout();
            plan.training = Some(config.grid());
            let outcome = run_loopback(&plan)?;
            let function = outcome.function;
            let result = PipelineResult {
                cv: function.cv.ok_or_else(|| Error::Protocol("function party did not train".into()))?,
                masking_s: outcome.inputs[0].rounds[0].masking.as_secs_f64(),
                gram_s: function.gram_times[0].as_secs_f64(),
                training_s: function.training_time.unwrap_or_default().as_secs_f64(),
            };
            Ok((result, function.gram.values().clone()))
        }
        PartyLauncher::Processes { exe } => run_processes(config, parts, exe),
    }
}

/// What a function-party process leaves behind in its output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionSummary {
    pub segments: Vec<Segment>,
    pub labels: Option<Vec<i64>>,
    pub gram_times_s: Vec<f64>,
    pub training_s: Option<f64>,
    pub cv: Option<CvReport>,
    pub relayed_envelopes: usize,
}

pub const FUNCTION_SUMMARY: &str = "function.json";
pub const GRAM_FILE: &str = "gram.bin";

#[derive(Clone, Debug)]
pub struct FunctionPartyArgs {
    pub registry: PathBuf,
    pub listen: String,
    pub rounds: usize,
    pub timeout: Duration,
    pub grid: Option<PathBuf>,
    pub out_dir: PathBuf,
}

/// Serves one session, then writes [`FUNCTION_SUMMARY`] and the Gram matrix
/// ([`GRAM_FILE`], matrix wire encoding) into `out_dir`.
pub fn function_party_main(args: &FunctionPartyArgs, on_listening: impl FnOnce(SocketAddr)) -> Result<FunctionSummary> {
    let registry = PartyRegistry::load(&args.registry)?;
    let training = match &args.grid {
        Some(path) => Some(serde_json::from_str::<GridSpec>(&fs::read_to_string(path)?)?),
        None => None,
    };
    let listener = TcpListener::bind(&args.listen)?;
    let party = FunctionParty::with_listener(
        listener,
        FunctionPartyConfig { registry, rounds: args.rounds, timeout: args.timeout, record_frames: false, training },
    )?;
    on_listening(party.local_addr()?);
    let outcome = party.run()?;
    let summary = FunctionSummary {
        segments: outcome.gram.segments().to_vec(),
        labels: outcome.labels.clone(),
        gram_times_s: outcome.gram_times.iter().map(Duration::as_secs_f64).collect(),
        training_s: outcome.training_time.map(|d| d.as_secs_f64()),
        cv: outcome.cv.clone(),
        relayed_envelopes: outcome.relayed_envelopes.len(),
    };
    fs::create_dir_all(&args.out_dir)?;
    fs::write(args.out_dir.join(GRAM_FILE), encode_matrix(outcome.gram.values()))?;
    fs::write(args.out_dir.join(FUNCTION_SUMMARY), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub party_id: PartyId,
    pub leader: bool,
    pub envelopes_sent: usize,
    pub envelopes_received: usize,
    pub width: usize,
    pub rows: Vec<usize>,
    pub masking_s: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct InputPartyArgs {
    pub registry: PathBuf,
    pub key: PathBuf,
    /// CSV per round; the first is the initial data.
    pub data: Vec<PathBuf>,
    pub label_column: Option<String>,
    pub seed: Option<u64>,
    pub width: Option<usize>,
    pub private_seed: u64,
    pub chunk_rows: usize,
    pub timeout: Duration,
    pub out: Option<PathBuf>,
}

pub fn input_party_main(args: &InputPartyArgs) -> Result<InputSummary> {
    let registry = PartyRegistry::load(&args.registry)?;
    let key = KeyFile::load(&args.key)?;
    let rounds = args.data.iter().map(|p| load_csv(p, args.label_column.as_deref())).collect::<Result<Vec<_>>>()?;
    let config = InputPartyConfig {
        party_id: key.party_id.clone(),
        registry,
        secret: key.secret_keys()?,
        suite: Arc::new(DalekSuite),
        rounds,
        seed: args.seed,
        width: args.width,
        private_seed: args.private_seed,
        chunk_rows: args.chunk_rows,
        timeout: args.timeout,
    };
    let outcome = run_input_party(&config)?;
    let summary = InputSummary {
        party_id: outcome.party_id,
        leader: outcome.leader,
        envelopes_sent: outcome.envelopes_sent,
        envelopes_received: outcome.envelopes_received,
        width: outcome.dims.width,
        rows: outcome.rounds.iter().map(|r| r.rows).collect(),
        masking_s: outcome.rounds.iter().map(|r| r.masking.as_secs_f64()).collect(),
    };
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(summary)
}

/// Kills still-running children when dropped.
struct Children(Vec<(String, Child)>);

impl Drop for Children {
    fn drop(&mut self) {
        for (_, child) in &mut self.0 {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Children {
    fn wait_all(&mut self, timeout: Duration) -> Result<()> {
        let deadline = Instant::now() + timeout;
        let mut failures = Vec::new();
        for (name, child) in &mut self.0 {
            loop {
                if let Some(status) = child.try_wait()? {
                    if !status.success() {
                        let mut stderr = String::new();
                        if let Some(mut pipe) = child.stderr.take() {
                            let _ = pipe.read_to_string(&mut stderr);
                        }
                        failures.push(format!("{name} exited with {status}: {}", stderr.trim()));
                    }
                    break;
                }
                if Instant::now() > deadline {
                    return Err(Error::Timeout(format!("process {name}")));
                }
                thread::sleep(Duration::from_millis(10));
            }
        }
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::Protocol(failures.join("; ")))
        }
    }
}

fn run_processes(config: &ExperimentConfig, parts: &[DataMatrix], exe: &Path) -> Result<(PipelineResult, Matrix)> {
    let dir = tempfile::tempdir()?;
    let root = dir.path();
    let suite = DalekSuite;
    let ids = party_ids(parts.len());
    let secrets: Vec<(PartyId, SecretKeys)> = ids.iter().map(|id| (id.clone(), SecretKeys::random())).collect();
    for ((id, secret), data) in secrets.iter().zip(parts) {
        KeyFile::new(id.clone(), secret).save(root.join(format!("{id}.key.json")))?;
        write_csv(data, root.join(format!("{id}.csv")))?;
    }
    let function_registry = root.join("function-registry.json");
    registry_for(&suite, &secrets, Endpoint { address: LOOPBACK.into(), port: 0 })?.save(&function_registry)?;
    let grid_path = root.join("grid.json");
    fs::write(&grid_path, serde_json::to_string(&config.grid())?)?;
    let timeout = config.timeout_s.to_string();
    let out_dir = root.join("function-out");

    let mut children = Children(Vec::new());
    let mut function = Command::new(exe)
        .arg("function-party")
        .args(["--registry".as_ref(), function_registry.as_os_str()])
        .args(["--listen", &format!("{LOOPBACK}:0"), "--rounds", "1", "--timeout", &timeout])
        .args(["--grid".as_ref(), grid_path.as_os_str(), "--out".as_ref(), out_dir.as_os_str()])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let stdout = function.stdout.take().expect("piped stdout");
    children.0.push(("function-party".into(), function));
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line)?;
    let addr: SocketAddr = line
        .trim()
        .strip_prefix("LISTENING ")
        .and_then(|a| a.parse().ok())
        .ok_or_else(|| Error::Protocol(format!("function party did not report its address (got {line:?})")))?;

    let registry_path = root.join("registry.json");
    registry_for(&suite, &secrets, Endpoint { address: addr.ip().to_string(), port: addr.port() })?.save(&registry_path)?;
    for (i, id) in ids.iter().enumerate() {
        let mut cmd = Command::new(exe);
        cmd.arg("input-party")
            .args(["--registry".as_ref(), registry_path.as_os_str()])
            .args(["--key".as_ref(), root.join(format!("{id}.key.json")).as_os_str()])
            .args(["--data".as_ref(), root.join(format!("{id}.csv")).as_os_str()])
            .args(["--label-column", LABEL_COLUMN, "--seed", &config.mask_seed().to_string()])
            .args(["--private-seed", &(config.seed.wrapping_add(1 + i as u64)).to_string()])
            .args(["--chunk-rows", &config.chunk_rows.to_string(), "--timeout", &timeout])
            .args(["--out".as_ref(), root.join(format!("{id}.out.json")).as_os_str()])
            .stdout(Stdio::null())
            .stderr(Stdio::piped());
        if let Some(k) = config.k {
            cmd.args(["--width", &k.to_string()]);
        }
        children.0.push((id.to_string(), cmd.spawn()?));
    }
    // training runs inside the function party before it exits
    children.wait_all(config.timeout() * 4 + Duration::from_secs(600))?;

    let summary: FunctionSummary = serde_json::from_str(&fs::read_to_string(out_dir.join(FUNCTION_SUMMARY))?)?;
    let gram = decode_matrix(&fs::read(out_dir.join(GRAM_FILE))?)?;
    let first: InputSummary = serde_json::from_str(&fs::read_to_string(root.join(format!("{}.out.json", ids[0])))?)?;
    let result = PipelineResult {
        cv: summary.cv.ok_or_else(|| Error::Protocol("function party did not train".into()))?,
        masking_s: first.masking_s[0],
        gram_s: summary.gram_times_s[0],
        training_s: summary.training_s.unwrap_or_default(),
    };
    Ok((result, gram))
}
