use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dragonlab_core::derive::Profile;
use dragonlab_core::identity::parse_bytes;
use dragonlab_core::Identity;

/// Password or other byte-string argument.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bytes(pub Vec<u8>);

fn parse_password(s: &str) -> Result<Bytes, String> {
    parse_bytes(s).map(Bytes).map_err(|e| e.to_string())
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    Profile::named(s).ok_or_else(|| {
        let names: Vec<&str> = Profile::ALL.iter().map(|p| p.name).collect();
        format!("unknown profile `{s}` (expected one of {})", names.join(", "))
    })
}

fn parse_token(s: &str) -> Result<[u8; 4], String> {
    hex::decode(s).ok().and_then(|v| v.try_into().ok()).ok_or_else(|| "token must be 8 hex digits".to_string())
}

fn parse_size(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if (1.0..1.8e19).contains(&v) => Ok(v.round() as u64),
        _ => Err(format!("`{s}` is not a dictionary size")),
    }
}

fn parse_probability(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(format!("`{s}` is not a probability")),
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "dragonlab",
    version,
    about = "Dragonfly password-element derivation, cache-leak simulation and dictionary partitioning",
    args_override_self = true
)]
pub struct Cli {
    /// Master seed for every random stream. Drawn from OS entropy when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output encoding.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// TOML file whose keys mirror the command-line flags. Flags given on
    /// the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Vulnerable,
    Hardened,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LawArg {
    Power,
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    A,
    B,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Derive the password element and report the iteration that succeeded.
    Derive(DeriveArgs),
    /// Run a full commit/confirm exchange between two simulated parties.
    HandshakeDemo(HandshakeArgs),
    /// Generate synthetic spy traces with known ground truth.
    Simulate(SimulateArgs),
    /// Interpret trace files and extract iteration leaks.
    ParseTraces(ParseArgs),
    /// Remove dictionary entries inconsistent with a set of leaks.
    Prune(PruneArgs),
    /// Closed-form trace budget for dictionaries of the given sizes.
    Plan(PlanArgs),
    /// Fit the noise model to the reference parser-reliability anchors.
    Calibrate(CalibrateArgs),
    /// Time branching against branch-free derivation.
    BenchMitigation(BenchArgs),
    /// Simulate, parse and prune end to end against a planted password.
    Campaign(CampaignArgs),
    /// List dictionary entries that need many iterations for one identity pair.
    Scan(ScanArgs),
    /// Write a reproducible synthetic dictionary.
    GenDict(GenDictArgs),
}

#[derive(Args, Debug)]
pub struct ProfileArg {
    /// Parameter set: iwd-sae, rfc7664-sae or eap-pwd.
    #[arg(long, default_value = "iwd-sae", value_parser = parse_profile)]
    pub profile: Profile,
}

#[derive(Args, Debug)]
pub struct DeriveArgs {
    /// Password (`hex:<digits>` for raw bytes).
    #[arg(long, value_parser = parse_password)]
    pub password: Bytes,
    #[arg(long, default_value = "020000000001")]
    pub id_a: Identity,
    #[arg(long, default_value = "020000000002")]
    pub id_b: Identity,
    /// EAP-pwd session token, 8 hex digits.
    #[arg(long, value_parser = parse_token)]
    pub token: Option<[u8; 4]>,
    #[command(flatten)]
    pub profile: ProfileArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Vulnerable)]
    pub mode: ModeArg,
    /// Also list the operation events of the run.
    #[arg(long)]
    pub events: bool,
}

#[derive(Args, Debug)]
pub struct HandshakeArgs {
    #[arg(long, value_parser = parse_password)]
    pub password_a: Bytes,
    /// Defaults to the password of A.
    #[arg(long, value_parser = parse_password)]
    pub password_b: Option<Bytes>,
    #[arg(long, default_value = "020000000001")]
    pub id_a: Identity,
    #[arg(long, default_value = "020000000002")]
    pub id_b: Identity,
    #[command(flatten)]
    pub profile: ProfileArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Hardened)]
    pub mode: ModeArg,
    /// Side whose commit goes out first.
    #[arg(long, value_enum, default_value_t = SideArg::A)]
    pub first: SideArg,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub profile: ProfileArg,
    /// Number of traces, each for a fresh client identity.
    #[arg(long, default_value_t = 10)]
    pub traces: usize,
    /// Samples per trace (EAP-pwd captures hold exactly one).
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Password behind every trace. Random per trace when absent.
    #[arg(long, value_parser = parse_password)]
    pub password: Option<Bytes>,
    /// `default`, `zero`, or a path to a JSON noise model.
    #[arg(long, default_value = "default")]
    pub noise: String,
    /// Trace file to write; traces go to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ground-truth answers file (JSON lines).
    #[arg(long)]
    pub answers: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    /// Trace files in text or JSON-lines form.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[command(flatten)]
    pub profile: ProfileArg,
    /// Write extracted leaks here (JSON lines).
    #[arg(long)]
    pub leaks_out: Option<PathBuf>,
    /// Ground-truth answers to score the parser against.
    #[arg(long)]
    pub answers: Option<PathBuf>,
    /// Top score must reach this multiple of the runner-up.
    #[arg(long)]
    pub decision_margin: Option<f64>,
    /// Delay separating the success-specific draw from the blinding draw.
    #[arg(long)]
    pub long_delay_threshold: Option<u64>,
}

#[derive(Args, Debug)]
pub struct PruneArgs {
    /// Dictionary file, one password per line.
    #[arg(long)]
    pub dictionary: PathBuf,
    /// Leaks as JSON lines or a JSON array.
    #[arg(long)]
    pub leaks: PathBuf,
    #[command(flatten)]
    pub profile: ProfileArg,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub shards: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    /// Dictionary sizes, comma separated; scientific notation accepted.
    #[arg(long, value_delimiter = ',', default_value = "1.4e7,3.5e7,5.5e8,4.6e14", value_parser = parse_size)]
    pub sizes: Vec<u64>,
    /// Required probability of eliminating every wrong password.
    #[arg(long, default_value_t = 0.95, value_parser = parse_probability)]
    pub target: f64,
    /// Per-iteration success probability.
    #[arg(long, default_value_t = 0.5, value_parser = parse_probability)]
    pub p_s: f64,
    #[arg(long, default_value_t = 20)]
    pub k_max: u32,
    #[arg(long, value_enum, default_value_t = LawArg::Power)]
    pub law: LawArg,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 60)]
    pub random_candidates: usize,
    #[arg(long, default_value_t = 2)]
    pub refine_rounds: usize,
    #[arg(long, default_value_t = 400)]
    pub traces_per_point: usize,
    /// Write the fitted model here as JSON.
    #[arg(long)]
    pub write: Option<PathBuf>,
    /// Only evaluate this model (`default`, `zero` or a path) without searching.
    #[arg(long)]
    pub evaluate: Option<String>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub profile: ProfileArg,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
}

#[derive(Args, Debug)]
pub struct CampaignArgs {
    /// Dictionary file. A synthetic one of `--dict-size` entries is used when absent.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub dict_size: usize,
    #[arg(long, value_parser = parse_password)]
    pub planted: Bytes,
    #[arg(long, default_value_t = 16)]
    pub identities: usize,
    #[arg(long, default_value_t = 10)]
    pub samples_per_identity: usize,
    /// `default`, `zero`, or a path to a JSON noise model.
    #[arg(long, default_value = "default")]
    pub noise: String,
    #[command(flatten)]
    pub profile: ProfileArg,
    /// Directory receiving the report, traces and leaks.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Unusable-trace fraction above which the report carries a warning.
    #[arg(long, default_value_t = 0.5, value_parser = parse_probability)]
    pub max_unusable: f64,
    #[arg(long)]
    pub shards: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[arg(long)]
    pub dictionary: PathBuf,
    #[arg(long, default_value = "020000000001")]
    pub id_a: Identity,
    #[arg(long, default_value = "020000000002")]
    pub id_b: Identity,
    #[arg(long, value_parser = parse_token)]
    pub token: Option<[u8; 4]>,
    #[command(flatten)]
    pub profile: ProfileArg,
    /// Report entries needing more than this many iterations.
    #[arg(long, default_value_t = 8)]
    pub threshold: u32,
    #[arg(long)]
    pub shards: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GenDictArgs {
    #[arg(long, default_value_t = 1000)]
    pub size: usize,
    /// Password inserted at a seeded position.
    #[arg(long, value_parser = parse_password)]
    pub plant: Option<Bytes>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
