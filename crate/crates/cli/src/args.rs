use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "saltlib", version, about = "Saltation matrices and sensitivity propagation for hybrid systems")]
pub struct Cli {
    /// Worker threads for oracle computations. Defaults to all cores.
    #[arg(long, global = true, env = "SALTLIB_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a hybrid execution and write samples and events.
    Simulate(SimulateArgs),
    /// Saltation matrix of one event of an execution.
    Saltation(SaltationArgs),
    /// Monodromy matrix and Floquet multipliers of a closed orbit.
    Monodromy(MonodromyArgs),
    /// First-order covariance along an execution.
    Covariance(CovarianceArgs),
    /// Time-varying LQR about an execution.
    Lqr(LqrArgs),
    /// Run every oracle over every built-in model.
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuiltinModel {
    BouncingBall,
    BallDrop,
    ConstantFlow,
    TwoLinkArm,
    CoulombBall,
    AffineBounce,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Friction {
    Slide,
    Stick,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Built-in model.
    #[arg(long, value_enum, required_unless_present = "affine", conflicts_with = "affine")]
    pub model: Option<BuiltinModel>,
    /// Affine model in saltlib-affine-v1 JSON.
    #[arg(long, value_name = "PATH")]
    pub affine: Option<PathBuf>,

    /// Restitution coefficient (bouncing-ball, ball-drop, two-link-arm).
    #[arg(long)]
    pub e: Option<f64>,
    /// Slope angle in radians (ball-drop, coulomb-ball).
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = 9.81)]
    pub gravity: f64,
    /// Plastic ball-drop impact into sliding or sticking.
    #[arg(long, value_enum, default_value_t = Friction::Slide)]
    pub friction: Friction,
    /// Add a vertical thrust pulse that lifts a resting ball-drop off.
    #[arg(long)]
    pub pulse: bool,
    /// Static friction coefficient (coulomb-ball).
    #[arg(long)]
    pub mu_s: Option<f64>,
    /// Kinetic friction coefficient (coulomb-ball).
    #[arg(long)]
    pub mu_k: Option<f64>,

    /// Initial mode, by name or index. Defaults to the first mode.
    #[arg(long)]
    pub mode: Option<String>,
    /// Initial state, comma separated. Defaults to the model's reference state.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    /// RK4 step.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// Maximum number of events before reporting Zeno behavior.
    #[arg(long, default_value_t = 1000)]
    pub max_events: usize,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output file. Written atomically; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Final time.
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Event table CSV (csv format only).
    #[arg(long, value_name = "PATH")]
    pub events: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SaltationArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub t: f64,
    /// Event to analyze, by position in the execution or transition name.
    #[arg(long, default_value = "0")]
    pub event: String,
    /// Add the rigid-body closed form and its difference from the generic result.
    #[arg(long)]
    pub closed_form: bool,
    /// Add the numeric oracle comparison; exit 6 if it fails.
    #[arg(long)]
    pub oracle: bool,
    /// Central-difference step of the oracle.
    #[arg(long, default_value_t = 1e-6)]
    pub h: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct MonodromyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// `auto-from-x0` or a fixed period.
    #[arg(long, default_value = "auto-from-x0")]
    pub period: String,
    /// Horizon searched for a return with `auto-from-x0`.
    #[arg(long, default_value_t = 100.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_periodic: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Saltation,
    ResetJacobian,
}

#[derive(Args, Debug)]
pub struct CovarianceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub t: f64,
    /// Isotropic initial covariance `sigma0 I`.
    #[arg(long, default_value_t = 1e-4)]
    pub sigma0: f64,
    #[arg(long, value_enum, default_value_t = Rule::Saltation)]
    pub rule: Rule,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct LqrArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub t: f64,
    /// Grid width.
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Input matrix, rows separated by `;`. Defaults to `[0; I]` for even
    /// state dimensions and `I` otherwise.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// State weight `q I`.
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Input weight `v I`.
    #[arg(long, default_value_t = 0.1)]
    pub v: f64,
    /// Terminal weight `p I`.
    #[arg(long, default_value_t = 1.0)]
    pub p_terminal: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Monte Carlo samples per covariance check.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}
