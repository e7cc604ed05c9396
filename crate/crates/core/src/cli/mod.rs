//! Batch entry point: `simulate`, `kernel-check` and `invert-demo`, each
//! reading one TOML config and writing CSV tables plus `manifest.json` into
//! the output directory.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{invert_demo, kernel_check, load, output_steps, reference_signal, simulate, LoadedConfig, TestSignal};
pub use config::{
    DampingConfig, DiagnosticsConfig, ForcingConfig, GridConfig, InitialConfig, InversionConfig, KernelCheckConfig,
    KernelConfig, OutputConfig, RunConfig, TimeConfig,
};
pub use output::to_json;

use crate::error::Error;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "KBKZ_THREADS";

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    /// config, usage or input error
    Usage = 1,
    HyperbolicityBreach = 2,
    Divergence = 3,
    /// a kernel-check or invert-demo check failed
    CheckFailed = 4,
}

const AFTER_HELP: &str = "\
Exit codes: 0 success, 1 config/usage error, 2 hyperbolicity breach,
3 divergence, 4 failed check (kernel-check, invert-demo).

simulate writes:
  energy.csv     step,t,energy,energy_first,nu,sup_strain, then the flags
                 smallness_ok,hyperbolicity_ok,e0_bound_ok,nu_bound_ok,
                 strain_bound_ok,implication_ok
  lemma.csv      step,t,nu,ratio_g0,ratio_g1,ratio_g,ratio_g_t,holds
  probes.csv     step,t, then v@x,u@x,ux@x per probe
  snapshot_K.csv x,v,u,u_x,v_xx at step K
  stress_K.csv   x,sigma at cell centres, step K
kernel-check writes:
  kernel.csv     t,a,a_prime,a_second
  spectrum.csv   omega,re_fa,im_fa,re_fa_prime,im_fa_prime
  psi.csv        t,psi
  inversion.csv  t,b1,b2
invert-demo writes:
  roundtrip.csv  signal,dt,relative_l2,forward_residual,order
Every command writes manifest.json. Floats carry 17 significant digits.";

#[derive(Debug, Parser)]
#[command(name = "kbkz", version, about = "K-BKZ / Doi-Edwards shear-flow laboratory", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// output directory (created if missing)
    #[arg(long)]
    pub out: PathBuf,
    /// worker threads; 0 lets the runtime decide
    #[arg(long, env = THREADS_ENV, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the time stepper and its energy diagnostics.
    Simulate(CommonArgs),
    /// Check the kernel hypotheses and tabulate a, psi, F a, B1 and B2.
    KernelCheck(CommonArgs),
    /// Round-trip convolution inversions at successively halved steps.
    InvertDemo(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a) | Command::KernelCheck(a) | Command::InvertDemo(a) => a,
        }
    }
}

fn run_command(cmd: &Command) -> crate::Result<ExitCode> {
    let args = cmd.args();
    let loaded = load(&args.config)?;
    let threads = rayon::current_num_threads();
    match cmd {
        Command::Simulate(a) => simulate(&loaded, &a.out, threads),
        Command::KernelCheck(a) => kernel_check(&loaded, &a.out, threads),
        Command::InvertDemo(a) => invert_demo(&loaded, &a.out, threads),
    }
}

/// Map a library error to an exit code.
pub fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::HyperbolicityBreach { .. } => ExitCode::HyperbolicityBreach,
        Error::Divergence { .. } => ExitCode::Divergence,
        _ => ExitCode::Usage,
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::Usage as i32 } else { 0 };
        }
    };
    let threads = cli.command.args().threads;
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("kbkz: cannot configure {threads} threads: {e}");
        }
    }
    match run_command(&cli.command) {
        Ok(code) => code as i32,
        Err(e) => {
            eprintln!("kbkz: {e}");
            exit_code_for(&e) as i32
        }
    }
}
