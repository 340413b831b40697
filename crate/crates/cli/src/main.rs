use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridwave::Error;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "gridwave", version, about = "Invertible wavelet filter banks on a uniform time grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Design parameters shared by most subcommands.
#[derive(Args, Debug, Clone)]
pub struct DesignArgs {
    /// Mother wavelet, `cauchy:ALPHA` or `bspline:XIFM`
    #[arg(long, default_value = "cauchy:300")]
    pub wavelet: gridwave::Wavelet,
    /// Index of the highest channel (M + 1 channels in total)
    #[arg(long, short = 'm', default_value_t = 253)]
    pub channels: usize,
    /// Number of compensation channels below the wavelet range
    #[arg(long = "mc", default_value_t = 5)]
    pub m_c: usize,
    /// Target oversampling rate; picks the decimation factor
    #[arg(long, default_value_t = 2.0)]
    pub rate: f64,
    /// Decimation factor; overrides --rate
    #[arg(long, short = 'd')]
    pub decimation: Option<usize>,
    /// Time delay sequence: kronecker, digital or zero
    #[arg(long, default_value = "kronecker")]
    pub delays: gridwave::DelayTag,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the channel layout of a design
    Design {
        #[command(flatten)]
        design: DesignArgs,
        /// Frames N (signal length L = d * N)
        #[arg(long, default_value_t = 16)]
        frames: usize,
        /// Sampling rate used for the reported center frequencies
        #[arg(long, default_value_t = 44100.0)]
        sample_rate: f64,
    },
    /// Frame bounds and their ratio; exits with 2 when not invertible
    Bounds {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value_t = 16)]
        frames: usize,
    },
    /// Analyze a WAV file into a coefficient file
    Analyze {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Reconstruct a WAV file from a coefficient file with the dual bank
    Synthesize {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Analyze, invert and report the reconstruction error
    Roundtrip {
        #[command(flatten)]
        design: DesignArgs,
        /// Input WAV; white noise is used when absent
        #[arg(long, short)]
        input: Option<PathBuf>,
        /// Length of the generated noise in samples
        #[arg(long, default_value_t = 44100)]
        noise_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Search compensation channel count and channel count for target rates
    Search {
        #[arg(long, default_value = "cauchy:300")]
        wavelet: gridwave::Wavelet,
        #[arg(long, default_value = "kronecker")]
        delays: gridwave::DelayTag,
        /// Comma-separated target oversampling rates
        #[arg(long, value_delimiter = ',', default_value = "1.2,2,4,8")]
        rates: Vec<f64>,
        /// Comma-separated candidate channel counts
        #[arg(long, value_delimiter = ',')]
        candidates: Option<Vec<usize>>,
        /// Frames per evaluation
        #[arg(long, default_value_t = 16)]
        eval_frames: usize,
        /// Relative improvement below which M_C has plateaued
        #[arg(long, default_value_t = 1e-3)]
        plateau_tol: f64,
        /// Channel count used while choosing M_C
        #[arg(long, default_value_t = 512)]
        m_probe: usize,
        /// Skip candidates needing a larger decimation factor
        #[arg(long)]
        max_decimation: Option<usize>,
        /// Print a text table instead of JSON
        #[arg(long)]
        table: bool,
    },
    /// Spectral-flux onset detection
    Onsets {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.34)]
        lambda: f64,
        /// Odd length of the centered median window, in frames
        #[arg(long, default_value_t = 11)]
        median_window: usize,
        /// Minimum distance between onsets, in frames
        #[arg(long, default_value_t = 3)]
        min_gap: usize,
        /// Comma-separated reference onsets in seconds, for scoring
        #[arg(long, value_delimiter = ',')]
        reference: Option<Vec<f64>>,
    },
    /// Phaseless reconstruction with fast Griffin-Lim
    Fgla {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 150)]
        iters: usize,
        #[arg(long, default_value_t = 20)]
        warmup: usize,
        /// Random phase initializations besides the zero-phase start
        #[arg(long, default_value_t = 5)]
        inits: usize,
        /// Momentum
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Accumulated spectrogram of a block of atoms as a 16-bit PGM
    Coverage {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value_t = 16)]
        frames: usize,
        /// First channel of the block
        #[arg(long, default_value_t = 0)]
        first_channel: usize,
        /// One past the last channel (default: all)
        #[arg(long)]
        end_channel: Option<usize>,
        /// Gaussian window standard deviation in samples
        #[arg(long, default_value_t = 8.0)]
        gauss_dur: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotInvertible { .. } => 2,
        Error::Io { .. } | Error::Format { .. } => 3,
        _ => 1,
    }
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("GRIDWAVE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("GRIDWAVE_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = init_threads().and_then(|_| commands::run(cli.command));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
