//! Uniformly decimated wavelet filter banks on a linear frequency grid,
//! with quasi-random channel delays that keep the frame well conditioned at
//! low redundancy.

pub mod apps;
pub mod bank;
pub mod design;
pub mod error;
pub mod frame;
pub mod io;
pub mod lds;
pub mod search;
pub mod wavelets;
pub mod xform;

pub use error::{Error, Result};
pub use lds::{golden_alpha, DelayKind, DelaySequence, DelayTag, GeneratorMatrix};
pub use wavelets::Wavelet;
pub use bank::{ChannelResponse, FilterBank};
pub use design::{build_design, choose_decimation, geometric_design, FilterBankDesign, GridParams, Spacing};
pub use xform::{analyze, analyze_complex, synthesize, synthesize_real, CoefMatrix, Transform};
pub use frame::{brute_force_bounds, dual_design, dual_with_bounds, frame_blocks, frame_bounds, FrameBlocks, FrameDiagnostics};
pub use search::{evaluate, full_search, optimize_m, optimize_mc, refine_m, SearchConfig, SearchRecord};
pub use apps::{
    accumulated_spectrogram, cost_estimate, detect_onsets, direct_cost, err_ms, eval_onsets, fgla,
    magnitudes, pick_onsets, reference_design, spectral_flux, CoverageMap, FglaParams, FglaResult,
    FglaState, OnsetParams, OnsetResult, OnsetScores,
};
pub use io::{load_coefs, read_wav, save_coefs, write_pgm, write_wav, AudioBuffer, CoefHeader};
