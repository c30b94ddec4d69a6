//! Command-line front end. Exit status 0 on success, 1 on usage errors,
//! 2 on data or validation errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::bgtrack::{extract_track, render_track_svg, track_to_features, BackgroundTrack, DEFAULT_BACKGROUNDS, DEFAULT_WINDOW};
use crate::corpus::{
    create_parent, default_genres, read_feature_file, read_label_file, synthesize_corpus, write_feature_file,
    write_label_file, CorpusManifest, Split, SynthConfig,
};
use crate::error::{Error, Result};
use crate::gmm::GmmTrainOptions;
use crate::hmm::HmmTrainOptions;
use crate::pipeline::{
    align_corpus, classify_corpus, combine_all, evaluate, extract_corpus, load_scorer, load_split, read_results,
    train_gmm_set, train_hmm_set, train_svm_system, write_results, SvmSystemOptions, System, GMM_FILE, HMM_FILE,
};
use crate::svm::{SvmTrainOptions, DEFAULT_C, DEFAULT_TAU};
use crate::transforms::{decode_backgrounds, BackgroundBank, DEFAULT_STAY_PROB};

#[derive(Debug, Parser)]
#[command(name = "genreid", version, about = "Background-tracking features and broadcast genre identification")]
struct Cli {
    /// Comma-separated genre list that manifests are validated against.
    #[arg(long, global = true, value_delimiter = ',')]
    genres: Option<Vec<String>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus, its manifest and a matching background bank.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decode background labels for one feature file or a whole manifest.
    Align {
        #[arg(long)]
        bank: PathBuf,
        #[command(flatten)]
        input: AlignInput,
        /// Label file for `--feat`, output directory for `--manifest`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn label files into background-tracking features.
    Extract {
        #[command(flatten)]
        input: ExtractInput,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        /// Append first and second derivatives.
        #[arg(long)]
        deltas: bool,
        /// Frame period of the labelled sequence.
        #[arg(long, default_value_t = 10.0)]
        frame_period_ms: f64,
        /// Feature file for `--lab`, output directory for `--manifest`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one GMM per genre.
    TrainGmm {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 16)]
        components: usize,
        #[arg(long, default_value_t = 20)]
        iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one ergodic HMM per genre.
    TrainHmm {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 8)]
        states: usize,
        /// Gaussians per state.
        #[arg(long, default_value_t = 32)]
        components: usize,
        /// Baum-Welch sweeps.
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a UBM and one-vs-rest supervector SVMs.
    TrainSvm {
        #[arg(long)]
        manifest: PathBuf,
        /// UBM components.
        #[arg(long, default_value_t = 16)]
        components: usize,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value_t = DEFAULT_C)]
        c: f64,
        /// Kernel width; defaults to one over the supervector length.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify the shows of a manifest with a trained model set.
    Classify {
        #[arg(long, value_enum)]
        system: ClassifierKind,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine two results files, preferring the more confident system.
    Combine {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy, per-genre F-measure and confusion over the test split.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Draw a stretch of a track as stacked bars.
    Render {
        #[arg(long)]
        track: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = DEFAULT_BACKGROUNDS)]
        backgrounds: usize,
        #[arg(long, default_value_t = 0)]
        start: usize,
        /// Number of windows; defaults to the rest of the track.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("align_input").required(true).args(["feat", "manifest"])))]
struct AlignInput {
    #[arg(long)]
    feat: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("extract_input").required(true).args(["lab", "manifest"])))]
struct ExtractInput {
    #[arg(long)]
    lab: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClassifierKind {
    Gmm,
    Hmm,
    Svm,
}

impl From<ClassifierKind> for System {
    fn from(k: ClassifierKind) -> Self {
        match k {
            ClassifierKind::Gmm => System::Gmm,
            ClassifierKind::Hmm => System::Hmm,
            ClassifierKind::Svm => System::Svm,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

impl From<SplitArg> for Option<Split> {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let genres = cli.genres.unwrap_or_else(default_genres);
    let manifest = |path: &Path| CorpusManifest::load_with_genres(path, genres.clone());
    match cli.command {
        Command::Synth { config, out, seed } => {
            let mut config = SynthConfig::load(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let corpus = synthesize_corpus(&config, &out)?;
            let means: Vec<Vec<f64>> = config.backgrounds.iter().map(|b| b.mean.clone()).collect();
            let vars: Vec<Vec<f64>> = config.backgrounds.iter().map(|b| b.var.clone()).collect();
            BackgroundBank::from_gaussians(&means, &vars, DEFAULT_STAY_PROB)?.save(out.join("bank.json"))?;
            println!("wrote {} shows to {}", corpus.shows().len(), out.display());
        }
        Command::Align { bank, input, out } => {
            let bank = BackgroundBank::load(&bank)?;
            if let Some(feat) = input.feat {
                let labels = decode_backgrounds(&bank, &read_feature_file(&feat)?)?;
                write_label_file(&out, &labels)?;
                println!("aligned {} frames", labels.len());
            } else if let Some(path) = input.manifest {
                let aligned = align_corpus(&bank, &manifest(&path)?, &out)?;
                println!("aligned {} shows into {}", aligned.shows().len(), out.display());
            }
        }
        Command::Extract { input, window, deltas, frame_period_ms, out } => {
            if let Some(lab) = input.lab {
                let track = extract_track(&read_label_file(&lab)?, window)?;
                let feats = track_to_features(&track, frame_period_ms, deltas)?;
                write_feature_file(&out, &feats)?;
                println!("extracted {} windows of {} dims", feats.len(), feats.dims());
            } else if let Some(path) = input.manifest {
                let tracks = extract_corpus(&manifest(&path)?, window, deltas, frame_period_ms, &out)?;
                println!("extracted tracks for {} shows into {}", tracks.shows().len(), out.display());
            }
        }
        Command::TrainGmm { manifest: path, components, iters, out } => {
            let m = manifest(&path)?;
            let train = load_split(&m, Some(Split::Train))?;
            let options = GmmTrainOptions { components, iters, ..Default::default() };
            train_gmm_set(m.genres(), &train, &options)?.save(out.join(GMM_FILE))?;
            println!("trained {} genre GMMs", m.genres().len());
        }
        Command::TrainHmm { manifest: path, states, components, iters, out } => {
            let m = manifest(&path)?;
            let train = load_split(&m, Some(Split::Train))?;
            let options = HmmTrainOptions { states, components, iters, ..Default::default() };
            train_hmm_set(m.genres(), &train, &options)?.save(out.join(HMM_FILE))?;
            println!("trained {} genre HMMs", m.genres().len());
        }
        Command::TrainSvm { manifest: path, components, tau, c, gamma, out } => {
            let m = manifest(&path)?;
            let train = load_split(&m, Some(Split::Train))?;
            let options = SvmSystemOptions {
                ubm: GmmTrainOptions::with_components(components),
                svm: SvmTrainOptions { tau, c, gamma, ..Default::default() },
            };
            train_svm_system(m.genres(), &train, &options)?.save(&out)?;
            println!("trained {} genre SVMs", m.genres().len());
        }
        Command::Classify { system, models, manifest: path, split, out } => {
            let m = manifest(&path)?;
            let scorer = load_scorer(system.into(), &models)?;
            let shows = load_split(&m, split.into())?;
            let results = classify_corpus(scorer.as_ref(), &shows, m.genres())?;
            write_results(&out, &results)?;
            println!("classified {} shows", results.len());
        }
        Command::Combine { a, b, out } => {
            let combined = combine_all(&read_results(&a)?, &read_results(&b)?)?;
            write_results(&out, &combined)?;
            println!("combined {} shows", combined.len());
        }
        Command::Eval { results, manifest: path } => {
            let report = evaluate(&read_results(&results)?, &manifest(&path)?)?;
            print!("{report}");
        }
        Command::Render { track, window, backgrounds, start, count, out } => {
            let frames = read_feature_file(&track)?;
            let track = BackgroundTrack::from_features(&frames, backgrounds, window)?;
            let count = match count {
                Some(c) => c,
                None => track
                    .len()
                    .checked_sub(start)
                    .ok_or_else(|| Error::OutOfRange(format!("start {start} beyond {} windows", track.len())))?,
            };
            let svg = render_track_svg(&track, start, count)?;
            create_parent(&out)?;
            fs::write(&out, svg).map_err(|e| Error::io(&out, e))?;
            println!("rendered {count} windows");
        }
    }
    Ok(())
}
