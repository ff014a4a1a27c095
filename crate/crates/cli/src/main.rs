use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dictaug::pipeline::{
    run_align_train, run_coverage, run_dedup, run_generate, run_index_build, run_mix,
    PipelineConfig,
};
use dictaug::Error;

/// Generate pseudo in-domain parallel corpora from a domain dictionary and
/// measure the domain coverage they add.
#[derive(Parser)]
#[command(name = "dictaug", version)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML or key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override a configuration value, e.g. `--set generate.top_n=10`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,

    /// Where to write the run manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,

    #[arg(long)]
    output_dir: Option<PathBuf>,

    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the pseudo in-domain corpus.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        top_n: Option<usize>,
        /// Keep at most this many pairs, in dictionary order.
        #[arg(long)]
        max_pairs: Option<u64>,
    },
    /// Report enhanced domain coverage of corpora against a test set.
    Coverage {
        #[command(flatten)]
        common: Common,
        /// Generated corpus (defaults to the `generate` output).
        #[arg(long)]
        generated: Option<PathBuf>,
        /// Additional corpora to compare.
        #[arg(long)]
        compare: Vec<PathBuf>,
        /// json or csv.
        #[arg(long)]
        format: Option<String>,
    },
    /// Concatenate the OOD bitext with a generated corpus.
    Mix {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pseudo_source: Option<PathBuf>,
        #[arg(long)]
        pseudo_target: Option<PathBuf>,
        #[arg(long)]
        shuffle_seed: Option<u64>,
    },
    /// Train the word alignment model.
    AlignTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write Viterbi links of the training bitext as `i-j` pairs.
        #[arg(long)]
        pharaoh: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Build the IVF index over sentence embeddings.
    IndexBuild {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Number of clusters (0 = square root of the sentence count).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Drop exact duplicate line pairs from the bitext.
    Dedup {
        #[command(flatten)]
        common: Common,
    },
}

fn quoted(p: &std::path::Path) -> String {
    format!("{:?}", p.to_string_lossy())
}

impl Common {
    fn load(&self, mut extra: Vec<String>) -> Result<PipelineConfig, Error> {
        let mut overrides = self.overrides.clone();
        if let Some(d) = &self.output_dir {
            overrides.push(format!("paths.output_dir={}", quoted(d)));
        }
        if let Some(w) = self.workers {
            overrides.push(format!("generate.workers={w}"));
        }
        overrides.append(&mut extra);
        PipelineConfig::load(self.config.as_deref(), &overrides)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate {
            common,
            top_n,
            max_pairs,
        } => {
            let mut extra = Vec::new();
            if let Some(n) = top_n {
                extra.push(format!("generate.top_n={n}"));
            }
            if let Some(n) = max_pairs {
                extra.push(format!("generate.max_pairs={n}"));
            }
            let config = common.load(extra)?;
            let out = run_generate(&config, common.manifest.as_deref())?;
            let s = out.summary.stats;
            println!(
                "generated {} pairs ({} attempted) -> {} / {}",
                s.generated,
                s.attempted,
                out.corpus.source.display(),
                out.corpus.target.display()
            );
            println!("manifest: {}", out.manifest_path.display());
        }
        Command::Coverage {
            common,
            generated,
            compare,
            format,
        } => {
            let extra = format
                .map(|f| vec![format!("coverage.format={f:?}")])
                .unwrap_or_default();
            let config = common.load(extra)?;
            let out = run_coverage(
                &config,
                generated.as_deref(),
                &compare,
                common.manifest.as_deref(),
            )?;
            for r in &out.reports {
                println!("{}\tED={}", r.corpus, r.ed_value);
            }
            for (r, g) in out.reports[1..].iter().zip(&out.gains) {
                println!("{}\tgain={}", r.corpus, g.gain);
            }
        }
        Command::Mix {
            common,
            pseudo_source,
            pseudo_target,
            shuffle_seed,
        } => {
            let mut extra = Vec::new();
            if let Some(p) = pseudo_source {
                extra.push(format!("mix.pseudo_source={}", quoted(&p)));
            }
            if let Some(p) = pseudo_target {
                extra.push(format!("mix.pseudo_target={}", quoted(&p)));
            }
            if let Some(s) = shuffle_seed {
                extra.push(format!("generate.shuffle_seed={s}"));
            }
            let config = common.load(extra)?;
            let m = run_mix(&config, common.manifest.as_deref())?;
            println!(
                "mixed {} pairs",
                m.counts.get("mixed_pairs").copied().unwrap_or(0)
            );
        }
        Command::AlignTrain {
            common,
            output,
            pharaoh,
            iterations,
        } => {
            let extra = iterations
                .map(|n| vec![format!("align.iterations={n}")])
                .unwrap_or_default();
            let config = common.load(extra)?;
            let m = run_align_train(
                &config,
                output.as_deref(),
                pharaoh.as_deref(),
                common.manifest.as_deref(),
            )?;
            if let Some(p) = m.outputs.get("model") {
                println!("model: {}", p.display());
            }
        }
        Command::IndexBuild { common, output, k } => {
            let extra = k.map(|k| vec![format!("ann.k={k}")]).unwrap_or_default();
            let config = common.load(extra)?;
            let m = run_index_build(&config, output.as_deref(), common.manifest.as_deref())?;
            if let Some(p) = m.outputs.get("index") {
                println!("index: {}", p.display());
            }
        }
        Command::Dedup { common } => {
            let config = common.load(Vec::new())?;
            let m = run_dedup(&config, common.manifest.as_deref())?;
            println!(
                "kept {} pairs, removed {}",
                m.counts.get("kept").copied().unwrap_or(0),
                m.counts.get("removed").copied().unwrap_or(0)
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
