use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_distr::Distribution;

use dphmm::dp::{crp_draw, expected_clusters};
use dphmm::hmm::ModelKind;
use dphmm::io::{
    comment_header, file_sha256, parse_capture_csv, read_samples_csv, write_capture_csv,
    write_file, write_latent_csv, write_samples_csv, write_truth_csv, InputDigest, RunManifest,
};
use dphmm::mcmc::{combine_chains, run_chains, Execution, McmcConfig};
use dphmm::sampling::stream_rng;
use dphmm::summary::{summarize, write_summary};
use dphmm::synth::{simulate, ParamSpec, SimDesign};
use dphmm::Error;

const OUT_DIR_ENV: &str = "DPHMM_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "dphmm", version, about = "Dirichlet-process hidden Markov models for capture histories")]
struct Cli {
    /// Increase log detail on stderr (-v debug, -vv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic capture histories and their ground truth.
    Simulate(SimulateArgs),
    /// Fit the model to a capture-history file.
    Fit(FitArgs),
    /// Draw cluster counts from the Chinese restaurant process.
    Crp(CrpArgs),
    /// Summarise a samples file into density and interval tables.
    Summarize(SummarizeArgs),
}

#[derive(Args, Debug)]
struct OutDir {
    /// Output directory [default: $DPHMM_OUT_DIR, else the current directory].
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl OutDir {
    fn resolve(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    TwoGroup,
    ThreeGroup,
    Unimodal,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Design JSON file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    design: Option<PathBuf>,
    /// Built-in design instead of a file.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of datasets; replicate r uses seed + r and its own subdirectory.
    #[arg(long, default_value_t = 1)]
    replicates: u64,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Capture-history CSV.
    #[arg(long)]
    data: PathBuf,
    /// Sampler configuration JSON; flags below override it.
    #[arg(long, conflicts_with = "replay")]
    config: Option<PathBuf>,
    /// Repeat the run recorded in this manifest.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Auxiliary components per assignment update.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    model: Option<ModelKind>,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args, Debug)]
struct CrpArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    /// Samples CSV written by `fit`.
    #[arg(long)]
    samples: PathBuf,
    #[command(flatten)]
    out: OutDir,
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .try_init();
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Crp(a) => cmd_crp(a),
        Command::Summarize(a) => cmd_summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> dphmm::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn cmd_simulate(a: SimulateArgs) -> dphmm::Result<()> {
    let mut design = match (&a.design, a.preset) {
        (Some(p), _) => read_json::<SimDesign>(p)?,
        (None, Some(Preset::TwoGroup)) => SimDesign::two_group(0),
        (None, Some(Preset::ThreeGroup)) => SimDesign::three_group(0),
        (None, Some(Preset::Unimodal)) => SimDesign::unimodal(0),
        (None, None) => unreachable!("clap requires one"),
    };
    if let Some(s) = a.seed {
        design.seed = s;
    }
    let out = a.out.resolve();
    let mut meta = vec![("seed".to_string(), String::new())];
    if dphmm::mcmc::Param::ALL
        .iter()
        .any(|&p| matches!(design.spec(p), ParamSpec::LogitNormal { .. }))
    {
        meta.push((
            "logit_normal_spread".to_string(),
            "interpreted as a variance".to_string(),
        ));
    }
    for r in 0..a.replicates {
        let d = design.replicate(r);
        let dir = if a.replicates > 1 { out.join(format!("rep_{r:02}")) } else { out.clone() };
        let sim = simulate(&d)?;
        meta[0].1 = d.seed.to_string();
        write_capture_csv(&dir.join("captures.csv"), &sim.data, None)?;
        write_truth_csv(&dir.join("truth.csv"), &sim.truth, None, &meta)?;
        write_latent_csv(&dir.join("latent_states.csv"), &sim.truth, &sim.data, None)?;
        let mut json = serde_json::to_vec_pretty(&d)?;
        json.push(b'\n');
        write_file(&dir.join("design.json"), &json)?;
        tracing::info!(dir = %dir.display(), individuals = d.n_individuals, seed = d.seed, "simulated");
    }
    Ok(())
}

fn cmd_fit(a: FitArgs) -> dphmm::Result<()> {
    let replay = a.replay.as_deref().map(RunManifest::read).transpose()?;
    let data = parse_capture_csv(&a.data, a.model)?;
    let mut config = match (&replay, &a.config) {
        (Some(m), _) => {
            m.verify_input(0, &a.data)?;
            m.config.clone()
        }
        (None, Some(p)) => read_json::<McmcConfig>(p)?,
        (None, None) => McmcConfig::default(),
    };
    if replay.is_none() {
        config.model = data.model();
        let set = |dst: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut config.chains, a.chains);
        set(&mut config.iterations, a.iterations);
        set(&mut config.burn_in, a.burn_in);
        set(&mut config.thin, a.thin);
        set(&mut config.m, a.m);
        if let Some(s) = a.seed {
            config.seed = s;
        }
    }
    if a.sequential {
        config.execution = Execution::Sequential;
    }
    config.validate()?;

    let input = InputDigest {
        path: a.data.clone(),
        sha256: file_sha256(&a.data)?,
    };
    tracing::info!(
        individuals = data.len(),
        model = %config.model,
        chains = config.chains,
        iterations = config.iterations,
        "fitting"
    );
    let start = Instant::now();
    let chains = run_chains(&data, &config)?;
    let retained = chains.iter().map(|c| c.samples.len()).collect();
    for c in &chains {
        for (k, r) in &c.provenance.acceptance {
            tracing::info!(chain = c.provenance.chain, kernel = %k, acceptance = r, "acceptance");
        }
    }
    let combined = combine_chains(chains)?;
    let manifest = RunManifest::new(config, vec![input], retained, start.elapsed().as_secs_f64());
    if let Some(m) = &replay {
        if m.digest != manifest.digest {
            return Err(Error::Domain("replayed run does not match the manifest".into()));
        }
    }
    let out = a.out.resolve();
    write_samples_csv(&out.join("samples.csv"), &data.ids(), &combined.samples, Some(&manifest.digest))?;
    manifest.write(&out.join("manifest.json"))?;
    tracing::info!(
        samples = combined.samples.len(),
        seconds = manifest.wall_clock_seconds,
        out = %out.display(),
        "done"
    );
    Ok(())
}

fn cmd_crp(a: CrpArgs) -> dphmm::Result<()> {
    if a.replicates == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    let mut rng = stream_rng(a.seed, 0);
    let base = rand_distr::Beta::new(1.0, 1.0).expect("valid shape");
    let mut ks = Vec::with_capacity(a.replicates);
    for _ in 0..a.replicates {
        ks.push(crp_draw(a.n, a.alpha, |r| base.sample(r), &mut rng)?.n_clusters());
    }
    let mean = ks.iter().sum::<usize>() as f64 / ks.len() as f64;
    let expected = expected_clusters(a.n, a.alpha);
    let meta = [
        ("n".to_string(), a.n.to_string()),
        ("alpha".to_string(), a.alpha.to_string()),
        ("seed".to_string(), a.seed.to_string()),
        ("mean_k".to_string(), mean.to_string()),
        ("expected_k".to_string(), expected.to_string()),
    ];
    let mut s = comment_header(None, &meta);
    s.push_str("replicate,k\n");
    for (r, k) in ks.iter().enumerate() {
        s.push_str(&format!("{r},{k}\n"));
    }
    let path = a.out.resolve().join("crp.csv");
    write_file(&path, s.as_bytes())?;
    tracing::info!(mean_k = mean, expected_k = expected, out = %path.display(), "crp");
    Ok(())
}

fn cmd_summarize(a: SummarizeArgs) -> dphmm::Result<()> {
    let file = read_samples_csv(&a.samples)?;
    let summary = summarize(&file.samples, &file.ids)?;
    let out = a.out.resolve();
    write_summary(&out, &summary, file.digest.as_deref())?;
    tracing::info!(samples = file.samples.len(), out = %out.display(), "summarised");
    Ok(())
}
