use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use entlab::config::{validate, Experiment, RunConfig, Severity};
use entlab::runner::{run, Overrides, MANIFEST_FILE};

#[derive(Parser)]
#[command(name = "entlab", version, about = "Entanglement entropy sweeps over multiparametric Gaussian ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropy curves over a Lambda grid with per-family D_n fits.
    Sweep(RunArgs),
    /// D_n = a 2^(b L_A) across subsystem sizes.
    #[command(name = "fit-d")]
    FitD(RunArgs),
    /// Finite-size scaling in the decay exponent alpha.
    Fss(RunArgs),
    /// Entropy against the cut position at fixed Lambda.
    Cutscan(RunArgs),
    /// Prediction curves from the analytic formulas.
    Theory(RunArgs),
    /// Closed-form against generic complexity parameter on random specs.
    #[command(name = "oracle-check")]
    OracleCheck(RunArgs),
    /// Check a config file and print diagnostics.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the config, then ENTLAB_WORKERS, then 1.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn load(path: &PathBuf) -> anyhow::Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("reading {}", path.display()))
}

fn execute(experiment: Experiment, args: RunArgs) -> anyhow::Result<u8> {
    let config = load(&args.config)?;
    if let Some(named) = config.experiment {
        if named != experiment {
            bail!("{} configures `{named}`, not `{experiment}`", args.config.display());
        }
    }
    let overrides = Overrides {
        experiment: Some(experiment),
        seed: args.seed,
        workers: args.workers,
        output: args.output,
    };
    let manifest = run(config, &overrides)?;
    let dir = &manifest.config.output_dir;
    println!("{}: {:?}, {} warning(s)", experiment, manifest.status, manifest.warnings.len());
    for a in &manifest.artifacts {
        println!("  {}  {}", a.sha256, dir.join(&a.file).display());
    }
    println!("  manifest  {}", dir.join(MANIFEST_FILE).display());
    if let Some(e) = &manifest.error {
        eprintln!("error: {e}");
    }
    Ok(manifest.status.exit_code() as u8)
}

/// Runs one command and returns the process exit code.
fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Sweep(a) => execute(Experiment::Sweep, a),
        Command::FitD(a) => execute(Experiment::FitD, a),
        Command::Fss(a) => execute(Experiment::Fss, a),
        Command::Cutscan(a) => execute(Experiment::Cutscan, a),
        Command::Theory(a) => execute(Experiment::Theory, a),
        Command::OracleCheck(a) => execute(Experiment::OracleCheck, a),
        Command::Validate { config } => {
            let diags = validate(&load(&config)?);
            for d in &diags {
                println!("{d}");
            }
            if diags.is_empty() {
                println!("ok");
            }
            Ok(if diags.iter().any(|d| d.severity == Severity::Error) { 1 } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use std::fs;
    use std::path::Path;

    use entlab::runner::{resolve_workers_with, RunManifest, RunStatus, LOCK_FILE, THEORY_HEADER};

    use super::*;

    /// Exit code of `entlab <args>`, or the error text of a failed command.
    fn entlab(args: &[&str]) -> Result<u8, String> {
        let cli = Cli::try_parse_from(std::iter::once("entlab").chain(args.iter().copied()))
            .map_err(|e| e.to_string())?;
        dispatch(cli).map_err(|e| format!("{e:#}"))
    }

    fn write(dir: &Path, name: &str, text: &str) -> String {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    }

    /// Completed, with or without warnings.
    fn finished(code: Result<u8, String>) {
        assert!(matches!(code, Ok(0) | Ok(2)), "{code:?}");
    }

    const SWEEP: &str = r#"
experiment = "sweep"
samples = 20
calibration_samples = 20
seed = 4
lambda_grid = { start = 0.05, stop = 500.0, points = 7 }

[[ensemble]]
family = "BE"
l_a = 3
l_b = 3
gamma = 0.5

[[ensemble]]
family = "PE"
l_a = 3
l_b = 3
gamma = 0.5
"#;

    const THEORY: &str = r#"
experiment = "theory"
lambda_grid = { start = 2.0, stop = 1000.0, points = 5 }
samples = 20

[[ensemble]]
family = "BE"
l_a = 4
l_b = 4
gamma = 0.5

[theory]
d1 = { a = 2.0, b = 1.0 }
d2 = { a = 1.5, b = 1.0 }
"#;

    const CUTSCAN: &str = r#"
experiment = "cutscan"
samples = 4
total = 8
target_lambdas = [10.0, 1000.0]

[[ensemble]]
family = "EE"
gamma = 0.5
"#;

    const FSS: &str = r#"
experiment = "fss"
samples = 6
bootstrap = 5
sizes = [8, 12]
c = 0.1
alpha_grid = { start = 0.3, stop = 1.9, points = 9, spacing = "linear" }

[[ensemble]]
family = "BE"
gamma = 0.5
"#;

    fn path(p: &Path) -> &str {
        p.to_str().unwrap()
    }

    #[test]
    fn oracle_check_passes_and_digests_verify() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "oracle.toml", "experiment = \"oracle-check\"\noracle_specs = 200\nseed = 3\n");
        let out = dir.path().join("out");
        assert_eq!(entlab(&["oracle-check", "--config", &cfg, "--output", path(&out)]), Ok(0));
        let m = RunManifest::load(&out.join("manifest.json")).unwrap();
        assert_eq!(m.status, RunStatus::Ok);
        assert!(m.verify(&out).unwrap().is_empty());
        let derived = fs::read_to_string(out.join("derived.csv")).unwrap();
        let dev: f64 = derived
            .lines()
            .find(|l| l.starts_with("oracle_max_deviation"))
            .and_then(|l| l.split(',').nth(5))
            .unwrap()
            .parse()
            .unwrap();
        assert!(dev <= 1e-10, "{dev}");
        assert!(!out.join(LOCK_FILE).exists());
    }

    #[test]
    fn sweep_is_reproducible_across_workers() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "sweep.toml", SWEEP);
        let mut csvs = Vec::new();
        for (i, w) in ["1", "3", "1"].iter().enumerate() {
            let out = dir.path().join(format!("run{i}"));
            finished(entlab(&["sweep", "--config", &cfg, "--workers", w, "--output", path(&out)]));
            let m = RunManifest::load(&out.join("manifest.json")).unwrap();
            assert!(m.verify(&out).unwrap().is_empty());
            assert_eq!(m.workers, w.parse::<usize>().unwrap());
            csvs.push((fs::read(out.join("points.csv")).unwrap(), fs::read(out.join("derived.csv")).unwrap()));
        }
        assert!(csvs[0].0.len() > 200);
        assert_eq!(csvs[0], csvs[1]);
        assert_eq!(csvs[0], csvs[2]);
    }

    #[test]
    fn seed_flag_changes_the_draws() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "sweep.toml", SWEEP);
        let mut csvs = Vec::new();
        for seed in ["4", "5"] {
            let out = dir.path().join(seed);
            finished(entlab(&["sweep", "--config", &cfg, "--seed", seed, "--output", path(&out)]));
            let m = RunManifest::load(&out.join("manifest.json")).unwrap();
            assert_eq!(m.seed.to_string(), seed);
            csvs.push(fs::read(out.join("points.csv")).unwrap());
        }
        assert_ne!(csvs[0], csvs[1]);
    }

    #[test]
    fn samples_can_be_dumped() {
        let dir = tempfile::tempdir().unwrap();
        let text = SWEEP.replace("seed = 4", "seed = 4\ndump_samples = true").replace("points = 7", "points = 3");
        let cfg = write(dir.path(), "sweep.toml", &text);
        let out = dir.path().join("out");
        finished(entlab(&["sweep", "--config", &cfg, "--output", path(&out)]));
        let bytes = fs::metadata(out.join("samples.bin")).unwrap().len();
        // Two families, three points, 20 samples of 8x8 complex doubles.
        assert_eq!(bytes, 2 * 3 * 20 * 64 * 16);
        let m = RunManifest::load(&out.join("manifest.json")).unwrap();
        assert!(m.verify(&out).unwrap().is_empty());
    }

    #[test]
    fn theory_emits_prediction_columns() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "theory.toml", THEORY);
        let out = dir.path().join("out");
        assert_eq!(entlab(&["theory", "--config", &cfg, "--output", path(&out)]), Ok(0));
        let csv = fs::read_to_string(out.join("points.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(THEORY_HEADER));
        let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 5);
        // Predictions rise toward the ergodic value with Lambda.
        assert!(rows.windows(2).all(|w| w[1][2] >= w[0][2]));
        assert!(rows[4][2] < 16f64.ln());
    }

    #[test]
    fn validate_reports_field_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad = write(dir.path(), "bad.toml", &SWEEP.replace("samples = 20", "samples = 1"));
        assert_eq!(entlab(&["validate", "--config", &bad]), Ok(1));
        let good = write(dir.path(), "good.toml", &SWEEP.replace("samples = 20", "samples = 100"));
        assert_eq!(entlab(&["validate", "--config", &good]), Ok(0));
        let err = entlab(&["sweep", "--config", &bad, "--output", path(&dir.path().join("x"))]).unwrap_err();
        assert!(err.contains("samples"), "{err}");
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "bad.toml", "experiment = \"sweep\"\n\nsamples = \"lots\"\n");
        let err = entlab(&["sweep", "--config", &cfg]).unwrap_err();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn subcommand_must_match_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "sweep.toml", SWEEP);
        let err = entlab(&["cutscan", "--config", &cfg]).unwrap_err();
        assert!(err.contains("sweep"), "{err}");
    }

    #[test]
    fn unknown_flags_are_rejected() {
        assert!(entlab(&["sweep", "--config", "x.toml", "--bogus"]).is_err());
        assert!(entlab(&["sweep"]).is_err());
    }

    #[test]
    fn locked_output_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "oracle.toml", "experiment = \"oracle-check\"\noracle_specs = 5\n");
        let out = dir.path().join("out");
        fs::create_dir_all(&out).unwrap();
        fs::write(out.join(LOCK_FILE), "1\n").unwrap();
        let err = entlab(&["oracle-check", "--config", &cfg, "--output", path(&out)]).unwrap_err();
        assert!(err.contains("locked"), "{err}");
        assert!(!out.join("manifest.json").exists());
    }

    #[test]
    fn workers_flag_wins() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "oracle.toml", "experiment = \"oracle-check\"\noracle_specs = 5\nworkers = 3\n");
        let out = dir.path().join("out");
        assert_eq!(entlab(&["oracle-check", "--config", &cfg, "--output", path(&out)]), Ok(0));
        assert_eq!(RunManifest::load(&out.join("manifest.json")).unwrap().workers, 3);
        assert_eq!(entlab(&["oracle-check", "--config", &cfg, "--workers", "2", "--output", path(&out)]), Ok(0));
        assert_eq!(RunManifest::load(&out.join("manifest.json")).unwrap().workers, 2);
        assert_eq!(resolve_workers_with(None, None, Some("4")), 4);
    }

    #[test]
    fn cutscan_reports_peak_cut() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "cut.toml", CUTSCAN);
        let out = dir.path().join("cut");
        finished(entlab(&["cutscan", "--config", &cfg, "--output", path(&out)]));
        let derived = fs::read_to_string(out.join("derived.csv")).unwrap();
        assert!(derived.lines().any(|l| l.starts_with("l_m,EE")), "{derived}");
    }

    #[test]
    fn fss_writes_every_grid_point() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "fss.toml", FSS);
        let out = dir.path().join("fss");
        finished(entlab(&["fss", "--config", &cfg, "--output", path(&out)]));
        let points = fs::read_to_string(out.join("points.csv")).unwrap();
        assert_eq!(points.lines().count(), 1 + 2 * 9);
        let derived = fs::read_to_string(out.join("derived.csv")).unwrap();
        let m = RunManifest::load(&out.join("manifest.json")).unwrap();
        assert!(derived.lines().any(|l| l.starts_with("alpha_star_crossing,BE")), "{:?}", m.warnings);
    }
}
