use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hypergconv::harness::{self, ExperimentConfig, Kind};

/// Runs one experiment kind over the parameter grid of a JSON config.
///
/// Exit status: 0 when every row passes, 1 when some row fails, 2 for a
/// bad command line, config, or unwritable output.
#[derive(Parser, Debug)]
#[command(name = "hypergconv", version)]
struct Args {
    /// lb-nonsmooth, lb-smooth, polyak-worst, cut-game, interp or zoo-validate
    kind: String,
    /// JSON file with the parameters; arrays become grid axes
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for <kind>.csv and <kind>.json
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Leave out the runtime_s column so reruns are byte-identical
    #[arg(long)]
    no_runtime: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("hypergconv: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(args: &Args) -> hypergconv::Result<bool> {
    let kind: Kind = args.kind.parse()?;
    let text = fs::read_to_string(&args.config).map_err(|e| {
        hypergconv::Error::Config(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let mut cfg = ExperimentConfig::parse(kind, &text, args.seed)?;
    if args.no_runtime {
        cfg.runtime = false;
    }
    let threads = harness::threads_from_env()?;
    log::info!("{kind}: {} cells", cfg.cells().len());
    let report = harness::run(&cfg, threads)?;

    fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join(format!("{kind}.csv"));
    let json_path = args.out.join(format!("{kind}.json"));
    report.write_csv(BufWriter::new(File::create(&csv_path)?))?;
    report.write_json(BufWriter::new(File::create(&json_path)?))?;

    let failed: Vec<_> = report.failures().collect();
    for row in &failed {
        let params: Vec<String> = row
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        eprintln!(
            "FAIL row {}: {} measured={} bound={} ({})",
            row.index,
            params.join(" "),
            row.measured,
            row.bound,
            row.note
        );
    }
    println!(
        "{kind}: {} rows, {} failed; wrote {} and {}",
        report.rows.len(),
        failed.len(),
        csv_path.display(),
        json_path.display()
    );
    Ok(failed.is_empty())
}
