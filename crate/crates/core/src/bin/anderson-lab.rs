use std::path::PathBuf;
use std::process::ExitCode;

use anderson_lab::harness::{parse_config, parse_intervals, parse_list, run_experiment, HarnessError, Overrides};
use clap::Parser;

#[derive(Parser, Debug)]
#[command(name = "anderson-lab", version, about = "Monte Carlo lab for the discrete Anderson model")]
struct Cli {
    /// ids, dos, wegner, spectral-averaging, lifshitz-fit, minami, probe-lemma,
    /// probe-cutoff, probe-decay, probe-heat or probe-decoupling
    experiment: Option<String>,
    /// TOML config; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Box side length
    #[arg(long = "L", id = "L")]
    side: Option<usize>,
    /// uniform:0,b or piecewise:e0,e1,...;p1,p2,... (bounded density on [0, b])
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (default: $ANDERSON_LAB_OUT or ./results)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_volume: Option<usize>,
    #[arg(long)]
    emin: Option<f64>,
    #[arg(long)]
    emax: Option<f64>,
    #[arg(long)]
    npoints: Option<usize>,
    #[arg(long)]
    energy: Option<f64>,
    /// "a,b;c,d"
    #[arg(long)]
    intervals: Option<String>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    window_spacings: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// "0.5,2,8"
    #[arg(long)]
    times: Option<String>,
}

impl Cli {
    fn overrides(self) -> Result<(Option<PathBuf>, Overrides), HarnessError> {
        let bad = |flag: &'static str| move |e: String| HarnessError::Config(format!("{flag}: {e}"));
        let intervals = self.intervals.as_deref().map(parse_intervals).transpose().map_err(bad("intervals"))?;
        let times = self.times.as_deref().map(parse_list).transpose().map_err(bad("times"))?;
        let o = Overrides {
            experiment: self.experiment,
            dim: self.dim,
            side: self.side,
            dist: self.dist,
            samples: self.samples,
            seed: self.seed,
            workers: self.workers,
            out: self.out,
            max_volume: self.max_volume,
            emin: self.emin,
            emax: self.emax,
            npoints: self.npoints,
            energy: self.energy,
            intervals,
            bins: self.bins,
            bandwidth: self.bandwidth,
            window_spacings: self.window_spacings,
            epsilon: self.epsilon,
            times,
        };
        Ok((self.config, o))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.overrides().and_then(|(file, flags)| parse_config(file.as_deref(), flags)).and_then(|cfg| {
        eprintln!("anderson-lab: {} (config {})", cfg.experiment, &cfg.hash()[..12]);
        run_experiment(&cfg)
    }) {
        Ok(outcome) => {
            println!("{}", outcome.csv_path.display());
            println!("{}", outcome.manifest_path.display());
            if outcome.tripped {
                eprintln!("anderson-lab: a check failed, see {}", outcome.csv_path.display());
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("anderson-lab: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
