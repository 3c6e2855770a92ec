//! Single-binary front end: each subcommand reads explicit input files,
//! runs one pipeline stage and writes its outputs atomically, together
//! with a run manifest. Exit codes: 0 success, 1 bad input data, 2 usage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use routecast::charges::{route_charges, weight_factor, zone_distance_profile, ChargingZone};
use routecast::clustering::{derive_flights, fit_route_clusters, ClusteringConfig};
use routecast::dataset::{load_cask, load_flights, save_cask, save_flights, save_labels};
use routecast::pipeline::{test, train, validate, PipelineConfig, TrainedBundle};
use routecast::report::{
    eval_csv, eval_summary, routes_csv, segment_counts_csv, segments_csv, test_summary,
    train_summary,
};
use routecast::segmentation::Segmentation;
use routecast::synth::{generate, SynthSpec};
use routecast::util::{atomic_write, atomic_write_json, read_json, sub_seed};
use routecast::{AiracTable, FlightRecord, ZoneSet};

#[derive(Parser)]
#[command(
    name = "routecast",
    version,
    about = "Pre-tactical route-choice forecasting for one origin/destination market"
)]
struct Cli {
    /// Worker threads for the fitting stages.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct MarketArgs {
    /// Origin airport code.
    #[arg(long)]
    origin: String,
    /// Destination airport code.
    #[arg(long)]
    destination: String,
    /// Comma-separated cycle ids, e.g. 1601,1602.
    #[arg(long, value_delimiter = ',', required = true)]
    airacs: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario: flights, zones, unit costs, labels.
    Synth {
        /// Scenario description (JSON).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster one market's flown trajectories into named routes.
    Cluster {
        /// Flights file (.jsonl).
        #[arg(long)]
        flights: PathBuf,
        /// Charging zones file (JSON).
        #[arg(long)]
        zones: PathBuf,
        #[command(flatten)]
        market: MarketArgs,
        /// Optional clustering parameter overrides (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive airline and arrival-time demand segments for one market.
    Segment {
        /// Flights file (.jsonl).
        #[arg(long)]
        flights: PathBuf,
        /// Airline unit-cost table (CSV: airline,cask_eur).
        #[arg(long)]
        cask: PathBuf,
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the full forecasting bundle on the training cycles.
    Train {
        /// Flights file (.jsonl).
        #[arg(long)]
        flights: PathBuf,
        /// Charging zones file (JSON).
        #[arg(long)]
        zones: PathBuf,
        /// Airline unit-cost table (CSV: airline,cask_eur).
        #[arg(long)]
        cask: PathBuf,
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trained bundle on its held-out validation flights.
    Validate {
        /// Trained bundle (JSON).
        #[arg(long)]
        bundle: PathBuf,
        /// Flights file used for training (.jsonl).
        #[arg(long)]
        flights: PathBuf,
        /// Extra unit costs for airlines missing from the bundle (CSV).
        #[arg(long)]
        cask: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a trained bundle on the held-out cycles and score it.
    Test {
        /// Trained bundle (JSON).
        #[arg(long)]
        bundle: PathBuf,
        /// Flights file covering the held-out cycles (.jsonl).
        #[arg(long)]
        flights: PathBuf,
        /// Extra unit costs for airlines missing from the bundle (CSV).
        #[arg(long)]
        cask: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute each flight's route charges for one cycle.
    Charges {
        /// Flights file (.jsonl).
        #[arg(long)]
        flights: PathBuf,
        /// Charging zones file (JSON).
        #[arg(long)]
        zones: PathBuf,
        /// Cycle id whose unit rates apply.
        #[arg(long)]
        airac: String,
        /// Output CSV path; omitted means standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct ManifestInput {
    path: String,
    bytes: u64,
}

/// Provenance record written next to every produced file set.
#[derive(Serialize)]
struct Manifest {
    command: String,
    argv: Vec<String>,
    version: String,
    inputs: Vec<ManifestInput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    outputs: Vec<String>,
    started_utc: String,
    elapsed_ms: u128,
}

/// Collects output files in memory and flushes them together, so a failed
/// command never leaves a partial file set behind.
struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text =
            serde_json::to_string_pretty(value).with_context(|| format!("serializing {name}"))?;
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
        Ok(())
    }

    fn add_text(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }

    fn flush(self, run: &RunInfo) -> Result<()> {
        let outputs: Vec<String> = self.files.iter().map(|(name, _)| name.clone()).collect();
        for (name, bytes) in &self.files {
            atomic_write(&self.dir.join(name), bytes)
                .with_context(|| format!("writing {name}"))?;
        }
        let manifest = run.manifest(outputs);
        atomic_write_json(&self.dir.join("manifest.json"), &manifest)
            .context("writing manifest.json")?;
        Ok(())
    }
}

struct RunInfo {
    command: String,
    inputs: Vec<ManifestInput>,
    seed: Option<u64>,
    started: chrono::DateTime<chrono::Utc>,
    clock: Instant,
}

impl RunInfo {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            seed: None,
            started: chrono::Utc::now(),
            clock: Instant::now(),
        }
    }

    fn input(&mut self, path: &Path) {
        let bytes = std::fs::metadata(path).map(|m| m.len()).unwrap_or(0);
        self.inputs.push(ManifestInput {
            path: path.display().to_string(),
            bytes,
        });
    }

    fn manifest(&self, outputs: Vec<String>) -> Manifest {
        Manifest {
            command: self.command.clone(),
            argv: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self
                .inputs
                .iter()
                .map(|i| ManifestInput {
                    path: i.path.clone(),
                    bytes: i.bytes,
                })
                .collect(),
            seed: self.seed,
            outputs,
            started_utc: self.started.to_rfc3339(),
            elapsed_ms: self.clock.elapsed().as_millis(),
        }
    }
}

fn load_zones(path: &Path) -> Result<Vec<ChargingZone>> {
    let zones: Vec<ChargingZone> =
        read_json(path).with_context(|| format!("reading zones from {}", path.display()))?;
    Ok(zones)
}

/// Flights of one market across a set of cycles, in file order.
fn market_flights<'a>(
    flights: &'a [FlightRecord],
    market: &MarketArgs,
    table: &AiracTable,
) -> Vec<&'a FlightRecord> {
    flights
        .iter()
        .filter(|f| {
            f.origin == market.origin
                && f.destination == market.destination
                && market.airacs.contains(&table.id_of_date(f.date))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { spec, seed, out } => cmd_synth(&spec, seed, &out),
        Command::Cluster {
            flights,
            zones,
            market,
            config,
            out,
        } => cmd_cluster(&flights, &zones, &market, config.as_deref(), &out),
        Command::Segment {
            flights,
            cask,
            market,
            seed,
            out,
        } => cmd_segment(&flights, &cask, &market, seed, &out),
        Command::Train {
            flights,
            zones,
            cask,
            config,
            out,
        } => cmd_train(&flights, &zones, &cask, &config, &out, cli.threads),
        Command::Validate {
            bundle,
            flights,
            cask,
            out,
        } => cmd_validate(&bundle, &flights, cask.as_deref(), &out),
        Command::Test {
            bundle,
            flights,
            cask,
            out,
        } => cmd_test(&bundle, &flights, cask.as_deref(), &out),
        Command::Charges {
            flights,
            zones,
            airac,
            out,
        } => cmd_charges(&flights, &zones, &airac, out.as_deref()),
    }
}

fn cmd_synth(spec_path: &Path, seed: u64, out: &Path) -> Result<()> {
    let mut run = RunInfo::new("synth");
    run.input(spec_path);
    run.seed = Some(seed);

    let spec: SynthSpec =
        read_json(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let table = AiracTable::default();
    let data = generate(&spec, &table, seed).context("generating the scenario")?;

    let mut cask = BTreeMap::new();
    for airline in &spec.airlines {
        if let Some(c) = airline.cask_eur {
            cask.insert(airline.code.clone(), c);
        }
    }

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    save_flights(&out.join("flights.jsonl"), &data.flights).context("writing flights.jsonl")?;
    save_labels(&out.join("labels.csv"), &data.labels).context("writing labels.csv")?;
    save_cask(&out.join("cask.csv"), &cask).context("writing cask.csv")?;
    atomic_write_json(&out.join("zones.json"), &spec.zones).context("writing zones.json")?;
    let manifest_outputs = vec![
        "flights.jsonl".to_string(),
        "labels.csv".to_string(),
        "cask.csv".to_string(),
        "zones.json".to_string(),
    ];
    atomic_write_json(&out.join("manifest.json"), &run.manifest(manifest_outputs))
        .context("writing manifest.json")?;
    println!(
        "wrote {} flights across {} cycles to {}",
        data.flights.len(),
        spec.periods.len(),
        out.display()
    );
    Ok(())
}

fn cmd_cluster(
    flights_path: &Path,
    zones_path: &Path,
    market: &MarketArgs,
    config_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let mut run = RunInfo::new("cluster");
    run.input(flights_path);
    run.input(zones_path);
    if let Some(p) = config_path {
        run.input(p);
    }

    let flights = load_flights(flights_path)?;
    let zones = ZoneSet::new(load_zones(zones_path)?);
    let config: ClusteringConfig = match config_path {
        Some(p) => read_json(p).with_context(|| format!("reading {}", p.display()))?,
        None => ClusteringConfig::default(),
    };
    let table = AiracTable::default();
    let cohort = market_flights(&flights, market, &table);
    if cohort.is_empty() {
        anyhow::bail!(
            "no {}-{} flights in cycles {}",
            market.origin,
            market.destination,
            market.airacs.join(",")
        );
    }

    let derived = derive_flights(&cohort, &zones, &table)?;
    let regulated: Vec<bool> = cohort.iter().map(|f| f.regulated).collect();
    let clusters = fit_route_clusters(&derived, &regulated, zones.zone_ids(), &config)?;

    let mut outputs = OutputSet::new(out);
    outputs.add_json("clusters.json", &clusters)?;
    outputs.add_text("routes.csv", routes_csv(&clusters)?);
    outputs.flush(&run)?;
    println!(
        "{} flights -> {} named routes + other (silhouette {})",
        cohort.len(),
        clusters.cluster_count,
        clusters
            .silhouette
            .map_or("n/a".to_string(), |s| format!("{s:.3}")),
    );
    if clusters.warning {
        eprintln!("warning: no iteration met all clustering acceptance criteria; kept the best attempt");
    }
    Ok(())
}

fn cmd_segment(
    flights_path: &Path,
    cask_path: &Path,
    market: &MarketArgs,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let mut run = RunInfo::new("segment");
    run.input(flights_path);
    run.input(cask_path);
    run.seed = Some(seed);

    let flights = load_flights(flights_path)?;
    let cask = load_cask(cask_path)?;
    let table = AiracTable::default();
    let cohort = market_flights(&flights, market, &table);
    if cohort.is_empty() {
        anyhow::bail!(
            "no {}-{} flights in cycles {}",
            market.origin,
            market.destination,
            market.airacs.join(",")
        );
    }

    let airlines: Vec<String> = cohort.iter().map(|f| f.airline.clone()).collect();
    let hours: Vec<f64> = cohort.iter().map(|f| f.arrival_hour).collect();
    let segmentation =
        Segmentation::fit(&airlines, &hours, &cask, sub_seed(seed, "time-classes"))?;

    let mut counts = vec![0usize; segmentation.segment_count()];
    for flight in &cohort {
        counts[segmentation.segment_of(&flight.airline, flight.arrival_hour)] += 1;
    }

    let mut outputs = OutputSet::new(out);
    outputs.add_json("segmentation.json", &segmentation)?;
    outputs.add_text("segments.csv", segment_counts_csv(&segmentation, &counts)?);
    outputs.flush(&run)?;
    println!(
        "{} flights over {} segments ({} airline classes x 4 time classes)",
        cohort.len(),
        segmentation.segment_count(),
        segmentation.airline_classes.class_count(),
    );
    Ok(())
}

fn cmd_train(
    flights_path: &Path,
    zones_path: &Path,
    cask_path: &Path,
    config_path: &Path,
    out: &Path,
    threads: usize,
) -> Result<()> {
    let mut run = RunInfo::new("train");
    run.input(flights_path);
    run.input(zones_path);
    run.input(cask_path);
    run.input(config_path);

    let config = PipelineConfig::load(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    run.seed = Some(config.seed);
    let flights = load_flights(flights_path)?;
    let zones = load_zones(zones_path)?;
    let cask = load_cask(cask_path)?;

    let bundle = train(&config, &flights, &cask, zones, threads)?;

    let mut outputs = OutputSet::new(out);
    outputs.add_json("bundle.json", &bundle)?;
    outputs.add_text("routes.csv", routes_csv(&bundle.clusters)?);
    outputs.add_text("segments.csv", segments_csv(&bundle)?);
    outputs.add_text("summary.txt", train_summary(&bundle));
    outputs.flush(&run)?;
    print!("{}", train_summary(&bundle));
    if bundle.clusters.warning {
        eprintln!("warning: no iteration met all clustering acceptance criteria; kept the best attempt");
    }
    Ok(())
}

fn cmd_validate(
    bundle_path: &Path,
    flights_path: &Path,
    cask_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let mut run = RunInfo::new("validate");
    run.input(bundle_path);
    run.input(flights_path);
    if let Some(p) = cask_path {
        run.input(p);
    }

    let bundle = TrainedBundle::load(bundle_path)
        .with_context(|| format!("reading {}", bundle_path.display()))?;
    let flights = load_flights(flights_path)?;
    let extra_cask = match cask_path {
        Some(p) => Some(load_cask(p)?),
        None => None,
    };

    let report = validate(&bundle, &flights, extra_cask.as_ref())?;
    let evals = std::slice::from_ref(&report);

    let mut outputs = OutputSet::new(out);
    outputs.add_json("validation.json", &report)?;
    outputs.add_text("eval.csv", eval_csv(evals)?);
    outputs.add_text("summary.txt", eval_summary(evals));
    outputs.flush(&run)?;
    print!("{}", eval_summary(evals));
    Ok(())
}

fn cmd_test(
    bundle_path: &Path,
    flights_path: &Path,
    cask_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let mut run = RunInfo::new("test");
    run.input(bundle_path);
    run.input(flights_path);
    if let Some(p) = cask_path {
        run.input(p);
    }

    let bundle = TrainedBundle::load(bundle_path)
        .with_context(|| format!("reading {}", bundle_path.display()))?;
    let flights = load_flights(flights_path)?;
    let extra_cask = match cask_path {
        Some(p) => Some(load_cask(p)?),
        None => None,
    };

    let report = test(&bundle, &flights, extra_cask.as_ref())?;

    let mut outputs = OutputSet::new(out);
    outputs.add_json("test.json", &report)?;
    outputs.add_text("eval.csv", eval_csv(&report.evals)?);
    outputs.add_text("summary.txt", test_summary(&report));
    outputs.flush(&run)?;
    print!("{}", test_summary(&report));
    Ok(())
}

fn cmd_charges(
    flights_path: &Path,
    zones_path: &Path,
    airac: &str,
    out: Option<&Path>,
) -> Result<()> {
    let mut run = RunInfo::new("charges");
    run.input(flights_path);
    run.input(zones_path);

    let flights = load_flights(flights_path)?;
    let zones = ZoneSet::new(load_zones(zones_path)?);

    let mut text = String::from("flight_id,airline,mtow_tonnes,weight_factor,total_km,charges_eur\n");
    for flight in &flights {
        let profile = zone_distance_profile(&flight.trajectory, &zones);
        let wf = weight_factor(flight.mtow_tonnes)?;
        let charges = route_charges(&profile, &zones, airac, wf).with_context(|| {
            format!("pricing flight {} for cycle {airac}", flight.flight_id)
        })?;
        text.push_str(&format!(
            "{},{},{},{:.6},{:.3},{:.2}\n",
            flight.flight_id,
            flight.airline,
            flight.mtow_tonnes,
            wf,
            profile.total_km,
            charges.total_eur,
        ));
    }

    match out {
        Some(path) => {
            atomic_write(path, text.as_bytes())
                .with_context(|| format!("writing {}", path.display()))?;
            let manifest_path = path.with_extension("manifest.json");
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().to_string())
                .unwrap_or_else(|| "charges.csv".to_string());
            atomic_write_json(&manifest_path, &run.manifest(vec![name]))
                .context("writing manifest")?;
        }
        None => print!("{text}"),
    }
    Ok(())
}
