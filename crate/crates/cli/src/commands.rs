use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context};
use pointing_core::latency::{measure, LatencyConfig};
use pointing_core::report::{goal_table, write_experiment_a, write_experiment_b};
use pointing_core::sim::{cell_rng, run_experiment_a, run_experiment_b, synthesize_frame, Aim, Pose, Scenario};
use pointing_core::{CameraIntrinsics, DetectionFrame, KeypointStrategy, Pipeline, PipelineConfig, StreamValidator};
use serde_json::json;

use crate::{BenchArgs, EstimateArgs, ExperimentArgs, Failure, RoiArgs, SimulateArgs};

type Outcome = Result<(), Failure>;

fn config<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn open_output(path: &Path) -> Result<Box<dyn Write>, Failure> {
    if is_stdio(path) {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display())).map_err(config)?;
    Ok(Box::new(BufWriter::new(file)))
}

fn load_intrinsics(path: Option<&Path>) -> Result<CameraIntrinsics, Failure> {
    let Some(path) = path else { return Ok(CameraIntrinsics::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(config)?;
    CameraIntrinsics::from_toml_str(&text).with_context(|| format!("in {}", path.display())).map_err(config)
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario, Failure> {
    let Some(path) = path else { return Ok(Scenario::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(config)?;
    Scenario::from_toml_str(&text).with_context(|| format!("in {}", path.display())).map_err(config)
}

fn write_line(out: &mut dyn Write, line: &str) -> Outcome {
    writeln!(out, "{line}").context("write failed").map_err(input)
}

pub fn estimate(args: EstimateArgs) -> Outcome {
    let intr = load_intrinsics(args.roi.intrinsics.as_deref())?;
    let cfg = PipelineConfig {
        strategy: args.roi.strategy,
        roi: args.roi.params(),
        tracking: args.track.params(),
        gate: args.gate.params(),
    };
    let mut pipeline = Pipeline::new(cfg, intr).map_err(config)?;

    let reader: Box<dyn BufRead> = if is_stdio(&args.input) {
        Box::new(BufReader::new(io::stdin().lock()))
    } else {
        let f =
            File::open(&args.input).with_context(|| format!("cannot open {}", args.input.display())).map_err(input)?;
        Box::new(BufReader::new(f))
    };
    let mut out = open_output(&args.output)?;
    let mut commits = args.commits.as_deref().map(open_output).transpose()?;

    let mut validator = StreamValidator::new();
    let (mut frames, mut estimates, mut skipped, mut committed) = (0usize, 0usize, 0usize, 0usize);
    let start = Instant::now();
    for (n, line) in reader.lines().enumerate() {
        let line = line.with_context(|| format!("cannot read line {}", n + 1)).map_err(input)?;
        if line.trim().is_empty() {
            continue;
        }
        let frame = match DetectionFrame::from_json_line(&line).and_then(|f| validator.accept(&f).map(|_| f)) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("warning: line {}: {e}; skipped", n + 1);
                skipped += 1;
                continue;
            }
        };
        let result = pipeline.process(&frame);
        frames += 1;
        estimates += usize::from(result.estimate.estimate.is_some());
        let record = serde_json::to_string(&result.estimate.to_record()).map_err(input)?;
        write_line(&mut out, &record)?;
        if let Some(c) = result.commit {
            committed += 1;
            if let Some(w) = commits.as_mut() {
                write_line(w.as_mut(), &serde_json::to_string(&c).map_err(input)?)?;
            }
        }
    }
    out.flush().map_err(input)?;
    if let Some(w) = commits.as_mut() {
        w.flush().map_err(input)?;
    }
    let secs = start.elapsed().as_secs_f64();
    let fps = if secs > 0.0 { frames as f64 / secs } else { 0.0 };
    eprintln!(
        "frames {frames}, yield {estimates}/{frames}, skipped lines {skipped}, commits {committed}, {fps:.0} frames/s"
    );
    Ok(())
}

fn pick_aim(args: &SimulateArgs, scn: &Scenario) -> Result<Aim, Failure> {
    if let Some((x, y)) = args.target {
        return Ok(Aim::Target { x, y });
    }
    let dir = match &args.direction {
        Some(name) => scn.directions.iter().find(|d| &d.name == name).ok_or_else(|| {
            let known: Vec<&str> = scn.directions.iter().map(|d| d.name.as_str()).collect();
            config(anyhow!("unknown direction `{name}` (scenario has: {})", known.join(", ")))
        })?,
        None => scn.directions.first().ok_or_else(|| config(anyhow!("scenario has no directions")))?,
    };
    Ok(Aim::from(dir))
}

pub fn simulate(args: SimulateArgs) -> Outcome {
    let intr = load_intrinsics(args.intrinsics.as_deref())?;
    let mut scn = load_scenario(args.scenario.as_deref())?;
    if let Some(seed) = args.seed {
        scn.seed = seed;
    }
    let frames = args.frames.unwrap_or(scn.frames_per_pose);
    let aim = pick_aim(&args, &scn)?;
    let pose = Pose::new(args.range, args.bearing);

    let mut out = open_output(&args.output)?;
    let mut truth = args.truth.as_deref().map(open_output).transpose()?;
    let mut rng = cell_rng(scn.seed, 0);
    for i in 0..frames {
        let t = i as f64 / scn.frame_rate;
        let (frame, gt) = synthesize_frame(&scn, &pose, &aim, &intr, t, &mut rng).map_err(config)?;
        write_line(&mut out, &frame.to_json_line())?;
        if let Some(w) = truth.as_mut() {
            let record = json!({
                "t": t,
                "eye": gt.eye.to_array(),
                "fingertip": gt.fingertip.to_array(),
                "pitch_deg": gt.pitch_deg,
                "yaw_deg": gt.yaw_deg,
                "goal": gt.floor_goal.map(|g| [g.x, g.y]),
            });
            write_line(w.as_mut(), &record.to_string())?;
        }
    }
    out.flush().map_err(input)?;
    if let Some(w) = truth.as_mut() {
        w.flush().map_err(input)?;
    }
    Ok(())
}

fn experiment_setup(args: &ExperimentArgs) -> Result<(Scenario, CameraIntrinsics), Failure> {
    let intr = load_intrinsics(args.roi.intrinsics.as_deref())?;
    let mut scn = load_scenario(args.scenario.as_deref())?;
    if let Some(seed) = args.seed {
        scn.seed = seed;
    }
    if let Some(frames) = args.frames {
        scn.frames_per_pose = frames;
    }
    Ok((scn, intr))
}

fn print_written(paths: &[std::path::PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

pub fn experiment_a(args: ExperimentArgs) -> Outcome {
    let (scn, intr) = experiment_setup(&args)?;
    let strategies = if args.strategies.is_empty() { KeypointStrategy::ALL.to_vec() } else { args.strategies.clone() };
    let exp = run_experiment_a(&scn, &intr, &strategies, &args.roi.params(), !args.serial).map_err(config)?;
    let written = write_experiment_a(&args.out_dir, &exp).map_err(config)?;

    println!("{:<10} {}", "strategy", scn.grid.ranges.iter().map(|r| format!("{r:>7.1} m")).collect::<String>());
    for &s in &strategies {
        let errs: String = scn.grid.ranges.iter().map(|&r| format!("{:>9.2}", exp.mean_error_at(s, r))).collect();
        println!("{:<10} {errs}   (mean angular error, deg)", s.as_str());
    }
    print_written(&written);
    Ok(())
}

pub fn experiment_b(args: ExperimentArgs) -> Outcome {
    let (scn, intr) = experiment_setup(&args)?;
    let strategy = match args.strategies.as_slice() {
        [] => args.roi.strategy,
        [s] => *s,
        _ => return Err(config(anyhow!("experiment-b scores one strategy; use --strategy"))),
    };
    let exp = run_experiment_b(&scn, &intr, strategy, &args.roi.params(), !args.serial).map_err(config)?;
    let written = write_experiment_b(&args.out_dir, &exp).map_err(config)?;
    print!("{}", goal_table(&exp));
    print_written(&written);
    Ok(())
}

fn pipeline_config(roi: &RoiArgs, track: Option<pointing_core::TrackerParams>) -> PipelineConfig {
    PipelineConfig { strategy: roi.strategy, roi: roi.params(), tracking: track, ..PipelineConfig::default() }
}

pub fn bench(args: BenchArgs) -> Outcome {
    let intr = load_intrinsics(args.roi.intrinsics.as_deref())?;
    let cfg = LatencyConfig {
        frames: args.frames,
        samples_per_frame: args.samples,
        seed: args.seed,
        pipeline: pipeline_config(&args.roi, args.track.params()),
    };
    let report = measure(&cfg, &intr).map_err(config)?;
    if args.json {
        println!("{}", serde_json::to_string(&report).map_err(input)?);
    } else {
        println!("{}", report.summary());
    }
    Ok(())
}
