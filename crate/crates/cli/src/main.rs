use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::mpsc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use nop_core::actuator::{IlcBenchmark, ServoDynamicsParams};
use nop_core::config::{config_port, ConfigService, ParamStore, ServiceContext, TelemetryHub};
use nop_core::robot_model::{JointId, RobotConstants};
use nop_core::runtime::clock::{request_realtime_priority, ClockMode, Pacer, CYCLE_S, CYCLE_US};
use nop_core::runtime::field::FieldGeometry;
use nop_core::runtime::http::{http_port, ImageServer};
use nop_core::runtime::render::render_camera;
use nop_core::runtime::scenario::Scenario;
use nop_core::runtime::system::{System, SystemConfig};
use nop_core::runtime::world::{Pose2, World};
use nop_core::vision::camera::DEFAULT_NECK_PITCH;
use nop_core::vision::{process_frame, read_ppm, write_ppm, CameraPose, ColorLut, RayTable, VisionConfig, YuyvImage};

#[derive(Parser)]
#[command(name = "nop", version, about = "Simulated humanoid soccer robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the control loop against the simulated world.
    Run {
        /// Parameter file (JSON) loaded before start.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulated seconds to run.
        #[arg(long, default_value_t = 60.0)]
        seconds: f64,
        /// No config or image servers.
        #[arg(long)]
        headless: bool,
        /// Pace cycles against the wall clock.
        #[arg(long)]
        realtime: bool,
        /// Write telemetry frames as JSON lines.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Run the vision pipeline on one PPM frame.
    Vision {
        #[arg(long)]
        image: PathBuf,
        /// NOPLUT01 color table; the built-in table when omitted.
        #[arg(long)]
        lut: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NECK_PITCH, allow_hyphen_values = true)]
        neck_pitch: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        neck_yaw: f64,
    },
    /// Feed-forward learning benchmark; writes `iteration,rms_rad`.
    Ilc {
        #[arg(long, default_value = "left_knee_pitch")]
        joint: String,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        gain: f64,
        #[arg(long, default_value_t = 2)]
        lead: usize,
    },
    /// Render the camera view from a field pose.
    Render {
        /// `x,y,theta` in meters and radians.
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NECK_PITCH, allow_hyphen_values = true)]
        neck_pitch: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        neck_yaw: f64,
        /// `x,y` of the ball; kickoff spot when omitted.
        #[arg(long, allow_hyphen_values = true)]
        ball: Option<String>,
    },
}

fn parse_floats(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().with_context(|| format!("bad {what} {s:?}"))?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        bail!("{what} needs {n} comma-separated numbers, got {s:?}");
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: Option<PathBuf>,
    seed: u64,
    seconds: f64,
    headless: bool,
    realtime: bool,
    record: Option<PathBuf>,
    scenario: Option<PathBuf>,
) -> Result<()> {
    if !(seconds.is_finite() && seconds >= 0.0) {
        bail!("--seconds must be a non-negative number");
    }
    let store = ParamStore::new();
    if let Some(path) = &config {
        let n = store.load(path).with_context(|| format!("loading {}", path.display()))?;
        log::info!("loaded {n} parameters from {}", path.display());
    }
    let scenario = match &scenario {
        Some(path) => Scenario::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => Scenario::default(),
    };
    let (telemetry, commands, ctx) = if headless {
        (None, None, None)
    } else {
        let hub = TelemetryHub::new();
        let (tx, rx) = mpsc::channel();
        let mut ctx = ServiceContext::new(store.clone());
        ctx.telemetry = hub.clone();
        ctx.commands = Some(tx);
        (Some(hub), Some(rx), Some(ctx))
    };
    let mut system = System::new(SystemConfig {
        seed,
        clock: if realtime { ClockMode::Realtime } else { ClockMode::Virtual },
        scenario,
        store,
        telemetry,
        commands,
        ..Default::default()
    })?;

    let _servers = match ctx {
        Some(ctx) => {
            let config = ConfigService::start(("0.0.0.0", config_port()), ctx).context("starting config server")?;
            let images = ImageServer::start(("0.0.0.0", http_port()), system.frames()).context("starting image server")?;
            log::info!("config on {}, images on {}", config.local_addr(), images.local_addr());
            Some((config, images))
        }
        None => None,
    };

    let mut recorder = match &record {
        Some(path) => Some(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?)),
        None => None,
    };
    let mut pacer = realtime.then(|| {
        if !request_realtime_priority() {
            log::warn!("realtime scheduling not permitted; running at normal priority");
        }
        Pacer::new(Duration::from_micros(CYCLE_US))
    });

    let cycles = (seconds / CYCLE_S).round() as u64;
    for _ in 0..cycles {
        if let Some(frame) = system.run_cycle() {
            if let Some(w) = recorder.as_mut() {
                writeln!(w, "{}", frame.to_line())?;
            }
        }
        if let Some(p) = pacer.as_mut() {
            p.wait();
        }
    }
    if let Some(mut w) = recorder {
        w.flush()?;
    }
    let summary = serde_json::json!({
        "cycles": system.cycle,
        "sim_time_s": system.clock.seconds(),
        "vision_frames": system.vision_frames,
        "behavior": system.behavior.mode.as_str(),
        "pose": system.world.robot,
        "ball": system.world.ball.map(|b| [b.x, b.y]),
        "bus_warnings": system.bus_warnings,
        "jitter": pacer.map(|p| p.report()),
    });
    println!("{summary}");
    Ok(())
}

fn vision(image: PathBuf, lut: Option<PathBuf>, out: PathBuf, neck_pitch: f64, neck_yaw: f64) -> Result<()> {
    let file = File::open(&image).with_context(|| format!("opening {}", image.display()))?;
    let (w, h, rgb) = read_ppm(std::io::BufReader::new(file))?;
    let frame = YuyvImage::from_rgb(w, h, &rgb)?;
    let lut = match &lut {
        Some(path) => ColorLut::from_file_bytes(&std::fs::read(path).with_context(|| format!("reading {}", path.display()))?)?,
        None => ColorLut::canonical(),
    };
    let pose = CameraPose::new(neck_yaw, neck_pitch, 0.0, 0.0);
    let (detections, _) = process_frame(&frame, &lut, &VisionConfig::default(), &pose)?;
    std::fs::write(&out, serde_json::to_string_pretty(&detections)? + "\n").with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn ilc(joint: &str, iterations: usize, out: PathBuf, gain: f64, lead: usize) -> Result<()> {
    let joint = JointId::from_name(joint)?;
    let report = IlcBenchmark::new(joint, RobotConstants::default(), ServoDynamicsParams::default()).run(iterations, gain, lead)?;
    std::fs::write(&out, report.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    if let (Some(first), Some(last)) = (report.rms.first(), report.rms.last()) {
        println!("{joint}: rms {first:.5} -> {last:.5} rad over {iterations} iterations");
    }
    Ok(())
}

fn render(pose: &str, out: PathBuf, neck_pitch: f64, neck_yaw: f64, ball: Option<String>) -> Result<()> {
    let p = parse_floats(pose, 3, "pose")?;
    let mut world = World::new(FieldGeometry::default(), 0);
    world.robot = Pose2::new(p[0], p[1], p[2]);
    if let Some(b) = ball {
        let b = parse_floats(&b, 2, "ball")?;
        world.inject(&nop_core::runtime::world::WorldEvent::SetBall { x: b[0], y: b[1], vx: 0.0, vy: 0.0 });
    }
    let view = world.camera_view(neck_yaw, neck_pitch);
    let cfg = VisionConfig::default();
    let rays = RayTable::new(cfg.lens, nop_core::vision::FRAME_WIDTH, nop_core::vision::FRAME_HEIGHT);
    let frame = render_camera(&world.scene(), &view, &rays);
    let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    write_ppm(&mut w, frame.width, frame.height, &frame.to_rgb())?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match Cli::parse().command {
        Command::Run { config, seed, seconds, headless, realtime, record, scenario } => {
            run(config, seed, seconds, headless, realtime, record, scenario)
        }
        Command::Vision { image, lut, out, neck_pitch, neck_yaw } => vision(image, lut, out, neck_pitch, neck_yaw),
        Command::Ilc { joint, iterations, out, gain, lead } => ilc(&joint, iterations, out, gain, lead),
        Command::Render { pose, out, neck_pitch, neck_yaw, ball } => render(&pose, out, neck_pitch, neck_yaw, ball),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
