//! The 8 ms control cycle.

use std::collections::BTreeMap;
use std::sync::mpsc::Receiver;
use std::sync::Arc;
use std::time::Duration;

use super::clock::{ClockMode, SimClock, CYCLE_S, TELEMETRY_DIVIDER, VISION_DIVIDER};
use super::params::{self, SystemParams};
use super::scenario::{ControlEvent, Scenario, ScenarioEvent};
use super::telemetry::{AttitudeSummary, DetectionSummary, TelemetryFrame};
use super::vision_worker::{FrameRequest, FrameStore, VisionWorker};
use super::world::{StepInput, World, WorldNotice};
use crate::actuator::{feedforward, gravity_torques, FeedForwardModel, ServoDynamicsParams};
use crate::behavior::{self, Action, BehaviorState, WorldBelief};
use crate::config::{ConfigError, ParamStore, ParamValue, ServiceCommand, Subscription, TelemetryHub};
use crate::estimation::{update_attitude, AttitudeEstimate, FallDetector, FallState, ImuSample};
use crate::gait::{gait_step, GaitState, MAX_STEP_RAD};
use crate::motions::{standard_motions, MotionFile, MotionPlayback, StandardMotions};
use crate::robot_model::{JointId, JointVector, RobotConstants};
use crate::servo_bus::sim::{goal_positions_packet, parse_sensor_reply, sensor_read_packet, torque_enable_packet};
use crate::servo_bus::{ImuReading, PacketLog, SimBus};
use crate::vision::{CameraPose, ColorLut, Detections, VisionConfig};

/// Longest the virtual-mode loop waits for a vision result.
const VISION_WAIT: Duration = Duration::from_secs(60);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Source {
    Gait,
    Motion,
    Relax,
}

pub struct SystemConfig {
    pub seed: u64,
    pub clock: ClockMode,
    pub scenario: Scenario,
    /// Parameters already in the store win over the defaults.
    pub store: ParamStore,
    pub defaults: SystemParams,
    pub record_packets: bool,
    pub telemetry: Option<TelemetryHub>,
    pub commands: Option<Receiver<ServiceCommand>>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            seed: 0,
            clock: ClockMode::Virtual,
            scenario: Scenario::default(),
            store: ParamStore::new(),
            defaults: SystemParams::default(),
            record_packets: false,
            telemetry: None,
            commands: None,
        }
    }
}

struct Playback {
    inner: MotionPlayback,
    /// Started by a command rather than by the behavior.
    manual: bool,
}

pub struct System {
    pub clock: SimClock,
    pub cycle: u64,
    pub world: World,
    pub params: SystemParams,
    pub constants: RobotConstants,
    pub attitude: AttitudeEstimate,
    pub fall: FallDetector,
    pub belief: WorldBelief,
    pub behavior: BehaviorState,
    pub action: Action,
    pub targets: JointVector,
    pub positions: JointVector,
    pub bus_warnings: u64,
    pub vision_frames: u64,
    /// Cycle of the last frame handed to the vision context.
    pub last_vision_cycle: Option<u64>,
    pub detections: Option<(u64, Arc<Detections>)>,
    pub notices: Vec<(u64, WorldNotice)>,
    store: ParamStore,
    subscription: Subscription,
    bus: SimBus,
    imu: ImuReading,
    gait: GaitState,
    source: Source,
    playback: Option<Playback>,
    motions: StandardMotions,
    uploaded: BTreeMap<String, Arc<MotionFile>>,
    torque_on: bool,
    vision: VisionWorker,
    pending_vision: Option<u64>,
    lut: Arc<ColorLut>,
    scenario: Scenario,
    telemetry: Option<TelemetryHub>,
    commands: Option<Receiver<ServiceCommand>>,
}

impl System {
    pub fn new(cfg: SystemConfig) -> Result<Self, ConfigError> {
        params::declare(&cfg.store, &cfg.defaults)?;
        let subscription = cfg.store.subscribe("/")?;
        let params = params::snapshot(&cfg.store, &cfg.defaults);
        let constants = RobotConstants::default();
        let mut world = World::new(params.field, cfg.seed);
        world.params = params.world;
        let gait = GaitState::new(&params.gait);
        let stand = gait.last;
        let mut bus = SimBus::new(&stand, ServoDynamicsParams::default(), &constants.limits, params.bus_corrupt_rate, cfg.seed ^ 0x5EED_B05);
        if cfg.record_packets {
            bus = bus.with_log(PacketLog::new());
        }
        let imu = world.imu();
        bus.set_imu(imu);
        let mut sys = System {
            clock: SimClock::new(cfg.clock),
            cycle: 0,
            world,
            params,
            constants,
            attitude: AttitudeEstimate::default(),
            fall: FallDetector::default(),
            belief: WorldBelief::default(),
            behavior: BehaviorState::default(),
            action: Action::Relax,
            targets: stand,
            positions: stand,
            bus_warnings: 0,
            vision_frames: 0,
            last_vision_cycle: None,
            detections: None,
            notices: Vec::new(),
            store: cfg.store,
            subscription,
            bus,
            imu,
            gait,
            source: Source::Gait,
            playback: None,
            motions: standard_motions(),
            uploaded: BTreeMap::new(),
            torque_on: true,
            vision: VisionWorker::spawn(),
            pending_vision: None,
            lut: Arc::new(ColorLut::canonical()),
            scenario: cfg.scenario,
            telemetry: cfg.telemetry,
            commands: cfg.commands,
        };
        sys.apply_due_events(-1.0, 0.0);
        Ok(sys)
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn frames(&self) -> FrameStore {
        self.vision.frames()
    }

    pub fn take_packet_log(&mut self) -> Option<PacketLog> {
        self.bus.take_log()
    }

    pub fn torque_enabled(&self, j: JointId) -> bool {
        self.bus.servo(j.bus_id()).is_some_and(|s| s.torque_enabled())
    }

    pub fn playing(&self) -> Option<&str> {
        self.playback.as_ref().map(|p| p.inner.name())
    }

    fn apply_due_events(&mut self, from_s: f64, to_s: f64) {
        let due: Vec<ScenarioEvent> = self.scenario.due(from_s, to_s).cloned().collect();
        for event in due {
            match event {
                ScenarioEvent::World(e) => self.world.inject(&e),
                ScenarioEvent::Control(ControlEvent::SetParam { path, value }) => {
                    match ParamValue::from_json(&value).map(|v| self.store.set(&path, v)) {
                        Some(Ok(_)) => {}
                        Some(Err(e)) => log::warn!("scenario set_param {path}: {e}"),
                        None => log::warn!("scenario set_param {path}: unsupported value {value}"),
                    }
                }
                ScenarioEvent::Control(ControlEvent::PlayMotion { name }) => self.play_named(&name),
            }
        }
    }

    fn play_named(&mut self, name: &str) {
        let motion = self.uploaded.get(name).or_else(|| self.motions.get(name)).cloned();
        match motion {
            Some(m) => self.start_manual(m),
            None => log::warn!("unknown motion {name}"),
        }
    }

    fn start_manual(&mut self, motion: Arc<MotionFile>) {
        self.playback = Some(Playback { inner: MotionPlayback::start(motion, self.positions), manual: true });
    }

    /// Advance one 8 ms cycle; returns the telemetry frame when one is due.
    pub fn run_cycle(&mut self) -> Option<TelemetryFrame> {
        let dt = CYCLE_S;
        // (1) clock
        let prev_s = self.clock.seconds();
        self.clock.advance();
        self.cycle += 1;
        let now_s = self.clock.seconds();
        self.apply_due_events(prev_s, now_s);

        // (2) sensors over the bus
        self.bus.set_time_us(self.clock.now_us);
        match self.bus.transact(&sensor_read_packet()).ok().and_then(|r| parse_sensor_reply(&r)) {
            Some((q, imu)) => {
                self.positions = q;
                self.imu = imu;
            }
            None => self.bus_warnings += 1,
        }

        // (3) attitude and falls
        let sample = ImuSample { gyro: self.imu.gyro, accel: self.imu.accel };
        self.attitude = update_attitude(&self.attitude, &sample, dt, &self.params.filter);
        let fall_state = self.fall.update(&self.attitude, dt, &self.params.fall);

        // (4) vision cadence; the previous frame's result is taken first
        let fresh = self.collect_vision();
        if self.cycle % VISION_DIVIDER == 0 {
            self.submit_frame();
        }

        // (5) behavior
        self.belief = behavior::update_belief(
            &self.belief,
            fresh.as_deref(),
            &self.attitude,
            fall_state,
            dt,
            &self.params.behavior,
        );
        self.belief.motion = self.playback.as_ref().map(|p| p.inner.name().to_string());
        let (state, action) = behavior::tick(&self.behavior, &self.belief, &self.params.behavior);
        self.behavior = state;
        self.action = action.clone();

        // (6) targets from the active source
        let previous = self.targets;
        let mut twist = None;
        let mut getup_progress = None;
        let manual = self.playback.as_ref().is_some_and(|p| p.manual) && fall_state == FallState::Stable;
        let source = match (&action, manual) {
            (_, true) => self.step_motion(None, &mut getup_progress),
            (Action::Relax, _) => {
                self.playback = None;
                self.targets = self.positions;
                Source::Relax
            }
            (Action::PlayMotion(name), _) => self.step_motion(Some(name.as_str()), &mut getup_progress),
            (Action::Walk { gait, head }, _) => {
                if self.source != Source::Gait {
                    self.gait = GaitState { phase: 0.0, last: self.targets };
                }
                self.playback = None;
                let (state, out) = gait_step(&self.gait, gait, &self.params.gait, &self.constants.limits, &self.attitude, dt);
                let mut q = out.joints;
                for (j, v) in [(JointId::NECK_YAW, head.yaw), (JointId::NECK_PITCH, head.pitch)] {
                    let v = self.constants.limits.clamp(j, v);
                    q[j] = v.clamp(previous[j] - MAX_STEP_RAD, previous[j] + MAX_STEP_RAD);
                }
                self.gait = GaitState { last: q, ..state };
                self.targets = q;
                if gait.enabled {
                    twist = Some(out.twist);
                }
                Source::Gait
            }
        };
        self.source = source;

        // (7) feed-forward: gravity, viscous and friction compensation
        let command = if source == Source::Relax {
            self.targets
        } else {
            self.feedforward_command(&previous, dt)
        };

        // (8) bus writes
        if source == Source::Relax {
            if self.torque_on {
                self.write(&torque_enable_packet(false));
                self.torque_on = false;
            }
        } else {
            if !self.torque_on {
                self.write(&torque_enable_packet(true));
                self.torque_on = true;
            }
            self.write(&goal_positions_packet(&command));
        }

        // (9) configuration and dashboard commands
        self.apply_config();

        // (10) world
        let external = if self.world.upright() {
            gravity_torques(&self.bus.positions(), &self.constants)
        } else {
            JointVector::ZERO
        };
        self.bus.step(&external, dt);
        let input = StepInput { twist, joints: self.bus.positions(), getup_progress };
        for n in self.world.step(&input, dt) {
            if n == WorldNotice::LowBattery {
                log::warn!("battery low: {:.2} V", self.world.battery_v);
            }
            self.notices.push((self.cycle, n));
        }
        let imu = self.world.imu();
        self.bus.set_imu(imu);

        // (11) telemetry
        (self.cycle % TELEMETRY_DIVIDER == 0).then(|| {
            let frame = self.telemetry_frame();
            if let Some(hub) = &self.telemetry {
                if let Ok(v) = serde_json::to_value(&frame) {
                    hub.publish(&v);
                }
            }
            frame
        })
    }

    fn write(&mut self, packet: &crate::servo_bus::BusPacket) {
        if let Err(e) = self.bus.transact(packet) {
            log::debug!("bus write failed: {e}");
            self.bus_warnings += 1;
        }
    }

    fn feedforward_command(&self, previous: &JointVector, dt: f64) -> JointVector {
        let servo = ServoDynamicsParams::default();
        let model = FeedForwardModel {
            k_velocity: servo.viscous / servo.stiffness,
            k_coulomb: servo.coulomb / servo.stiffness,
            ..FeedForwardModel::gravity_only(servo.stiffness)
        };
        let gravity = if self.world.upright() { gravity_torques(&self.targets, &self.constants) } else { JointVector::ZERO };
        let q = self.targets.map(|j, v| v + feedforward((v - previous[j]) / dt, gravity[j], &model, None));
        self.constants.limits.clamp_all(&q)
    }

    fn step_motion(&mut self, wanted: Option<&str>, getup_progress: &mut Option<f64>) -> Source {
        let restart = match (&self.playback, wanted) {
            (None, Some(_)) => true,
            (Some(p), Some(name)) => p.inner.name() != name && !p.manual,
            _ => false,
        };
        if restart {
            let name = wanted.expect("restart needs a motion name");
            let motion = self.uploaded.get(name).or_else(|| self.motions.get(name)).cloned();
            let Some(motion) = motion else {
                log::warn!("behavior asked for unknown motion {name}");
                self.targets = self.positions;
                return Source::Motion;
            };
            let start = if self.torque_on { self.targets } else { self.positions };
            self.playback = Some(Playback { inner: MotionPlayback::start(motion, start), manual: false });
        }
        let Some(p) = self.playback.as_mut() else {
            return Source::Motion;
        };
        let total = p.inner.motion.total_duration().max(1e-9);
        let getup = p.inner.name().starts_with("getup");
        self.targets = p.inner.step(CYCLE_S);
        if getup {
            *getup_progress = Some((p.inner.elapsed_s / total).min(1.0));
        }
        if !p.inner.active {
            if getup {
                self.world.reset_attitude();
                self.fall.reset();
                *getup_progress = None;
            }
            self.playback = None;
        }
        Source::Motion
    }

    fn collect_vision(&mut self) -> Option<Arc<Detections>> {
        let pending = self.pending_vision?;
        let result = match self.clock.mode {
            ClockMode::Virtual => self.vision.wait_result(pending, VISION_WAIT),
            ClockMode::Realtime => self.vision.try_result(),
        };
        let r = result?;
        if r.cycle >= pending {
            self.pending_vision = None;
        }
        self.detections = Some((r.cycle, r.detections.clone()));
        Some(r.detections)
    }

    fn submit_frame(&mut self) {
        let (yaw, pitch) = (self.positions[JointId::NECK_YAW], self.positions[JointId::NECK_PITCH]);
        let request = FrameRequest {
            cycle: self.cycle,
            scene: self.world.scene(),
            view: self.world.camera_view(yaw, pitch),
            camera: CameraPose::new(yaw, pitch, self.attitude.roll, self.attitude.pitch),
            lut: self.lut.clone(),
            config: VisionConfig {
                threshold: self.params.vision_threshold,
                goal_class: self.params.goal_class,
                ..VisionConfig::default()
            },
        };
        self.vision.submit(request);
        self.pending_vision = Some(self.cycle);
        self.last_vision_cycle = Some(self.cycle);
        self.vision_frames += 1;
    }

    fn apply_config(&mut self) {
        if !self.subscription.drain().is_empty() | self.subscription.take_lost() {
            let p = params::snapshot(&self.store, &self.params);
            self.world.field = p.field;
            self.world.params = p.world;
            if p.bus_corrupt_rate != self.params.bus_corrupt_rate {
                self.bus.set_corrupt_rate(p.bus_corrupt_rate);
            }
            self.params = p;
        }
        let commands: Vec<ServiceCommand> = self.commands.as_ref().map(|rx| rx.try_iter().collect()).unwrap_or_default();
        for c in commands {
            match c {
                ServiceCommand::Lut(lut) => self.lut = Arc::from(lut),
                ServiceCommand::PlayMotion(m) => {
                    self.uploaded.insert(m.name.clone(), m.clone());
                    self.start_manual(m);
                }
                ServiceCommand::PlayNamed(name) => self.play_named(&name),
            }
        }
    }

    pub fn telemetry_frame(&self) -> TelemetryFrame {
        TelemetryFrame {
            cycle: self.cycle,
            time_us: self.clock.now_us,
            targets: self.targets,
            positions: self.positions,
            attitude: AttitudeSummary { roll: self.attitude.roll, pitch: self.attitude.pitch },
            fall_state: self.fall.state,
            behavior: self.behavior.mode.as_str().to_string(),
            motion: self.playing().map(str::to_string),
            battery_v: self.world.battery_v,
            pose: self.world.robot,
            ball: self.world.ball.map(|b| [b.x, b.y]),
            detections: self.detections.as_ref().map(|(c, d)| DetectionSummary::new(*c, d)),
            bus_warnings: self.bus_warnings,
        }
    }

    /// Run for `seconds` of simulated time, handing each telemetry frame to `sink`.
    pub fn run_for(&mut self, seconds: f64, mut sink: impl FnMut(&TelemetryFrame)) {
        let cycles = (seconds / CYCLE_S).round() as u64;
        for _ in 0..cycles {
            if let Some(f) = self.run_cycle() {
                sink(&f);
            }
        }
    }
}
