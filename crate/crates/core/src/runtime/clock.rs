use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub const CYCLE_US: u64 = 8000;
pub const CYCLE_S: f64 = CYCLE_US as f64 * 1e-6;
pub const CYCLES_PER_SECOND: u64 = 1_000_000 / CYCLE_US;
/// Vision runs on every n-th cycle.
pub const VISION_DIVIDER: u64 = 5;
pub const TELEMETRY_DIVIDER: u64 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    Virtual,
    Realtime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimClock {
    pub now_us: u64,
    pub mode: ClockMode,
}

impl SimClock {
    pub fn new(mode: ClockMode) -> Self {
        SimClock { now_us: 0, mode }
    }

    pub fn advance(&mut self) {
        self.now_us += CYCLE_US;
    }

    pub fn seconds(&self) -> f64 {
        self.now_us as f64 * 1e-6
    }
}

/// Try to move the calling thread to SCHED_FIFO; false when not permitted.
pub fn request_realtime_priority() -> bool {
    #[cfg(target_os = "linux")]
    unsafe {
        let param = libc::sched_param { sched_priority: libc::sched_get_priority_min(libc::SCHED_FIFO).max(1) };
        libc::sched_setscheduler(0, libc::SCHED_FIFO, &param) == 0
    }
    #[cfg(not(target_os = "linux"))]
    {
        false
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JitterReport {
    pub cycles: usize,
    pub mean_period_ms: f64,
    pub p99_jitter_ms: f64,
    pub max_jitter_ms: f64,
    pub overruns: usize,
}

/// Absolute-deadline pacing for realtime mode, with period statistics.
#[derive(Debug)]
pub struct Pacer {
    period: Duration,
    next: Instant,
    last: Option<Instant>,
    periods_us: Vec<u64>,
    overruns: usize,
}

impl Pacer {
    pub fn new(period: Duration) -> Self {
        Pacer { period, next: Instant::now() + period, last: None, periods_us: Vec::new(), overruns: 0 }
    }

    /// Sleep until the next deadline and record the achieved period.
    pub fn wait(&mut self) {
        let now = Instant::now();
        if now < self.next {
            std::thread::sleep(self.next - now);
        } else {
            self.overruns += 1;
        }
        let woke = Instant::now();
        if let Some(last) = self.last {
            self.periods_us.push((woke - last).as_micros() as u64);
        }
        self.last = Some(woke);
        self.next += self.period;
        // after a long stall, resynchronise rather than burst
        if woke > self.next + self.period * 4 {
            self.next = woke + self.period;
        }
    }

    pub fn report(&self) -> JitterReport {
        let n = self.periods_us.len();
        if n == 0 {
            return JitterReport::default();
        }
        let target = self.period.as_micros() as f64;
        let mean = self.periods_us.iter().sum::<u64>() as f64 / n as f64;
        let mut jitter: Vec<f64> = self.periods_us.iter().map(|&p| (p as f64 - target).abs()).collect();
        jitter.sort_by(f64::total_cmp);
        let p99 = jitter[((n as f64 * 0.99).ceil() as usize).clamp(1, n) - 1];
        JitterReport {
            cycles: n,
            mean_period_ms: mean / 1000.0,
            p99_jitter_ms: p99 / 1000.0,
            max_jitter_ms: jitter[n - 1] / 1000.0,
            overruns: self.overruns,
        }
    }
}
