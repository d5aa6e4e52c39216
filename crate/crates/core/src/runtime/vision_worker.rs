//! Vision context: renders the requested camera frame, runs the pipeline and
//! hands immutable detections back. Requests are a latest-wins mailbox.

use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::render::{render_camera, CameraView, Scene};
use crate::vision::{process_frame, CameraPose, ColorLut, Detections, RayTable, VisionConfig, YuyvImage};

#[derive(Clone, Debug)]
pub struct FrameRequest {
    pub cycle: u64,
    pub scene: Scene,
    pub view: CameraView,
    /// Orientation the pipeline believes the camera has.
    pub camera: CameraPose,
    pub lut: Arc<ColorLut>,
    pub config: VisionConfig,
}

#[derive(Clone, Debug)]
pub struct VisionResult {
    pub cycle: u64,
    pub detections: Arc<Detections>,
    pub process_ms: f64,
}

/// Most recent frame and the LUT it was classified with, for image serving.
#[derive(Debug)]
pub struct LatestFrame {
    pub cycle: u64,
    pub image: YuyvImage,
    pub lut: Arc<ColorLut>,
}

pub type FrameStore = Arc<Mutex<Option<Arc<LatestFrame>>>>;

#[derive(Default)]
struct Mailbox {
    request: Option<FrameRequest>,
    shutdown: bool,
}

pub struct VisionWorker {
    mailbox: Arc<(Mutex<Mailbox>, Condvar)>,
    results: Receiver<VisionResult>,
    frames: FrameStore,
    dropped: u64,
    handle: Option<JoinHandle<()>>,
}

impl VisionWorker {
    pub fn spawn() -> Self {
        let mailbox = Arc::new((Mutex::new(Mailbox::default()), Condvar::new()));
        let frames: FrameStore = Arc::new(Mutex::new(None));
        let (tx, rx) = mpsc::channel();
        let handle = {
            let mailbox = mailbox.clone();
            let frames = frames.clone();
            std::thread::Builder::new()
                .name("vision".into())
                .spawn(move || worker(mailbox, frames, tx))
                .expect("spawn vision thread")
        };
        VisionWorker { mailbox, results: rx, frames, dropped: 0, handle: Some(handle) }
    }

    /// Queue a frame; an unprocessed older request is dropped.
    pub fn submit(&mut self, request: FrameRequest) {
        let (lock, cv) = &*self.mailbox;
        let mut m = lock.lock().unwrap_or_else(|e| e.into_inner());
        if m.request.replace(request).is_some() {
            self.dropped += 1;
        }
        cv.notify_all();
    }

    pub fn try_result(&self) -> Option<VisionResult> {
        let mut latest = None;
        while let Ok(r) = self.results.try_recv() {
            latest = Some(r);
        }
        latest
    }

    /// Block until the result for `cycle` (or a later one) arrives.
    pub fn wait_result(&self, cycle: u64, timeout: Duration) -> Option<VisionResult> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.checked_duration_since(Instant::now())?;
            match self.results.recv_timeout(left) {
                Ok(r) if r.cycle >= cycle => return Some(r),
                Ok(_) => continue,
                Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => return None,
            }
        }
    }

    pub fn frames(&self) -> FrameStore {
        self.frames.clone()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

impl Drop for VisionWorker {
    fn drop(&mut self) {
        let (lock, cv) = &*self.mailbox;
        lock.lock().unwrap_or_else(|e| e.into_inner()).shutdown = true;
        cv.notify_all();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn worker(mailbox: Arc<(Mutex<Mailbox>, Condvar)>, frames: FrameStore, results: Sender<VisionResult>) {
    let mut rays: Option<RayTable> = None;
    loop {
        let request = {
            let (lock, cv) = &*mailbox;
            let mut m = lock.lock().unwrap_or_else(|e| e.into_inner());
            loop {
                if m.shutdown {
                    return;
                }
                if let Some(r) = m.request.take() {
                    break r;
                }
                m = cv.wait(m).unwrap_or_else(|e| e.into_inner());
            }
        };
        let lens = request.config.lens;
        let table = match rays.take() {
            Some(t) if t.lens == lens => t,
            _ => RayTable::new(lens, crate::vision::FRAME_WIDTH, crate::vision::FRAME_HEIGHT),
        };
        let image = render_camera(&request.scene, &request.view, &table);
        rays = Some(table);
        let start = Instant::now();
        let detections = match process_frame(&image, &request.lut, &request.config, &request.camera) {
            Ok((d, _)) => d,
            Err(e) => {
                log::warn!("vision frame {} failed: {e}", request.cycle);
                Detections::default()
            }
        };
        let process_ms = start.elapsed().as_secs_f64() * 1e3;
        *frames.lock().unwrap_or_else(|e| e.into_inner()) =
            Some(Arc::new(LatestFrame { cycle: request.cycle, image, lut: request.lut.clone() }));
        if results.send(VisionResult { cycle: request.cycle, detections: Arc::new(detections), process_ms }).is_err() {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::field::FieldGeometry;

    fn request(cycle: u64, ball: Option<(f64, f64)>) -> FrameRequest {
        let mut scene = Scene::new(FieldGeometry::default());
        scene.ball = ball;
        let camera = CameraPose::default();
        FrameRequest {
            cycle,
            scene,
            view: CameraView::new(0.0, 0.0, 0.0, 0.85, &camera),
            camera,
            lut: Arc::new(ColorLut::canonical()),
            config: VisionConfig::default(),
        }
    }

    #[test]
    fn round_trip_and_frame_store() {
        let mut w = VisionWorker::spawn();
        w.submit(request(5, Some((1.0, 0.0))));
        let r = w.wait_result(5, Duration::from_secs(30)).expect("result");
        assert_eq!(r.cycle, 5);
        assert!(r.detections.ball.is_some());
        assert_eq!(w.frames().lock().unwrap().as_ref().unwrap().cycle, 5);
        w.submit(request(10, None));
        let r = w.wait_result(10, Duration::from_secs(30)).expect("result");
        assert!(r.detections.ball.is_none());
    }
}
