//! Wire API: newline-delimited JSON over TCP, or the same messages as
//! WebSocket text frames when the connection opens with an HTTP upgrade.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::Sender;
use std::sync::{Arc, Mutex, Weak};
use std::thread::JoinHandle;
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::queue::BoundedQueue;
use super::store::{ConfigError, ParamStore, ParamValue, Subscription};
use crate::motions::{load_motion, MotionFile};
use crate::vision::ColorLut;

pub const DEFAULT_CONFIG_PORT: u16 = 7777;
pub const CONFIG_PORT_ENV: &str = "NOP_CONFIG_PORT";
const OUTGOING_CAPACITY: usize = 4096;
const POLL: Duration = Duration::from_millis(10);

pub fn config_port() -> u16 {
    std::env::var(CONFIG_PORT_ENV).ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_CONFIG_PORT)
}

/// Requests that the control loop applies between cycles.
#[derive(Clone, Debug)]
pub enum ServiceCommand {
    Lut(Box<ColorLut>),
    PlayMotion(Arc<MotionFile>),
    PlayNamed(String),
}

/// Fan-out of telemetry lines to connected clients.
#[derive(Clone, Default)]
pub struct TelemetryHub {
    sinks: Arc<Mutex<Vec<Weak<BoundedQueue<String>>>>>,
}

impl TelemetryHub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&self) -> Arc<BoundedQueue<String>> {
        let q = Arc::new(BoundedQueue::new(super::queue::DEFAULT_CAPACITY));
        self.sinks.lock().unwrap_or_else(|e| e.into_inner()).push(Arc::downgrade(&q));
        q
    }

    /// `frame` is a JSON object; it is sent with `"event":"telemetry"` added.
    pub fn publish(&self, frame: &Value) {
        let mut sinks = self.sinks.lock().unwrap_or_else(|e| e.into_inner());
        sinks.retain(|s| s.strong_count() > 0);
        if sinks.is_empty() {
            return;
        }
        let mut msg = json!({"event": "telemetry"});
        if let (Some(m), Some(f)) = (msg.as_object_mut(), frame.as_object()) {
            for (k, v) in f {
                m.insert(k.clone(), v.clone());
            }
        }
        let line = msg.to_string();
        for s in sinks.iter().filter_map(Weak::upgrade) {
            s.push(line.clone());
        }
    }

    pub fn subscriber_count(&self) -> usize {
        self.sinks.lock().unwrap_or_else(|e| e.into_inner()).iter().filter(|s| s.strong_count() > 0).count()
    }
}

#[derive(Clone)]
pub struct ServiceContext {
    pub store: ParamStore,
    pub telemetry: TelemetryHub,
    pub commands: Option<Sender<ServiceCommand>>,
}

impl ServiceContext {
    pub fn new(store: ParamStore) -> Self {
        ServiceContext { store, telemetry: TelemetryHub::new(), commands: None }
    }
}

/// Per-connection streams started by `subscribe`.
#[derive(Default)]
pub struct Session {
    subscriptions: Vec<Subscription>,
    telemetry: Option<Arc<BoundedQueue<String>>>,
}

impl Session {
    /// Pending event lines in commit order, parameter events before telemetry.
    pub fn pending_events(&self) -> Vec<String> {
        let mut out = Vec::new();
        for sub in &self.subscriptions {
            if sub.take_lost() {
                out.push(json!({"event": "lost", "path": sub.prefix}).to_string());
            }
            for n in sub.drain() {
                out.push(json!({"event": "param", "path": n.path, "value": n.value, "seq": n.seq}).to_string());
            }
        }
        if let Some(t) = &self.telemetry {
            out.extend(t.drain());
        }
        out
    }
}

fn error_reply(id: &Value, message: impl ToString) -> Value {
    json!({"id": id, "ok": false, "error": message.to_string()})
}

fn param_error(id: &Value, e: ConfigError) -> Value {
    let kind = match e {
        ConfigError::Path(_) => "PathError",
        ConfigError::Type { .. } => "TypeError",
        ConfigError::Decl(_) => "DeclError",
        ConfigError::Meta(_) => "MetaError",
        ConfigError::NotFound(_) => "NotFound",
        ConfigError::Parse { .. } => "ParseError",
        ConfigError::Io(_) => "IoError",
    };
    json!({"id": id, "ok": false, "error": kind, "message": e.to_string()})
}

/// Handle one request message and produce its reply.
pub fn handle_request(ctx: &ServiceContext, session: &mut Session, line: &str) -> Value {
    let req: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return error_reply(&Value::Null, format!("ParseError: {e}")),
    };
    let id = req.get("id").cloned().unwrap_or(Value::Null);
    let op = req.get("op").and_then(Value::as_str).unwrap_or("");
    let path = req.get("path").and_then(Value::as_str);
    let store = &ctx.store;
    match op {
        "set" => {
            let (Some(path), Some(value)) = (path, req.get("value").and_then(ParamValue::from_json)) else {
                return error_reply(&id, "set needs path and a scalar value");
            };
            match store.set(path, value) {
                Ok((v, seq)) => json!({"id": id, "ok": true, "path": path, "value": v, "seq": seq}),
                Err(e) => param_error(&id, e),
            }
        }
        "get" => match store.entry(path.unwrap_or("")) {
            Ok(e) => json!({"id": id, "ok": true, "path": path, "value": e.value, "meta": e.meta}),
            Err(e) => param_error(&id, e),
        },
        "list" => match store.list(path.unwrap_or("/")) {
            Ok(entries) => {
                let entries: Vec<Value> =
                    entries.into_iter().map(|(p, e)| json!({"path": p, "value": e.value, "meta": e.meta})).collect();
                json!({"id": id, "ok": true, "entries": entries})
            }
            Err(e) => param_error(&id, e),
        },
        "subscribe" => {
            if req.get("topic").and_then(Value::as_str) == Some("telemetry") {
                if session.telemetry.is_none() {
                    session.telemetry = Some(ctx.telemetry.subscribe());
                }
                return json!({"id": id, "ok": true, "topic": "telemetry"});
            }
            match store.subscribe(path.unwrap_or("/")) {
                Ok(sub) => {
                    let prefix = sub.prefix.clone();
                    session.subscriptions.push(sub);
                    json!({"id": id, "ok": true, "path": prefix})
                }
                Err(e) => param_error(&id, e),
            }
        }
        "save" | "load" => {
            let Some(file) = req.get("file").and_then(Value::as_str).or(path) else {
                return error_reply(&id, "missing file");
            };
            let result = if op == "save" { store.save(Path::new(file)).map(|_| 0) } else { store.load(Path::new(file)) };
            match result {
                Ok(n) if op == "load" => json!({"id": id, "ok": true, "applied": n}),
                Ok(_) => json!({"id": id, "ok": true}),
                Err(e) => param_error(&id, e),
            }
        }
        "lut_upload" => {
            let Some(data) = req.get("data").and_then(Value::as_str) else {
                return error_reply(&id, "lut_upload needs base64 data");
            };
            let bytes = match base64::engine::general_purpose::STANDARD.decode(data) {
                Ok(b) => b,
                Err(e) => return error_reply(&id, format!("bad base64: {e}")),
            };
            match ColorLut::from_file_bytes(&bytes) {
                Ok(lut) => {
                    if let Some(tx) = &ctx.commands {
                        let _ = tx.send(ServiceCommand::Lut(Box::new(lut)));
                    }
                    json!({"id": id, "ok": true, "bytes": bytes.len()})
                }
                Err(e) => error_reply(&id, e),
            }
        }
        "play_motion" => {
            let cmd = if let Some(text) = req.get("text").and_then(Value::as_str) {
                match load_motion(text) {
                    Ok(m) => ServiceCommand::PlayMotion(Arc::new(m)),
                    Err(e) => return error_reply(&id, e),
                }
            } else if let Some(name) = req.get("name").and_then(Value::as_str) {
                ServiceCommand::PlayNamed(name.to_string())
            } else {
                return error_reply(&id, "play_motion needs name or text");
            };
            if let Some(tx) = &ctx.commands {
                let _ = tx.send(cmd);
            }
            json!({"id": id, "ok": true})
        }
        other => error_reply(&id, format!("unknown op `{other}`")),
    }
}

pub struct ConfigService {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl ConfigService {
    pub fn start(addr: impl std::net::ToSocketAddrs, ctx: ServiceContext) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let stop = shutdown.clone();
        let accept = std::thread::Builder::new().name("config-accept".into()).spawn(move || {
            while !stop.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let (ctx, stop) = (ctx.clone(), stop.clone());
                        let _ = std::thread::Builder::new().name("config-conn".into()).spawn(move || {
                            if let Err(e) = serve_connection(stream, ctx, stop) {
                                log::debug!("config connection closed: {e}");
                            }
                        });
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => std::thread::sleep(POLL),
                    Err(e) => log::warn!("config accept failed: {e}"),
                }
            }
        })?;
        Ok(ConfigService { addr, shutdown, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for ConfigService {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(t) = self.accept.take() {
            let _ = t.join();
        }
    }
}

fn is_upgrade(stream: &TcpStream) -> std::io::Result<bool> {
    let mut buf = [0u8; 4];
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    for _ in 0..500 {
        let n = stream.peek(&mut buf)?;
        if n == 0 {
            return Ok(false);
        }
        if n >= 4 || !b"GET ".starts_with(&buf[..n]) {
            return Ok(&buf[..n] == b"GET ");
        }
        std::thread::sleep(POLL);
    }
    Ok(false)
}

fn serve_connection(stream: TcpStream, ctx: ServiceContext, stop: Arc<AtomicBool>) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    if is_upgrade(&stream)? {
        serve_websocket(stream, ctx, stop)
    } else {
        serve_lines(stream, ctx, stop)
    }
}

fn serve_lines(stream: TcpStream, ctx: ServiceContext, stop: Arc<AtomicBool>) -> std::io::Result<()> {
    stream.set_read_timeout(None)?;
    let session = Arc::new(Mutex::new(Session::default()));
    let outgoing = Arc::new(BoundedQueue::<String>::new(OUTGOING_CAPACITY));
    let done = Arc::new(AtomicBool::new(false));

    let writer = {
        let (mut out, session, outgoing, done, stop) = (stream.try_clone()?, session.clone(), outgoing.clone(), done.clone(), stop);
        std::thread::spawn(move || -> std::io::Result<()> {
            while !done.load(Ordering::SeqCst) && !stop.load(Ordering::SeqCst) {
                let mut lines: Vec<String> = outgoing.pop_timeout(POLL).into_iter().collect();
                lines.extend(outgoing.drain());
                lines.extend(session.lock().unwrap_or_else(|e| e.into_inner()).pending_events());
                for l in lines {
                    out.write_all(l.as_bytes())?;
                    out.write_all(b"\n")?;
                }
                out.flush()?;
            }
            Ok(())
        })
    };

    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // the reply is queued behind events already committed
        let mut s = session.lock().unwrap_or_else(|e| e.into_inner());
        let reply = handle_request(&ctx, &mut s, &line);
        for e in s.pending_events() {
            outgoing.push(e);
        }
        outgoing.push(reply.to_string());
    }
    done.store(true, Ordering::SeqCst);
    writer.join().unwrap_or(Ok(()))
}

fn serve_websocket(stream: TcpStream, ctx: ServiceContext, stop: Arc<AtomicBool>) -> std::io::Result<()> {
    use tungstenite::{Error, Message};
    let to_io = |e: Error| std::io::Error::other(e.to_string());
    stream.set_read_timeout(None)?;
    let mut ws = tungstenite::accept(stream.try_clone()?).map_err(|e| std::io::Error::other(e.to_string()))?;
    stream.set_read_timeout(Some(POLL))?;
    let mut session = Session::default();
    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => {
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    let reply = handle_request(&ctx, &mut session, line);
                    for e in session.pending_events() {
                        ws.send(Message::text(e)).map_err(to_io)?;
                    }
                    ws.send(Message::text(reply.to_string())).map_err(to_io)?;
                }
            }
            Ok(Message::Close(_)) | Err(Error::ConnectionClosed) | Err(Error::AlreadyClosed) => return Ok(()),
            Ok(_) => {}
            Err(Error::Io(e)) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(e) => return Err(to_io(e)),
        }
        for e in session.pending_events() {
            ws.send(Message::text(e)).map_err(to_io)?;
        }
    }
    Ok(())
}
