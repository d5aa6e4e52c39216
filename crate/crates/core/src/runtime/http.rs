//! PNG snapshots of the latest camera frame over plain HTTP/1.1.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use super::vision_worker::FrameStore;
use crate::vision::pipeline::{class_overlay_rgb, encode_png};

pub const DEFAULT_HTTP_PORT: u16 = 7778;
pub const HTTP_PORT_ENV: &str = "NOP_HTTP_PORT";

pub fn http_port() -> u16 {
    std::env::var(HTTP_PORT_ENV).ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_HTTP_PORT)
}

pub struct ImageServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl ImageServer {
    pub fn start(addr: impl ToSocketAddrs, frames: FrameStore) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = std::thread::Builder::new().name("http".into()).spawn(move || {
            while !flag.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let frames = frames.clone();
                        std::thread::spawn(move || {
                            if let Err(e) = serve(stream, &frames) {
                                log::debug!("http client: {e}");
                            }
                        });
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(10)),
                    Err(e) => log::warn!("http accept: {e}"),
                }
            }
        })?;
        Ok(ImageServer { addr, stop, handle: Some(handle) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for ImageServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn respond(stream: &mut TcpStream, status: &str, content_type: &str, body: &[u8]) -> std::io::Result<()> {
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nCache-Control: no-store\r\nConnection: close\r\n\r\n",
        body.len()
    )?;
    stream.write_all(body)?;
    stream.flush()
}

fn serve(stream: TcpStream, frames: &FrameStore) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    // drain headers
    let mut line = String::new();
    while reader.read_line(&mut line)? > 2 {
        line.clear();
    }
    let mut stream = stream;
    let mut parts = request_line.split_whitespace();
    let (method, target) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
    if method != "GET" {
        return respond(&mut stream, "405 Method Not Allowed", "text/plain", b"GET only\n");
    }
    let path = target.split('?').next().unwrap_or("");
    if path != "/camera.png" && path != "/classes.png" {
        return respond(&mut stream, "404 Not Found", "text/plain", b"not found\n");
    }
    let Some(frame) = frames.lock().unwrap_or_else(|e| e.into_inner()).clone() else {
        return respond(&mut stream, "503 Service Unavailable", "text/plain", b"no frame yet\n");
    };
    let rgb = if path == "/camera.png" { frame.image.to_rgb() } else { class_overlay_rgb(&frame.image, &frame.lut) };
    match encode_png(frame.image.width, frame.image.height, &rgb) {
        Ok(png) => respond(&mut stream, "200 OK", "image/png", &png),
        Err(e) => respond(&mut stream, "500 Internal Server Error", "text/plain", e.to_string().as_bytes()),
    }
}
