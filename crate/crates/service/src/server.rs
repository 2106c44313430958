//! JSON-lines TCP server. One thread per connection reads client messages
//! and drives a [`Session`]; a writer thread drains a bounded queue to the
//! socket so a slow client applies back-pressure instead of growing memory.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::Arc;
use std::thread::JoinHandle;

use rand::Rng;

use crate::log::{JsonLinesLog, LogSink, NullLog};
use crate::protocol::{self, audio_message, ClientMessage, ServerMessage, PROTOCOL_VERSION};
use crate::session::{Session, SessionConfig, SessionError, SessionOutput, TrialSpec};

pub const DEFAULT_ADDR: &str = "127.0.0.1:7853";
/// Environment variable overriding the listen address.
pub const ADDR_ENV: &str = "SONIC_GUIDE_ADDR";

/// Outgoing lines buffered per connection.
const QUEUE_DEPTH: usize = 256;

pub fn default_addr() -> String {
    std::env::var(ADDR_ENV).ok().filter(|s| !s.trim().is_empty()).unwrap_or_else(|| DEFAULT_ADDR.to_string())
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: String,
    pub session: SessionConfig,
    /// One `session-<id>.jsonl` per connection when set.
    pub log_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { addr: default_addr(), session: SessionConfig::default(), log_dir: None }
    }
}

pub struct Server {
    listener: TcpListener,
    cfg: Arc<ServerConfig>,
    stop: Arc<AtomicBool>,
}

impl Server {
    pub fn bind(cfg: ServerConfig) -> io::Result<Server> {
        let listener = TcpListener::bind(&cfg.addr)?;
        if let Some(dir) = &cfg.log_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Server { listener, cfg: Arc::new(cfg), stop: Arc::new(AtomicBool::new(false)) })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until stopped.
    pub fn run(self) -> io::Result<()> {
        let ids = Arc::new(AtomicU64::new(1));
        for stream in self.listener.incoming() {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let cfg = Arc::clone(&self.cfg);
            let id = ids.fetch_add(1, Ordering::SeqCst);
            std::thread::spawn(move || {
                if let Err(e) = handle_connection(stream, id, &cfg) {
                    eprintln!("session {id}: {e}");
                }
            });
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::clone(&self.stop);
        let join = std::thread::spawn(move || self.run());
        Ok(ServerHandle { addr, stop, join: Some(join) })
    }
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    join: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn shutdown(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(j) = self.join.take() {
            let _ = j.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.join.is_some() {
            self.stop_inner();
        }
    }
}

fn writer_loop(mut out: TcpStream, rx: Receiver<String>) {
    while let Ok(line) = rx.recv() {
        if out.write_all(line.as_bytes()).and_then(|_| out.write_all(b"\n")).is_err() {
            break;
        }
    }
    let _ = out.flush();
    let _ = out.shutdown(Shutdown::Write);
}

struct Conn {
    tx: SyncSender<String>,
    open: bool,
}

impl Conn {
    fn send(&mut self, msg: &ServerMessage) {
        if self.open && self.tx.send(protocol::encode(msg)).is_err() {
            self.open = false;
        }
    }

    fn error(&mut self, message: impl Into<String>, fatal: bool) {
        self.send(&ServerMessage::Error { message: message.into(), fatal });
    }
}

fn handle_connection(stream: TcpStream, id: u64, cfg: &ServerConfig) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let (tx, rx) = sync_channel::<String>(QUEUE_DEPTH);
    let writer = {
        let out = stream.try_clone()?;
        std::thread::spawn(move || writer_loop(out, rx))
    };
    let mut conn = Conn { tx, open: true };
    let result = serve(BufReader::new(stream.try_clone()?), id, cfg, &mut conn);
    drop(conn);
    let _ = writer.join();
    let _ = stream.shutdown(Shutdown::Both);
    result
}

fn serve(reader: impl BufRead, id: u64, cfg: &ServerConfig, conn: &mut Conn) -> io::Result<()> {
    let mut session: Option<Session> = None;
    for line in reader.lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                conn.error("line is not valid UTF-8", false);
                continue;
            }
            Err(_) => break,
        };
        if line.trim().is_empty() {
            continue;
        }
        let msg = match protocol::parse_client(&line) {
            Ok(m) => m,
            Err(e) => {
                conn.error(e.to_string(), false);
                continue;
            }
        };
        let Some(s) = session.as_mut() else {
            match msg {
                ClientMessage::Hello { version, mode } => {
                    let v = version.unwrap_or(PROTOCOL_VERSION);
                    if v != PROTOCOL_VERSION {
                        conn.error(
                            format!("unsupported protocol version {v} (server speaks {PROTOCOL_VERSION})"),
                            true,
                        );
                        break;
                    }
                    let mut scfg = cfg.session;
                    if let Some(m) = mode {
                        scfg.mode = m;
                    }
                    let new = Session::with_log(id, scfg, open_log(cfg, id)).map_err(io::Error::other)?;
                    conn.send(&ServerMessage::Hello {
                        version: PROTOCOL_VERSION,
                        session: id,
                        rate: scfg.synth.sample_rate,
                        block_size: scfg.synth.block_size,
                        mode: scfg.mode,
                    });
                    session = Some(new);
                }
                _ => conn.error("expected hello first", false),
            }
            continue;
        };
        handle_message(s, msg, conn);
        if !conn.open {
            break;
        }
    }
    if let Some(s) = session.as_mut() {
        if s.trial_active() {
            let _ = s.abort();
        }
    }
    Ok(())
}

fn open_log(cfg: &ServerConfig, id: u64) -> Box<dyn LogSink> {
    let Some(dir) = &cfg.log_dir else {
        return Box::new(NullLog);
    };
    match JsonLinesLog::create(dir.join(format!("session-{id}.jsonl"))) {
        Ok(log) => Box::new(log),
        Err(e) => {
            eprintln!("session {id}: cannot open log: {e}");
            Box::new(NullLog)
        }
    }
}

fn forward(conn: &mut Conn, rate: u32) -> impl FnMut(SessionOutput<'_>) + '_ {
    move |out| match out {
        SessionOutput::Audio { seq, t, frames } => conn.send(&audio_message(seq, rate, t, frames)),
        SessionOutput::Event(e) => conn.send(&ServerMessage::Event { kind: e.kind, t: e.time }),
    }
}

fn handle_message(s: &mut Session, msg: ClientMessage, conn: &mut Conn) {
    let rate = s.config().synth.sample_rate;
    match msg {
        ClientMessage::Hello { .. } => conn.error("session already open", false),
        ClientMessage::Pos { t, x, y, z } => {
            let p = sonic_guide::DisplacementVector { x, y, z };
            let r = s.update_position(t, p, &mut forward(conn, rate));
            match r {
                Ok(u) => {
                    if let Some(rec) = u.ended {
                        conn.send(&ServerMessage::TrialResult(Box::new(rec)));
                    }
                }
                Err(e) => conn.error(e.to_string(), false),
            }
        }
        ClientMessage::StartTrial { mode, start_distance, seed } => {
            let seed = seed.unwrap_or_else(|| rand::thread_rng().gen());
            let r = s.start_trial(TrialSpec { mode, start_distance, seed }, &mut forward(conn, rate));
            match r {
                Ok(st) => conn.send(&ServerMessage::TrialStarted {
                    trial: st.trial,
                    t: st.t,
                    mode: st.mode,
                    start: [st.start.x, st.start.y, st.start.z],
                    target_radius: st.target_radius,
                }),
                Err(e) => conn.error(e.to_string(), false),
            }
        }
        ClientMessage::Abort => match s.abort() {
            Ok(rec) => conn.send(&ServerMessage::TrialResult(Box::new(rec))),
            Err(SessionError::NoTrial) => conn.error("no active trial", false),
            Err(e) => conn.error(e.to_string(), false),
        },
    }
}
