//! TCP front end for [`SimState`].

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio::task::JoinHandle;
use tracing::{debug, info, warn};

use crate::state::{advance_roll, handle_command, SimState, MAX_LINE};
use crate::SimError;

/// Environment variable clients read for the simulator address.
pub const ADDR_ENV: &str = "GRAMMAGE_SIM_ADDR";
pub const DEFAULT_ADDR: &str = "127.0.0.1:10102";

/// `GRAMMAGE_SIM_ADDR` if set and non-empty, else [`DEFAULT_ADDR`].
pub fn default_addr() -> String {
    std::env::var(ADDR_ENV)
        .ok()
        .filter(|s| !s.trim().is_empty())
        .unwrap_or_else(|| DEFAULT_ADDR.to_string())
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tick {
    /// Rolls advance only on `ADVANCE`.
    Manual,
    /// A new roll every so many milliseconds.
    Every(u64),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub listen: String,
    pub tick: Tick,
}

type Shared = Arc<Mutex<SimState>>;

/// A running server. Dropping the handle stops it.
pub struct ServerHandle {
    local_addr: SocketAddr,
    state: Shared,
    stop: watch::Sender<bool>,
    accept: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Snapshot of the current simulator state.
    pub fn snapshot(&self) -> SimState {
        self.state.lock().expect("sim state poisoned").clone()
    }

    /// Runs `f` with the state locked, as one atomic update.
    pub fn with_state<R>(&self, f: impl FnOnce(&mut SimState) -> R) -> R {
        f(&mut self.state.lock().expect("sim state poisoned"))
    }

    /// Stops accepting, closes open connections and the ticker.
    pub async fn shutdown(mut self) {
        let _ = self.stop.send(true);
        if let Some(h) = self.accept.take() {
            let _ = h.await;
        }
    }

    /// Serves until the process is killed.
    pub async fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.await;
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop.send(true);
    }
}

pub async fn run_server(config: ServerConfig, state: SimState) -> Result<ServerHandle, SimError> {
    if config.tick == Tick::Every(0) {
        return Err(SimError::Config("tick interval must be positive".into()));
    }
    let listener = TcpListener::bind(&config.listen).await.map_err(|source| SimError::Bind {
        addr: config.listen.clone(),
        source,
    })?;
    let local_addr = listener.local_addr().map_err(|source| SimError::Bind {
        addr: config.listen.clone(),
        source,
    })?;
    info!(%local_addr, tick = ?config.tick, "tag server listening");

    let state: Shared = Arc::new(Mutex::new(state));
    let (stop, stopped) = watch::channel(false);

    if let Tick::Every(ms) = config.tick {
        let state = state.clone();
        let mut stopped = stopped.clone();
        tokio::spawn(async move {
            let mut every = tokio::time::interval(Duration::from_millis(ms));
            every.tick().await;
            loop {
                tokio::select! {
                    _ = every.tick() => {
                        let mut s = state.lock().expect("sim state poisoned");
                        let ev = advance_roll(&mut s, now_ms());
                        debug!(counter = ev.counter, fault = ?ev.fault, "roll advanced");
                    }
                    _ = stopped.changed() => break,
                }
            }
        });
    }

    let accept_state = state.clone();
    let accept = tokio::spawn(async move {
        let mut stopped = stopped;
        loop {
            tokio::select! {
                conn = listener.accept() => match conn {
                    Ok((sock, peer)) => {
                        debug!(%peer, "client connected");
                        tokio::spawn(serve_conn(sock, accept_state.clone(), stopped.clone()));
                    }
                    Err(e) => warn!("accept failed: {e}"),
                },
                _ = stopped.changed() => break,
            }
        }
    });

    Ok(ServerHandle {
        local_addr,
        state,
        stop,
        accept: Some(accept),
    })
}

enum Line {
    Ok(String),
    TooLong,
    NotUtf8,
    Eof,
}

/// Reads one LF-terminated line, refusing to buffer more than the protocol
/// allows. An overlong line is drained up to its terminator.
async fn read_line(r: &mut BufReader<TcpStream>, buf: &mut Vec<u8>) -> std::io::Result<Line> {
    buf.clear();
    let mut too_long = false;
    loop {
        let chunk = r.fill_buf().await?;
        if chunk.is_empty() {
            return Ok(if buf.is_empty() && !too_long { Line::Eof } else { finish(buf, too_long) });
        }
        let (take, done) = match chunk.iter().position(|&b| b == b'\n') {
            Some(i) => (i + 1, true),
            None => (chunk.len(), false),
        };
        if !too_long {
            buf.extend_from_slice(&chunk[..take]);
            if buf.len() > MAX_LINE + 2 {
                too_long = true;
                buf.clear();
            }
        }
        r.consume(take);
        if done {
            return Ok(finish(buf, too_long));
        }
    }
}

fn finish(buf: &mut Vec<u8>, too_long: bool) -> Line {
    if too_long {
        return Line::TooLong;
    }
    if buf.last() == Some(&b'\n') {
        buf.pop();
    }
    match std::str::from_utf8(buf) {
        Ok(s) => Line::Ok(s.to_string()),
        Err(_) => Line::NotUtf8,
    }
}

async fn serve_conn(sock: TcpStream, state: Shared, mut stopped: watch::Receiver<bool>) {
    let _ = sock.set_nodelay(true);
    let mut r = BufReader::new(sock);
    let mut buf = Vec::with_capacity(MAX_LINE + 2);
    loop {
        let line = tokio::select! {
            l = read_line(&mut r, &mut buf) => l,
            _ = stopped.changed() => return,
        };
        let reply = match line {
            Ok(Line::Ok(l)) => {
                let mut s = state.lock().expect("sim state poisoned");
                handle_command(&mut s, &l, now_ms())
            }
            Ok(Line::TooLong) => format!("ERR BAD_SYNTAX line longer than {MAX_LINE} bytes"),
            Ok(Line::NotUtf8) => "ERR BAD_SYNTAX request is not ASCII".to_string(),
            Ok(Line::Eof) | Err(_) => return,
        };
        let mut out = reply.into_bytes();
        out.push(b'\n');
        if r.get_mut().write_all(&out).await.is_err() {
            return;
        }
    }
}
