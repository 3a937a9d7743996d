//! Async client for the tag server.

use std::time::Duration;

use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpStream, ToSocketAddrs};

use crate::state::ErrorCode;
use crate::tags::{Quality, TagAddress};

#[derive(Debug, Error)]
pub enum ClientError {
    /// The server answered `ERR`.
    #[error("server error {code}: {message}")]
    Server { code: ErrorCode, message: String },
    /// Connection refused, reset, closed or timed out.
    #[error("transport error: {0}")]
    Transport(#[from] std::io::Error),
    /// The server answered something the protocol does not allow.
    #[error("unexpected response {0:?}")]
    Protocol(String),
}

impl ClientError {
    pub fn is_transport(&self) -> bool {
        matches!(self, ClientError::Transport(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagReading {
    pub value: u16,
    pub quality: Quality,
    pub timestamp: u64,
}

#[derive(Debug)]
pub struct TagClient {
    conn: BufReader<TcpStream>,
    timeout: Duration,
    line: String,
}

impl TagClient {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

    pub async fn connect(addr: impl ToSocketAddrs) -> Result<Self, ClientError> {
        let sock = tokio::time::timeout(Self::DEFAULT_TIMEOUT, TcpStream::connect(addr))
            .await
            .map_err(|_| timed_out("connect"))??;
        sock.set_nodelay(true)?;
        Ok(TagClient {
            conn: BufReader::new(sock),
            timeout: Self::DEFAULT_TIMEOUT,
            line: String::new(),
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Sends one raw request line and returns the raw response line, `ERR`
    /// responses included.
    pub async fn request(&mut self, line: &str) -> Result<String, ClientError> {
        tokio::time::timeout(self.timeout, self.exchange(line))
            .await
            .map_err(|_| timed_out("request"))?
    }

    async fn exchange(&mut self, line: &str) -> Result<String, ClientError> {
        let mut out = Vec::with_capacity(line.len() + 1);
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
        self.conn.get_mut().write_all(&out).await?;
        self.line.clear();
        let n = self.conn.read_line(&mut self.line).await?;
        if n == 0 || !self.line.ends_with('\n') {
            return Err(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "server closed the connection").into());
        }
        Ok(self.line.trim_end_matches('\n').to_string())
    }

    /// Like [`request`](Self::request) but turns `ERR` into
    /// [`ClientError::Server`] and strips the `OK`.
    async fn call(&mut self, line: &str) -> Result<String, ClientError> {
        let resp = self.request(line).await?;
        if resp == "OK" {
            return Ok(String::new());
        }
        if let Some(rest) = resp.strip_prefix("OK ") {
            return Ok(rest.to_string());
        }
        if let Some(rest) = resp.strip_prefix("ERR ") {
            let (code, message) = rest.split_once(' ').unwrap_or((rest, ""));
            if let Some(code) = ErrorCode::parse(code) {
                return Err(ClientError::Server {
                    code,
                    message: message.to_string(),
                });
            }
        }
        Err(ClientError::Protocol(resp))
    }

    pub async fn read_tag(&mut self, addr: TagAddress) -> Result<TagReading, ClientError> {
        let body = self.call(&format!("READ {addr}")).await?;
        let parts: Vec<&str> = body.split(' ').collect();
        let parsed = match parts.as_slice() {
            [v, q, t] => v
                .parse()
                .ok()
                .zip(q.parse::<Quality>().ok())
                .zip(t.parse().ok())
                .map(|((value, quality), timestamp)| TagReading {
                    value,
                    quality,
                    timestamp,
                }),
            _ => None,
        };
        parsed.ok_or_else(|| ClientError::Protocol(format!("OK {body}")))
    }

    pub async fn write_tag(&mut self, addr: TagAddress, value: u16) -> Result<(), ClientError> {
        let body = self.call(&format!("WRITE {addr} {value}")).await?;
        if body.is_empty() {
            Ok(())
        } else {
            Err(ClientError::Protocol(format!("OK {body}")))
        }
    }

    /// Asks the simulator for the next roll; returns the new counter value.
    pub async fn advance(&mut self) -> Result<u16, ClientError> {
        let body = self.call("ADVANCE").await?;
        body.parse().map_err(|_| ClientError::Protocol(format!("OK {body}")))
    }
}

fn timed_out(what: &str) -> ClientError {
    ClientError::Transport(std::io::Error::new(std::io::ErrorKind::TimedOut, format!("{what} timed out")))
}
