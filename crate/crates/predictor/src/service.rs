//! Shared service state, the polling loop and the server entry point.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use grammage_core::Model;
use grammage_plcsim::{now_ms, TagAddress, TagClient};
use serde::Serialize;
use tokio::sync::{broadcast, watch};
use tokio::task::JoinHandle;
use tracing::{info, warn};

use crate::poll::{build_record, read_roll, Cursor};
use crate::record::{RollRecord, SessionStats};
use crate::store::Store;
use crate::PredictorError;

pub const DEFAULT_POLL_MS: u64 = 500;

#[derive(Debug, Clone, Default, Serialize)]
pub struct Health {
    pub sim_connected: bool,
    pub polls: u64,
    pub poll_errors: u64,
    pub last_error: Option<String>,
    pub last_poll_at: Option<u64>,
}

struct SimLink {
    client: Option<TagClient>,
    cursor: Cursor,
}

struct Shared {
    model: Model,
    store: Mutex<Store>,
    sim_addr: String,
    sim: tokio::sync::Mutex<SimLink>,
    health: Mutex<Health>,
    events: broadcast::Sender<RollRecord>,
}

/// Cheap to clone; all clones share one store, model and tag connection.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Shared>,
}

impl Service {
    pub fn new(model: Model, store: Store, sim_addr: impl Into<String>) -> Self {
        let cursor = Cursor::from_store(&store);
        let (events, _) = broadcast::channel(256);
        Service {
            inner: Arc::new(Shared {
                model,
                store: Mutex::new(store),
                sim_addr: sim_addr.into(),
                sim: tokio::sync::Mutex::new(SimLink { client: None, cursor }),
                health: Mutex::new(Health::default()),
                events,
            }),
        }
    }

    pub fn model(&self) -> &Model {
        &self.inner.model
    }

    pub(crate) fn store(&self) -> MutexGuard<'_, Store> {
        self.inner.store.lock().expect("store poisoned")
    }

    pub fn stats(&self) -> SessionStats {
        self.store().stats().clone()
    }

    pub fn latest(&self) -> Option<RollRecord> {
        self.store().latest().cloned()
    }

    pub fn recent(&self, limit: usize) -> Vec<RollRecord> {
        self.store().recent(limit)
    }

    pub fn health(&self) -> Health {
        self.inner.health.lock().expect("health poisoned").clone()
    }

    /// Live feed of new and newly labeled records.
    pub fn subscribe(&self) -> broadcast::Receiver<RollRecord> {
        self.inner.events.subscribe()
    }

    async fn connected<'a>(&self, link: &'a mut SimLink) -> Result<&'a mut TagClient, PredictorError> {
        if link.client.is_none() {
            link.client = Some(TagClient::connect(self.inner.sim_addr.as_str()).await?);
            info!(addr = %self.inner.sim_addr, "connected to tag server");
        }
        Ok(link.client.as_mut().expect("just connected"))
    }

    /// One polling cycle. Transport failures drop the connection (the next
    /// cycle reconnects) and are counted in [`Health`].
    pub async fn poll_once(&self) -> Result<Option<RollRecord>, PredictorError> {
        let mut link = self.inner.sim.lock().await;
        let outcome = self.cycle(&mut link).await;
        let mut h = self.inner.health.lock().expect("health poisoned");
        h.polls += 1;
        h.last_poll_at = Some(now_ms());
        match &outcome {
            Ok(_) => h.last_error = None,
            Err(e) => {
                h.poll_errors += 1;
                h.last_error = Some(e.to_string());
                if matches!(e, PredictorError::Client(c) if c.is_transport()) {
                    link.client = None;
                }
            }
        }
        h.sim_connected = link.client.is_some();
        outcome
    }

    async fn cycle(&self, link: &mut SimLink) -> Result<Option<RollRecord>, PredictorError> {
        let cursor = link.cursor;
        let client = self.connected(link).await?;
        let Some(snap) = read_roll(client, &cursor).await? else {
            return Ok(None);
        };
        let record = build_record(&self.inner.model, &cursor, &snap, now_ms());
        let stored = self.store().append(record)?.clone();
        link.cursor = Cursor {
            counter: stored.counter,
            roll_id: stored.roll_id,
        };
        let _ = self.inner.events.send(stored.clone());
        Ok(Some(stored))
    }

    /// Records an operator label. The label is stored first; writing it back
    /// to the manual grammage tag is best effort and only done for the roll
    /// currently on the tags.
    pub async fn record_manual(&self, roll_id: u64, grammage: u16) -> Result<SessionStats, PredictorError> {
        let (record, stats, current) = {
            let mut store = self.store();
            let current = store.latest().map(|r| r.roll_id) == Some(roll_id);
            let record = store
                .label(roll_id, grammage_core::GrammageClass(grammage), now_ms())?
                .clone();
            (record, store.stats().clone(), current)
        };
        let _ = self.inner.events.send(record);
        if current {
            let mut link = self.inner.sim.lock().await;
            let written = match self.connected(&mut link).await {
                Ok(c) => c.write_tag(TagAddress::MANUAL, grammage).await.map_err(PredictorError::from),
                Err(e) => Err(e),
            };
            if let Err(e) = written {
                warn!(roll_id, "manual grammage not written back: {e}");
                if matches!(e, PredictorError::Client(ref c) if c.is_transport()) {
                    link.client = None;
                }
            }
        }
        Ok(stats)
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub sim_addr: String,
    pub listen: String,
    /// `None` keeps records in memory only.
    pub store_path: Option<PathBuf>,
    pub poll_ms: u64,
}

pub struct ServeHandle {
    local_addr: SocketAddr,
    service: Service,
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl ServeHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn service(&self) -> &Service {
        &self.service
    }

    /// Stops polling and serving. Open event streams would hold a graceful
    /// shutdown forever, so stragglers are aborted after a second.
    pub async fn shutdown(mut self) {
        let _ = self.stop.send(true);
        for mut t in self.tasks.drain(..) {
            if tokio::time::timeout(Duration::from_secs(1), &mut t).await.is_err() {
                t.abort();
            }
        }
    }

    /// Runs until the process is killed.
    pub async fn wait(mut self) {
        for t in self.tasks.drain(..) {
            let _ = t.await;
        }
    }
}

impl Drop for ServeHandle {
    fn drop(&mut self) {
        let _ = self.stop.send(true);
    }
}

/// Opens the store, starts the polling loop and the HTTP API.
pub async fn serve(model: Model, config: ServiceConfig) -> Result<ServeHandle, PredictorError> {
    if config.poll_ms == 0 {
        return Err(PredictorError::Config("poll interval must be positive".into()));
    }
    let store = match &config.store_path {
        Some(p) => Store::open(p)?,
        None => Store::in_memory(),
    };
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .map_err(|source| PredictorError::Bind {
            addr: config.listen.clone(),
            source,
        })?;
    let local_addr = listener.local_addr().map_err(|source| PredictorError::Bind {
        addr: config.listen.clone(),
        source,
    })?;
    let service = Service::new(model, store, config.sim_addr.clone());
    let (stop, stopped) = watch::channel(false);

    let poller = {
        let service = service.clone();
        let mut stopped = stopped.clone();
        let period = Duration::from_millis(config.poll_ms);
        tokio::spawn(async move {
            let mut every = tokio::time::interval(period);
            every.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                tokio::select! {
                    _ = every.tick() => {
                        match service.poll_once().await {
                            Ok(Some(r)) => info!(roll_id = r.roll_id, predicted = ?r.predicted, "roll"),
                            Ok(None) => {}
                            Err(e) => warn!("poll failed: {e}"),
                        }
                    }
                    _ = stopped.changed() => break,
                }
            }
        })
    };

    let http = {
        let app = crate::api::router(service.clone());
        let mut stopped = stopped;
        tokio::spawn(async move {
            let shutdown = async move {
                let _ = stopped.changed().await;
            };
            if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
                warn!("http server stopped: {e}");
            }
        })
    };
    info!(%local_addr, sim = %config.sim_addr, poll_ms = config.poll_ms, "predictor listening");

    Ok(ServeHandle {
        local_addr,
        service,
        stop,
        tasks: vec![poller, http],
    })
}
