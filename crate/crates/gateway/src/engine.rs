use std::fs::File;
use std::io::{BufWriter, Write};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use tokio::sync::oneshot;
use tracing::{debug, warn};
use twinflow_core::diagnosis::{HistoryRecord, Label, StateWord};
use twinflow_core::runtime::{Command, PauseMode, Twin, TwinError};

use crate::hub::{Hub, Published};

type Reply<T> = oneshot::Sender<Result<T, TwinError>>;

enum Request {
    Command(Command, Reply<()>),
    Label {
        word: StateWord,
        label: Label,
        note: Option<String>,
        reply: Reply<HistoryRecord>,
    },
    Shutdown,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error("the twin loop has stopped")]
    Stopped,
}

/// The loop thread owning the twin. Everything else talks to it through a
/// mailbox and reads what it publishes to the hub.
pub struct Engine {
    twin: Twin,
    hub: Arc<Hub>,
    rx: mpsc::Receiver<Request>,
    log: Option<BufWriter<File>>,
}

/// Cheap handle on a running engine.
#[derive(Clone)]
pub struct EngineHandle {
    tx: mpsc::Sender<Request>,
    hub: Arc<Hub>,
    thread: Arc<Mutex<Option<JoinHandle<()>>>>,
}

fn published(twin: &Twin) -> Published {
    Published {
        snapshot: twin.snapshot(),
        history: twin
            .history()
            .map(|h| h.records().cloned().collect())
            .unwrap_or_default(),
    }
}

impl Engine {
    /// Start the loop. Every event is also appended to `log` as a JSON line
    /// when given.
    pub fn spawn(twin: Twin, log: Option<File>) -> EngineHandle {
        let hub = Arc::new(Hub::new(published(&twin)));
        let (tx, rx) = mpsc::channel();
        let mut engine = Engine {
            twin,
            hub: hub.clone(),
            rx,
            log: log.map(BufWriter::new),
        };
        // events from attaching history and the like
        engine.publish();
        let thread = thread::Builder::new()
            .name("twin-loop".into())
            .spawn(move || engine.run())
            .expect("spawn twin loop");
        EngineHandle {
            tx,
            hub,
            thread: Arc::new(Mutex::new(Some(thread))),
        }
    }

    fn publish(&mut self) {
        let events = self.twin.drain_events();
        if let Some(log) = &mut self.log {
            for ev in &events {
                let line = serde_json::to_string(ev).expect("event serializes");
                if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
                    warn!("event log write failed, logging stops: {e}");
                    self.log = None;
                    break;
                }
            }
        }
        self.hub.publish(events, published(&self.twin));
    }

    /// Handle one request. Returns false on shutdown. Replies go out after
    /// the resulting state is published.
    fn handle(&mut self, req: Request) -> bool {
        match req {
            Request::Command(cmd, reply) => {
                let result = self.twin.submit(cmd);
                self.publish();
                let _ = reply.send(result);
            }
            Request::Label {
                word,
                label,
                note,
                reply,
            } => {
                let result = self.twin.label_word(&word, label, note).map(|_| {
                    self.twin
                        .history()
                        .and_then(|h| h.get(&word))
                        .cloned()
                        .expect("labelled word is recorded")
                });
                self.publish();
                let _ = reply.send(result);
            }
            Request::Shutdown => return false,
        }
        true
    }

    fn run(mut self) {
        let period = Duration::from_millis(self.twin.config().pause_ms);
        loop {
            let started = Instant::now();
            match self.twin.run_iteration() {
                Ok(report) => {
                    if let Some(fault) = &report.link_fault {
                        warn!("physical link dropped: {fault}");
                    }
                }
                Err(e) => warn!("iteration failed: {e}"),
            }
            self.publish();

            // the twin already paused if a live link is attached
            let wait = if self.twin.has_link() && self.twin.config().pause_mode == PauseMode::Live {
                Duration::ZERO
            } else {
                period
            };
            let deadline = started + wait;
            loop {
                let left = deadline.saturating_duration_since(Instant::now());
                let req = if left.is_zero() {
                    match self.rx.try_recv() {
                        Ok(r) => r,
                        Err(mpsc::TryRecvError::Empty) => break,
                        Err(mpsc::TryRecvError::Disconnected) => return,
                    }
                } else {
                    match self.rx.recv_timeout(left) {
                        Ok(r) => r,
                        Err(RecvTimeoutError::Timeout) => break,
                        Err(RecvTimeoutError::Disconnected) => return,
                    }
                };
                if !self.handle(req) {
                    debug!("twin loop stopping");
                    return;
                }
            }
        }
    }
}

impl EngineHandle {
    pub fn hub(&self) -> &Hub {
        &self.hub
    }

    pub fn latest(&self) -> Arc<Published> {
        self.hub.latest()
    }

    async fn ask<T>(&self, make: impl FnOnce(Reply<T>) -> Request) -> Result<T, EngineError> {
        let (reply, answer) = oneshot::channel();
        self.tx.send(make(reply)).map_err(|_| EngineError::Stopped)?;
        Ok(answer.await.map_err(|_| EngineError::Stopped)??)
    }

    /// Queue a command for the next iteration; acknowledgments apply at once.
    pub async fn submit(&self, cmd: Command) -> Result<(), EngineError> {
        self.ask(|reply| Request::Command(cmd, reply)).await
    }

    pub async fn label(&self, word: StateWord, label: Label, note: Option<String>) -> Result<HistoryRecord, EngineError> {
        self.ask(|reply| Request::Label {
            word,
            label,
            note,
            reply,
        })
        .await
    }

    /// Stop the loop and wait for it. Later calls do nothing.
    pub fn shutdown(&self) {
        let _ = self.tx.send(Request::Shutdown);
        if let Some(t) = self.thread.lock().unwrap().take() {
            let _ = t.join();
        }
    }
}
