//! HTTP service for human annotation: a persistent query queue, experiment
//! status, and the client side used by the training loop.
//!
//! Endpoints:
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/health` | liveness |
//! | POST | `/api/queries` | enqueue a [`Query`](tablesp_core::supervision::Query); 201 with its id |
//! | GET | `/api/queries/pending` | pending queries ordered by id |
//! | GET | `/api/queries/{id}` | one query with status and annotation |
//! | POST | `/api/queries/{id}/annotation` | resolve; 200, 404, 409 or 422 |
//! | GET, PUT | `/api/experiment/status` | loop state and accuracies |

pub mod api;
pub mod client;
pub mod queue;

use std::net::SocketAddr;
use std::thread::JoinHandle;

pub use api::{router, AppState, ExperimentStatus, RunState, ServiceConfig, StatusUpdate};
pub use client::{HttpAnnotator, StatusReporter};
pub use queue::{PendingQuery, Queue, QueueError, QueryRecord, QueryStatus};

fn io_other(e: impl std::fmt::Display) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

async fn bind(cfg: &ServiceConfig) -> std::io::Result<(tokio::net::TcpListener, axum::Router)> {
    let queue = Queue::open(&cfg.data_dir).map_err(io_other)?;
    let app = router(AppState::new(queue), cfg.ui_dir.clone());
    let listener = tokio::net::TcpListener::bind(cfg.addr).await?;
    Ok((listener, app))
}

/// Serves until Ctrl-C.
pub fn serve_blocking(cfg: &ServiceConfig, on_ready: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let (listener, app) = bind(cfg).await?;
        on_ready(listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}

/// A server on its own thread and runtime.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl ServiceHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Shuts the server down and waits for it.
    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().map_err(|_| io_other("server thread panicked"))?,
            None => Ok(()),
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

pub fn spawn(cfg: ServiceConfig) -> std::io::Result<ServiceHandle> {
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let (ready_tx, ready_rx) = std::sync::mpsc::channel();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        rt.block_on(async move {
            let (listener, app) = match bind(&cfg).await {
                Ok(x) => x,
                Err(e) => {
                    let _ = ready_tx.send(Err(io_other(&e)));
                    return Err(e);
                }
            };
            let _ = ready_tx.send(listener.local_addr());
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
        })
    });
    let addr = ready_rx.recv().map_err(io_other)??;
    Ok(ServiceHandle { addr, stop: Some(tx), thread: Some(thread) })
}
