//! Connected clients and event fan-out.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};

use serde_json::Value;

/// Frames a session may have queued before it counts as a slow consumer
/// and is dropped.
pub const SESSION_QUEUE_FRAMES: usize = 1024;

type Closer = Box<dyn Fn() + Send + Sync>;

/// The sending half of one client connection.
#[derive(Clone)]
pub struct SessionHandle {
    pub id: u64,
    tx: SyncSender<String>,
    closer: Arc<Closer>,
}

impl SessionHandle {
    /// Queue one frame; false once the session is gone or overflowed, in
    /// which case the connection is closed.
    pub fn send(&self, frame: &Value) -> bool {
        match self.tx.try_send(frame.to_string()) {
            Ok(()) => true,
            Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => {
                (self.closer)();
                false
            }
        }
    }

    pub fn close(&self) {
        (self.closer)();
    }

    /// Ask the writer to flush what is queued and then hang up.
    pub fn finish(&self) {
        if self.tx.try_send(String::new()).is_err() {
            self.close();
        }
    }
}

/// The frame a writer treats as "flush and hang up".
pub fn is_hangup(frame: &str) -> bool {
    frame.is_empty()
}

#[derive(Default)]
pub struct Sessions {
    next_id: AtomicU64,
    live: Mutex<Vec<SessionHandle>>,
}

impl Sessions {
    /// Register a connection. `closer` must make the connection's reader
    /// and writer give up.
    pub fn open(&self, closer: impl Fn() + Send + Sync + 'static) -> (SessionHandle, Receiver<String>) {
        let (tx, rx) = sync_channel(SESSION_QUEUE_FRAMES);
        let handle = SessionHandle {
            id: self.next_id.fetch_add(1, Ordering::SeqCst) + 1,
            tx,
            closer: Arc::new(Box::new(closer)),
        };
        self.live().push(handle.clone());
        (handle, rx)
    }

    pub fn remove(&self, id: u64) {
        self.live().retain(|s| s.id != id);
    }

    /// Send to every session, dropping those that cannot keep up.
    pub fn broadcast(&self, frame: &Value) {
        self.live().retain(|s| s.send(frame));
    }

    /// Hang up on every session once its queued frames are written.
    pub fn close_all(&self) {
        for s in self.live().drain(..) {
            s.finish();
        }
    }

    pub fn len(&self) -> usize {
        self.live().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn live(&self) -> std::sync::MutexGuard<'_, Vec<SessionHandle>> {
        self.live.lock().unwrap_or_else(|e| e.into_inner())
    }
}
