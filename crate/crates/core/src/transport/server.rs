use std::fs;
use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use parking_lot::{Mutex, RwLock, RwLockReadGuard};

use super::message::{self, ErrorCode, Message, SENTINEL, SPARSE_WIRE_LEN};
use crate::cipher::Ciphertext;
use crate::coins::CoinSource;
use crate::error::{Error, Result};
use crate::store::{RebalanceCursor, StoreState};

fn to_wire(e: &Error) -> Message {
    let code = match e {
        Error::IndexOutOfRange { .. } => ErrorCode::OutOfRange,
        Error::WrongMode { .. } => ErrorCode::WrongMode,
        Error::MalformedCiphertext { .. } | Error::Protocol(_) | Error::InvalidArgument(_) => {
            ErrorCode::Malformed
        }
        Error::Collision => ErrorCode::Collision,
        Error::IndexSpaceExhausted => ErrorCode::Exhausted,
        Error::Io(_) => ErrorCode::Io,
        _ => ErrorCode::Internal,
    };
    Message::error(code, e.to_string())
}

fn rank(r: u64) -> Option<usize> {
    (r != SENTINEL).then_some(r as usize)
}

/// Store owner. Readers (`GET_CELL`, `LENGTH`) share the store; writers take
/// it exclusively for the duration of one request.
pub struct Server {
    store: RwLock<StoreState>,
    coins: Mutex<CoinSource>,
    cursor: Mutex<Option<RebalanceCursor>>,
    save_path: Option<PathBuf>,
}

impl Server {
    /// `coins` drives the rotation offsets; seed it only in tests.
    pub fn new(store: StoreState, coins: CoinSource) -> Self {
        Self {
            store: RwLock::new(store),
            coins: Mutex::new(coins),
            cursor: Mutex::new(None),
            save_path: None,
        }
    }

    pub fn with_save_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.save_path = Some(path.into());
        self
    }

    pub fn store(&self) -> RwLockReadGuard<'_, StoreState> {
        self.store.read()
    }

    pub fn snapshot(&self) -> StoreState {
        self.store.read().clone()
    }

    pub fn into_store(self) -> StoreState {
        self.store.into_inner()
    }

    pub fn handle(&self, msg: Message) -> Message {
        match self.dispatch(msg) {
            Ok(m) => m,
            Err(e) => to_wire(&e),
        }
    }

    /// Decodes, handles and encodes one frame. Undecodable input yields an
    /// `ERROR` frame and leaves the store untouched.
    pub fn handle_frame(&self, frame: &[u8]) -> Vec<u8> {
        let reply = match message::decode(frame) {
            Ok(m) => self.handle(m),
            Err(e) => to_wire(&e),
        };
        message::encode(&reply)
    }

    fn dispatch(&self, msg: Message) -> Result<Message> {
        match msg {
            Message::GetCell { index } => {
                let store = self.store.read();
                let cell = store.get_cell(usize::try_from(index).unwrap_or(usize::MAX)).map_err(
                    |_| Error::IndexOutOfRange {
                        index,
                        len: store.len() as u64,
                    },
                )?;
                Ok(Message::Cell {
                    cell: cell.to_bytes().to_vec(),
                })
            }
            Message::Length => Ok(Message::Len {
                n: self.store.read().len() as u64,
            }),
            Message::InsertAt { index, cell } => {
                let c = Ciphertext::from_bytes(&cell)?;
                let mut store = self.store.write();
                let l = usize::try_from(index).unwrap_or(usize::MAX);
                store.insert_at(l, c, &mut self.coins.lock())?;
                Ok(Message::Ok { sparse: None })
            }
            Message::InsertBetween { left, right, cell } => {
                let c = Ciphertext::from_bytes(&cell)?;
                let mut store = self.store.write();
                let dec = store.as_decoupled_mut().ok_or(Error::WrongMode {
                    expected: "decoupled",
                })?;
                let idx = dec.insert_between_or_respace(rank(left), rank(right), c)?;
                let mut wire = [0u8; SPARSE_WIRE_LEN];
                wire.copy_from_slice(&idx.to_be_bytes(SPARSE_WIRE_LEN));
                Ok(Message::Ok { sparse: Some(wire) })
            }
            Message::RebalanceHint { batch } => {
                let batch = if batch == 0 { usize::MAX } else { batch as usize };
                self.rebalance_step(batch)?;
                Ok(Message::Ok { sparse: None })
            }
            Message::Save => {
                self.save()?;
                Ok(Message::Ok { sparse: None })
            }
            other => Err(Error::Protocol(format!(
                "{:?} is not a request",
                other.opcode()
            ))),
        }
    }

    /// Advances the background pass by one batch, starting a new pass if
    /// none is running. Returns whether the pass finished.
    pub fn rebalance_step(&self, batch: usize) -> Result<bool> {
        let mut cursor = self.cursor.lock();
        let mut store = self.store.write();
        let Some(dec) = store.as_decoupled_mut() else {
            return Err(Error::WrongMode {
                expected: "decoupled",
            });
        };
        let cur = cursor.get_or_insert_with(|| dec.begin_rebalance(&mut self.coins.lock()));
        let done = dec.rebalance_step(cur, batch)?;
        if done {
            *cursor = None;
        }
        Ok(done)
    }

    pub fn save(&self) -> Result<()> {
        let path = self
            .save_path
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("server has no store file".into()))?;
        let bytes = self.store.read().to_bytes();
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

fn serve_connection(server: &Server, stream: TcpStream) -> Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    loop {
        let frame = match message::read_frame(&mut reader) {
            Ok(Some(f)) => f,
            Ok(None) => return Ok(()),
            Err(e) => {
                // unreadable framing: report and drop the connection
                let _ = message::write_frame(&mut writer, &message::encode(&to_wire(&e)));
                return Err(e);
            }
        };
        let reply = match message::decode(&frame) {
            Ok(m) => server.handle(m),
            Err(e) => {
                let _ = message::write_frame(&mut writer, &message::encode(&to_wire(&e)));
                return Err(e);
            }
        };
        message::write_frame(&mut writer, &message::encode(&reply))?;
    }
}

/// Accepts connections until `shutdown` is set, one thread per connection.
/// Per-connection failures are logged and do not stop the listener.
pub fn serve(server: Arc<Server>, listener: TcpListener, shutdown: Arc<AtomicBool>) -> Result<()> {
    for stream in listener.incoming() {
        if shutdown.load(Ordering::SeqCst) {
            break;
        }
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let server = Arc::clone(&server);
        thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            if let Err(e) = serve_connection(&server, stream) {
                log::debug!("connection {peer:?} closed: {e}");
            }
        });
    }
    Ok(())
}

/// A server running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    thread: Option<JoinHandle<Result<()>>>,
    rebalancer: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn spawn(server: Arc<Server>, addr: impl ToSocketAddrs) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let thread = thread::spawn(move || serve(server, listener, flag));
        Ok(Self {
            addr,
            shutdown,
            thread: Some(thread),
            rebalancer: None,
        })
    }

    /// Also runs rebalance batches every `interval` on decoupled stores.
    pub fn with_rebalancer(mut self, server: Arc<Server>, interval: Duration, batch: usize) -> Self {
        let flag = Arc::clone(&self.shutdown);
        self.rebalancer = Some(thread::spawn(move || {
            while !flag.load(Ordering::SeqCst) {
                thread::sleep(interval);
                match server.rebalance_step(batch) {
                    Ok(_) | Err(Error::WrongMode { .. }) => {}
                    Err(e) => log::warn!("rebalance step failed: {e}"),
                }
            }
        }));
        self
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) -> Result<()> {
        self.stop()
    }

    fn stop(&mut self) -> Result<()> {
        self.shutdown.store(true, Ordering::SeqCst);
        // unblock accept()
        let _ = TcpStream::connect(self.addr);
        if let Some(r) = self.rebalancer.take() {
            let _ = r.join();
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .map_err(|_| Error::Protocol("server thread panicked".into()))?,
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}
