//! Framed-stream transport for the router. A client's first frame must be a
//! `register` message whose sender is the name to bind; the server answers
//! with `tell registered` or `sorry name_taken`.

use std::io::{BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, TryRecvError};
use stormkit_logic::Term;

use super::codec::{decode, encode, read_frame, write_frame};
use super::message::{AclMessage, Performative};
use super::router::{Envelope, Link, Router, ROUTER_NAME};
use crate::error::{CoreError, Result};

pub const ROUTER_ENV: &str = "STORMKIT_ROUTER";
pub const DEFAULT_ROUTER_ADDR: &str = "127.0.0.1:7040";

/// Router address from the environment, or the default.
pub fn router_address() -> String {
    std::env::var(ROUTER_ENV).unwrap_or_else(|_| DEFAULT_ROUTER_ADDR.to_string())
}

pub struct RouterServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl RouterServer {
    pub fn bind(addr: impl ToSocketAddrs, router: Arc<Router>) -> Result<RouterServer> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let accept = thread::Builder::new().name("router-accept".into()).spawn(move || {
            while !flag.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let router = Arc::clone(&router);
                        let _ = thread::Builder::new().name("router-conn".into()).spawn(move || serve(stream, router));
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        thread::sleep(Duration::from_millis(5));
                    }
                    Err(e) => {
                        tracing::warn!("accept failed: {e}");
                        thread::sleep(Duration::from_millis(50));
                    }
                }
            }
        })?;
        Ok(RouterServer { addr, stop, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for RouterServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn ack(to: &str, performative: Performative, content: &str) -> Envelope {
    encode(&AclMessage::new(performative, ROUTER_NAME, to, Term::atom(content))).expect("router ack encodes")
}

fn serve(stream: TcpStream, router: Arc<Router>) {
    let _ = stream.set_nodelay(true);
    let Ok(write_half) = stream.try_clone() else { return };
    let mut reader = BufReader::new(stream);
    let mut writer = BufWriter::new(write_half);
    let name = match read_frame(&mut reader).ok().flatten().and_then(|f| decode(&f).ok()) {
        Some((m, _)) if m.performative == Performative::Register => m.sender,
        _ => return,
    };
    let (tx, rx) = unbounded::<Envelope>();
    if let Err(e) = router.register(&name, tx) {
        let _ = write_frame(&mut writer, &ack(&name, Performative::Sorry, "name_taken"));
        tracing::debug!("refused {name}: {e}");
        return;
    }
    if write_frame(&mut writer, &ack(&name, Performative::Tell, "registered")).is_err() {
        router.disconnect(&name, Some(&rx));
        return;
    }
    let done = Arc::new(AtomicBool::new(false));
    let writer_done = Arc::clone(&done);
    let out_rx = rx.clone();
    let pump = thread::spawn(move || {
        // forward routed envelopes to the socket until the reader side ends
        while !writer_done.load(Ordering::SeqCst) {
            match out_rx.recv_timeout(Duration::from_millis(20)) {
                Ok(env) => {
                    if write_frame(&mut writer, &env).is_err() {
                        return Some(env);
                    }
                }
                Err(crossbeam_channel::RecvTimeoutError::Timeout) => {}
                Err(crossbeam_channel::RecvTimeoutError::Disconnected) => return None,
            }
        }
        None
    });
    while let Ok(Some(frame)) = read_frame(&mut reader) {
        match decode(&frame) {
            Ok((m, _)) if m.performative == Performative::Unregister => break,
            Ok(_) => {
                if let Err(e) = router.route(frame) {
                    tracing::debug!("route from {name}: {e}");
                }
            }
            Err(e) => tracing::debug!("bad frame from {name}: {e}"),
        }
    }
    done.store(true, Ordering::SeqCst);
    let unsent = pump.join().ok().flatten();
    router.disconnect(&name, Some(&rx));
    if let Some(env) = unsent {
        // the one envelope whose write failed goes back first
        router.requeue_front(&name, env);
    }
    let _ = reader.get_ref().shutdown(Shutdown::Both);
}

/// Client end of a stream connection.
pub struct TcpLink {
    name: String,
    stream: TcpStream,
    writer: BufWriter<TcpStream>,
    inbound: Receiver<Envelope>,
    closed: bool,
}

impl TcpLink {
    pub fn connect(addr: impl ToSocketAddrs, name: &str, timeout: Duration) -> Result<TcpLink> {
        let addr = addr
            .to_socket_addrs()
            .map_err(|e| CoreError::RouterUnreachable(e.to_string()))?
            .next()
            .ok_or_else(|| CoreError::RouterUnreachable("no address".into()))?;
        let stream = TcpStream::connect_timeout(&addr, timeout).map_err(|e| CoreError::RouterUnreachable(e.to_string()))?;
        stream.set_nodelay(true)?;
        let mut writer = BufWriter::new(stream.try_clone()?);
        let hello = AclMessage::new(Performative::Register, name, ROUTER_NAME, Term::atom(name));
        write_frame(&mut writer, &encode(&hello)?).map_err(|e| CoreError::RouterUnreachable(e.to_string()))?;
        let mut reader = BufReader::new(stream.try_clone()?);
        reader.get_ref().set_read_timeout(Some(timeout))?;
        let reply = read_frame(&mut reader)
            .map_err(|e| CoreError::RouterUnreachable(e.to_string()))?
            .ok_or_else(|| CoreError::RouterUnreachable("closed during registration".into()))?;
        let (reply, _) = decode(&reply)?;
        if reply.performative != Performative::Tell {
            return Err(CoreError::NameTaken(name.to_string()));
        }
        reader.get_ref().set_read_timeout(None)?;
        let (tx, inbound) = unbounded();
        thread::Builder::new().name(format!("link-{name}")).spawn(move || {
            while let Ok(Some(frame)) = read_frame(&mut reader) {
                if tx.send(frame).is_err() {
                    break;
                }
            }
        })?;
        Ok(TcpLink { name: name.to_string(), stream, writer, inbound, closed: false })
    }

    /// Waits up to `timeout` for the next inbound envelope.
    pub fn recv_timeout(&mut self, timeout: Duration) -> Option<Envelope> {
        self.inbound.recv_timeout(timeout).ok()
    }
}

impl Link for TcpLink {
    fn name(&self) -> &str {
        &self.name
    }

    fn send(&mut self, env: Envelope) -> Result<()> {
        write_frame(&mut self.writer, &env).map_err(|e| CoreError::RouterUnreachable(e.to_string()))
    }

    fn try_recv(&mut self) -> Result<Option<Envelope>> {
        match self.inbound.try_recv() {
            Ok(env) => Ok(Some(env)),
            Err(TryRecvError::Empty | TryRecvError::Disconnected) => Ok(None),
        }
    }

    fn close(&mut self) {
        if self.closed {
            return;
        }
        self.closed = true;
        let bye = AclMessage::new(Performative::Unregister, &self.name, ROUTER_NAME, Term::atom(self.name.as_str()));
        if let Ok(frame) = encode(&bye) {
            let _ = write_frame(&mut self.writer, &frame);
        }
        let _ = self.stream.shutdown(Shutdown::Write);
    }
}

impl Drop for TcpLink {
    fn drop(&mut self) {
        self.close();
    }
}
