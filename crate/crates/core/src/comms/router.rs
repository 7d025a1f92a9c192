//! The central message router: name registry, routing, and store-and-forward
//! for registrants that are offline.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crossbeam_channel::{unbounded, Receiver, Sender, TryRecvError};
use parking_lot::Mutex;
use stormkit_logic::Term;

use super::codec::{decode, encode};
use super::message::{AclMessage, Performative};
use crate::error::{CoreError, Result};

/// Name the router signs its own messages with.
pub const ROUTER_NAME: &str = "router";

pub type Envelope = Vec<u8>;

enum Entry {
    Online(Sender<Envelope>),
    Offline,
}

#[derive(Default)]
struct State {
    registry: BTreeMap<String, Entry>,
    mailbox: BTreeMap<String, VecDeque<Envelope>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Presence {
    Online,
    Offline,
}

#[derive(Default)]
pub struct Router {
    state: Mutex<State>,
    routed: AtomicU64,
    bounced: AtomicU64,
}

impl fmt::Debug for Router {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.state.lock();
        f.debug_struct("Router")
            .field("registered", &s.registry.keys().collect::<Vec<_>>())
            .field("routed", &self.routed.load(Ordering::SeqCst))
            .finish()
    }
}

impl Router {
    pub fn new() -> Arc<Router> {
        Arc::new(Router::default())
    }

    /// Binds `name` to `conn` and flushes anything queued for it, in order.
    pub fn register(&self, name: &str, conn: Sender<Envelope>) -> Result<()> {
        let mut s = self.state.lock();
        if matches!(s.registry.get(name), Some(Entry::Online(_))) {
            return Err(CoreError::NameTaken(name.to_string()));
        }
        if let Some(queued) = s.mailbox.remove(name) {
            for env in queued {
                if conn.send(env).is_err() {
                    break;
                }
            }
        }
        s.registry.insert(name.to_string(), Entry::Online(conn));
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<Presence> {
        match self.state.lock().registry.get(name)? {
            Entry::Online(_) => Some(Presence::Online),
            Entry::Offline => Some(Presence::Offline),
        }
    }

    /// Marks `name` offline. Envelopes still sitting unread on `pending` go
    /// back to the front of its mailbox so nothing is lost or reordered.
    pub fn disconnect(&self, name: &str, pending: Option<&Receiver<Envelope>>) {
        let mut s = self.state.lock();
        if !s.registry.contains_key(name) {
            return;
        }
        s.registry.insert(name.to_string(), Entry::Offline);
        let mut unread: VecDeque<Envelope> = pending.map(|rx| rx.try_iter().collect()).unwrap_or_default();
        let mailbox = s.mailbox.entry(name.to_string()).or_default();
        unread.extend(mailbox.drain(..));
        *mailbox = unread;
    }

    pub fn requeue_front(&self, name: &str, env: Envelope) {
        self.state.lock().mailbox.entry(name.to_string()).or_default().push_front(env);
    }

    /// Forgets `name` entirely, dropping its mailbox.
    pub fn deregister(&self, name: &str) {
        let mut s = self.state.lock();
        s.registry.remove(name);
        s.mailbox.remove(name);
    }

    pub fn queued(&self, name: &str) -> usize {
        self.state.lock().mailbox.get(name).map_or(0, VecDeque::len)
    }

    /// Delivers or queues an envelope. An unknown receiver bounces a `sorry`
    /// back to the sender and reports `UnknownReceiver`.
    pub fn route(&self, env: Envelope) -> Result<()> {
        let (msg, _) = decode(&env)?;
        let mut s = self.state.lock();
        match s.registry.get(&msg.receiver) {
            Some(Entry::Online(tx)) => {
                if let Err(e) = tx.send(env) {
                    s.registry.insert(msg.receiver.clone(), Entry::Offline);
                    s.mailbox.entry(msg.receiver.clone()).or_default().push_back(e.into_inner());
                }
            }
            Some(Entry::Offline) => {
                s.mailbox.entry(msg.receiver.clone()).or_default().push_back(env);
            }
            None => {
                self.bounced.fetch_add(1, Ordering::SeqCst);
                let mut sorry = msg.reply(Performative::Sorry, Term::compound("unknown_receiver", vec![Term::atom(msg.receiver.as_str())]));
                sorry.sender = ROUTER_NAME.to_string();
                if msg.performative != Performative::Sorry {
                    if let (Ok(bytes), Some(Entry::Online(tx))) = (encode(&sorry), s.registry.get(&msg.sender)) {
                        let _ = tx.send(bytes);
                    }
                }
                return Err(CoreError::UnknownReceiver(msg.receiver));
            }
        }
        self.routed.fetch_add(1, Ordering::SeqCst);
        Ok(())
    }

    pub fn route_message(&self, m: &AclMessage) -> Result<()> {
        self.route(encode(m)?)
    }

    /// Envelopes accepted for delivery (immediate or queued).
    pub fn routed(&self) -> u64 {
        self.routed.load(Ordering::SeqCst)
    }

    pub fn bounced(&self) -> u64 {
        self.bounced.load(Ordering::SeqCst)
    }

    pub fn names(&self) -> Vec<String> {
        self.state.lock().registry.keys().cloned().collect()
    }
}

/// One endpoint's connection to the router.
pub trait Link: Send {
    fn name(&self) -> &str;
    fn send(&mut self, env: Envelope) -> Result<()>;
    fn try_recv(&mut self) -> Result<Option<Envelope>>;
    /// Goes offline; unread inbound envelopes return to the router's mailbox.
    fn close(&mut self);
}

/// In-process link.
pub struct LocalLink {
    name: String,
    router: Arc<Router>,
    rx: Receiver<Envelope>,
    closed: bool,
}

impl LocalLink {
    pub fn connect(router: &Arc<Router>, name: &str) -> Result<LocalLink> {
        let (tx, rx) = unbounded();
        router.register(name, tx)?;
        Ok(LocalLink { name: name.to_string(), router: Arc::clone(router), rx, closed: false })
    }

    pub fn pending(&self) -> usize {
        self.rx.len()
    }
}

impl Link for LocalLink {
    fn name(&self) -> &str {
        &self.name
    }

    fn send(&mut self, env: Envelope) -> Result<()> {
        if self.closed {
            return Err(CoreError::RouterUnreachable(format!("{} is offline", self.name)));
        }
        self.router.route(env)
    }

    fn try_recv(&mut self) -> Result<Option<Envelope>> {
        match self.rx.try_recv() {
            Ok(env) => Ok(Some(env)),
            Err(TryRecvError::Empty) => Ok(None),
            Err(TryRecvError::Disconnected) => Ok(None),
        }
    }

    fn close(&mut self) {
        if !self.closed {
            self.closed = true;
            self.router.disconnect(&self.name, Some(&self.rx));
        }
    }
}

impl Drop for LocalLink {
    fn drop(&mut self) {
        self.close();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stormkit_logic::Term;

    fn msg(from: &str, to: &str, n: i64) -> Envelope {
        encode(&AclMessage::new(Performative::Tell, from, to, Term::compound("n", vec![Term::int(n)]))).unwrap()
    }

    fn content(env: &Envelope) -> Term {
        decode(env).unwrap().0.content.to_term()
    }

    #[test]
    fn register_and_lookup() {
        let r = Router::new();
        let a = LocalLink::connect(&r, "a").unwrap();
        assert_eq!(r.lookup("a"), Some(Presence::Online));
        assert!(matches!(LocalLink::connect(&r, "a"), Err(CoreError::NameTaken(_))));
        drop(a);
        assert_eq!(r.lookup("a"), Some(Presence::Offline));
        assert!(LocalLink::connect(&r, "a").is_ok());
    }

    #[test]
    fn store_and_forward_in_order() {
        let r = Router::new();
        let mut a = LocalLink::connect(&r, "a").unwrap();
        let mut b = LocalLink::connect(&r, "b").unwrap();
        a.send(msg("a", "b", 0)).unwrap();
        b.close();
        for i in 1..=3 {
            a.send(msg("a", "b", i)).unwrap();
        }
        assert_eq!(r.queued("b"), 4);
        let mut b = LocalLink::connect(&r, "b").unwrap();
        let got: Vec<Term> = std::iter::from_fn(|| b.try_recv().unwrap()).map(|e| content(&e)).collect();
        let want: Vec<Term> = (0..=3).map(|i| Term::compound("n", vec![Term::int(i)])).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn unknown_receiver_bounces_sorry() {
        let r = Router::new();
        let mut a = LocalLink::connect(&r, "a").unwrap();
        assert!(matches!(a.send(msg("a", "ghost", 1)), Err(CoreError::UnknownReceiver(_))));
        let back = decode(&a.try_recv().unwrap().unwrap()).unwrap().0;
        assert_eq!(back.performative, Performative::Sorry);
        assert_eq!(back.sender, ROUTER_NAME);
        assert_eq!(r.routed(), 0);
    }
}
