use std::collections::VecDeque;
use std::sync::Arc;

use crossbeam_channel::{Receiver, Sender};
use parking_lot::Mutex;
use stormkit_logic::Term;

use super::codec::{decode, encode};
use super::handlers::HandlerSet;
use super::message::AclMessage;
use super::router::Link;
use crate::bus::EventKind;
use crate::conv::ConvInput;
use crate::error::{CoreError, Result};
use crate::kernel::AgentContext;
use crate::percept::Trigger;
use crate::sched::{Poll, Task};

pub type SharedLink = Arc<Mutex<Box<dyn Link>>>;

/// Moves an agent's messages between its outbox and the router. Each poll
/// flushes the outbox and then takes at most one inbound message.
pub struct Communicator {
    cx: Arc<AgentContext>,
    link: SharedLink,
    outbox: Receiver<AclMessage>,
    situations: Option<Sender<Trigger>>,
    conversations: Option<Sender<ConvInput>>,
    handlers: HandlerSet,
    /// Messages held back while the link is down.
    held: VecDeque<AclMessage>,
}

impl Communicator {
    pub fn new(cx: Arc<AgentContext>, link: SharedLink, outbox: Receiver<AclMessage>) -> Self {
        Communicator { cx, link, outbox, situations: None, conversations: None, handlers: HandlerSet::default(), held: VecDeque::new() }
    }

    pub fn with_handlers(mut self, handlers: HandlerSet) -> Self {
        self.handlers = handlers;
        self
    }

    pub fn feed_situations(&mut self, tx: Sender<Trigger>) {
        self.situations = Some(tx);
    }

    pub fn feed_conversations(&mut self, tx: Sender<ConvInput>) {
        self.conversations = Some(tx);
    }

    fn transmit(&self, m: &AclMessage) -> Result<()> {
        let env = encode(m)?;
        match self.link.lock().send(env) {
            // the router has already bounced a sorry back to us
            Ok(()) | Err(CoreError::UnknownReceiver(_)) => {}
            Err(e) => return Err(e),
        }
        self.cx.bus.emit(EventKind::MessageSent, m.to_term());
        Ok(())
    }

    fn flush(&mut self) -> bool {
        self.held.extend(self.outbox.try_iter());
        let mut moved = false;
        while let Some(m) = self.held.pop_front() {
            match self.transmit(&m) {
                Ok(()) => moved = true,
                Err(CoreError::RouterUnreachable(_)) => {
                    self.held.push_front(m);
                    break;
                }
                Err(e) => {
                    moved = true;
                    self.cx.trace.record(&self.cx.name, "SendFault", Term::atom(e.to_string()));
                }
            }
        }
        moved
    }

    fn deliver(&mut self, m: AclMessage) {
        let cx = &self.cx;
        cx.bus.emit(EventKind::MessageReceived, m.to_term());
        cx.dispatcher.announce(cx.base, "receiveMessage", &[m.to_term()], Term::void());
        if let Some(tx) = &self.situations {
            let _ = tx.send(Trigger::Message(m.clone()));
        }
        let reply = {
            let ms = cx.store.snapshot();
            let bridge = cx.bridge();
            self.handlers.respond(&m, &ms, &cx.engine, Some(&bridge))
        };
        if let Some(r) = reply {
            if let Err(e) = self.transmit(&r) {
                cx.trace.record(&cx.name, "SendFault", Term::atom(e.to_string()));
            }
        }
        if let Some(tx) = &self.conversations {
            let _ = tx.send(ConvInput::Message(m));
        }
    }

    /// Takes one inbound envelope off the link, if any.
    pub fn receive_one(&mut self) -> bool {
        let env = match self.link.lock().try_recv() {
            Ok(Some(env)) => env,
            Ok(None) => return false,
            Err(e) => {
                self.cx.trace.record(&self.cx.name, "RecvFault", Term::atom(e.to_string()));
                return false;
            }
        };
        match decode(&env) {
            Ok((m, _)) => self.deliver(m),
            Err(e) => self.cx.trace.record(&self.cx.name, "RecvFault", Term::atom(e.to_string())),
        }
        true
    }
}

impl Task for Communicator {
    fn label(&self) -> String {
        format!("{}/communicator", self.cx.name)
    }

    fn poll(&mut self) -> Poll {
        if !self.cx.is_alive() {
            return Poll::Done;
        }
        let sent = self.flush();
        let received = self.receive_one();
        if sent || received {
            Poll::Busy
        } else {
            Poll::Idle
        }
    }
}
