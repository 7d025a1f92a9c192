//! Messages, their wire format, the router, and the per-agent communicator.

mod codec;
mod communicator;
mod handlers;
mod message;
mod router;
mod tcp;

pub use codec::{decode, decode_payload, encode, encode_payload, read_frame, write_frame, MAX_FRAME};
pub use communicator::{Communicator, SharedLink};
pub use handlers::{handle_ask_all, handle_ask_one, HandlerSet};
pub use message::{is_token, AclMessage, Content, Performative, TERM_LANGUAGE};
pub use router::{Envelope, Link, LocalLink, Presence, Router, ROUTER_NAME};
pub use tcp::{router_address, RouterServer, TcpLink, DEFAULT_ROUTER_ADDR, ROUTER_ENV};
