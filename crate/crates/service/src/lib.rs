//! Interactive guidance sessions: the trial engine, its JSON-lines socket
//! protocol and server, session logs, and a simulated operator that runs the
//! target-finding task by listening to its own audio.

pub mod log;
pub mod operator;
pub mod protocol;
pub mod server;
pub mod session;

pub use operator::{run_simulated_operator, OperatorConfig, OperatorSummary};
pub use server::{default_addr, Server, ServerConfig, ServerHandle, ADDR_ENV, DEFAULT_ADDR};
pub use session::{Outcome, Session, SessionConfig, SessionError, SessionOutput, TrialRecord, TrialSpec};
