//! Wire protocol between input parties and the function party.

pub mod comm;
pub mod crypto;
pub mod envelope;
pub mod frame;
pub mod registry;
pub mod session;
pub mod wire;

pub use comm::estimate_comm_time;
pub use crypto::{CryptoSuite, DalekSuite, FakeSuite, PublicKeys, SecretKeys};
pub use envelope::{open_seed, seal_seed, SeedEnvelope};
pub use frame::{Frame, MsgType};
pub use registry::{elect_leader, Endpoint, KeyFile, PartyRegistry, RegistryEntry};
pub use session::{
    chunk_and_send, run_input_party, FunctionOutcome, FunctionParty, FunctionPartyConfig, InputOutcome, InputPartyConfig,
};
pub use wire::{decode_matrix, encode_matrix};
