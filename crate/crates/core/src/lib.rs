pub mod chain;
pub mod error;
pub mod iot;
pub mod miner;
pub mod netsim;
pub mod params;
pub mod pow;
pub mod primitives;
pub mod scenario;
pub mod state;
pub mod tamper;
pub mod validation;
