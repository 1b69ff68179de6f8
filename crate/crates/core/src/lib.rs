pub mod attacks;
pub mod cipher;
pub mod client;
pub mod coins;
pub mod domain;
pub mod error;
pub mod store;
pub mod transforms;
pub mod transport;

pub use cipher::{keygen, CellCipher, Ciphertext, SecretKey};
pub use client::Client;
pub use coins::CoinSource;
pub use domain::{Domain, RangeQuery, RangeResult, Segment};
pub use error::{Error, Result};
pub use store::{StoreMode, StoreState};
pub use transport::{Server, Session};
