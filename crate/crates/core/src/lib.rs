//! Encrypted image steganography: a block-scrambling cipher in front of a
//! convolutional hide/reveal network, trained from scratch on the CPU.
//!
//! The sender encrypts the secret with a [`cipher::PermutationKey`], the
//! encoder hides it in a cover image, the decoder reveals the scrambled
//! secret from the container and the receiver decrypts it.

pub mod cipher;
pub mod cli;
pub mod error;
pub mod imaging;
pub mod net;
pub mod optim;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
