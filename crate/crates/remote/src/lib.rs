//! The JSON inference protocol over HTTP: a blocking [`RemoteBackend`]
//! client and an axum [`router`] that exposes any [`Backend`] as a model
//! server.
//!
//! [`Backend`]: text2seg_core::Backend

mod client;
mod server;

pub use client::{RemoteBackend, DEFAULT_TIMEOUT, MAX_IN_FLIGHT};
pub use server::{router, serve, ApiError};
