//! Data-oblivious consistency-based feature selection over encrypted bits.
//!
//! A dataset owner encrypts a binary dataset bit by bit; an analyst holding
//! only evaluation keys runs [`pcwc::naive_select`] or
//! [`pcwc::improved_select`] and returns an encrypted keep-mask. Every
//! operation is a boolean gate on an [`obool::Engine`], so the executed
//! circuit depends only on the padded size and the feature count.

pub mod bench;
pub mod dataset;
pub mod exec;
pub mod fixtures;
pub mod obool;
pub mod oracle;
pub mod pcwc;
pub mod protocol;
pub mod sortnet;
