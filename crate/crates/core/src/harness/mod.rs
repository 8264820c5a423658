//! Real-network measurement: a paced UDP probe sender and a receiver that
//! accounts loss, goodput, on-wire throughput and jitter per stream.
//!
//! Sender and receiver run as separate processes (or threads) with no control
//! channel between them. Ethernet flow control must be disabled by the
//! operator on both NICs; the harness cannot check it.

mod probe;
mod receiver;
mod sender;

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::Duration;

pub use probe::{ProbePacket, PROBE_HEADER};
pub use receiver::{receive_stream, reports_to_series, Receiver, ReceiverSnapshot, StreamReport};
pub use sender::{
    run_sweep, send_stream, sender_series, validate_payload, SendReport, SweepStep, DEFAULT_QUIET_GAP,
};

use crate::error::{Error, Result};

/// Receiver-side result of a sweep run entirely on this host.
#[derive(Debug)]
pub struct LoopbackSweep {
    pub steps: Vec<SweepStep>,
    pub reports: Vec<StreamReport>,
}

/// Runs a receiver thread on `listen` and a sender sweep against it.
pub fn loopback_sweep(
    listen: SocketAddr,
    payloads: &[u32],
    target_goodput: f64,
    per_step: Duration,
    quiet_gap: Duration,
) -> Result<LoopbackSweep> {
    let receiver = Receiver::bind(listen)?;
    let dest = receiver.local_addr()?;
    let stop = AtomicBool::new(false);
    thread::scope(|scope| {
        let rx = scope.spawn(|| receiver.run_until(&stop));
        let steps = run_sweep(dest, payloads, target_goodput, per_step, quiet_gap);
        // Let in-flight datagrams land before stopping.
        thread::sleep(quiet_gap.max(Duration::from_millis(100)));
        stop.store(true, Ordering::Release);
        let reports = rx
            .join()
            .map_err(|_| Error::Io(std::io::Error::other("receiver thread panicked")))??;
        Ok(LoopbackSweep { steps, reports })
    })
}
