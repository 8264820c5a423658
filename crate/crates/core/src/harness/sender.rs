use std::io;
use std::net::{Ipv4Addr, Ipv6Addr, SocketAddr, UdpSocket};
use std::thread;
use std::time::{Duration, Instant};

use super::probe::{ProbePacket, PROBE_HEADER};
use crate::error::{Error, Result};
use crate::frame::{self, bits};
use crate::series::{SweepSample, SweepSeries};

/// Sleep when the next deadline is further away than this; spin otherwise.
const SPIN_WINDOW: Duration = Duration::from_micros(500);
pub const DEFAULT_QUIET_GAP: Duration = Duration::from_millis(250);

/// What the sending side knows about a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SendReport {
    pub payload: u32,
    pub sent: u64,
    /// Time from the first to just after the last transmission.
    pub duration: f64,
    pub send_pps: f64,
    pub send_goodput: f64,
    /// Datagrams rejected by the local stack (e.g. ICMP port unreachable
    /// reported back on loopback).
    pub send_errors: u64,
    pub unreachable: bool,
}

impl SendReport {
    pub fn to_sample(&self) -> SweepSample {
        SweepSample::from_rates(self.payload, self.send_pps, self.send_pps, 0.0, 0.0)
    }
}

pub fn validate_payload(payload: u32) -> Result<()> {
    if (payload as usize) < PROBE_HEADER {
        return Err(Error::invalid(
            "payload",
            format!("{payload} bytes is below the {PROBE_HEADER}-byte probe header"),
        ));
    }
    frame::total_frame_size(payload).map(|_| ())
}

fn bind_for(dest: SocketAddr) -> Result<UdpSocket> {
    let local: SocketAddr = match dest {
        SocketAddr::V4(_) => (Ipv4Addr::UNSPECIFIED, 0).into(),
        SocketAddr::V6(_) => (Ipv6Addr::UNSPECIFIED, 0).into(),
    };
    let socket = UdpSocket::bind(local).map_err(Error::socket("bind"))?;
    socket.connect(dest).map_err(Error::socket("connect"))?;
    Ok(socket)
}

fn wait_until(deadline: Instant) {
    loop {
        let now = Instant::now();
        if now >= deadline {
            return;
        }
        let left = deadline - now;
        if left > SPIN_WINDOW {
            thread::sleep(left - SPIN_WINDOW);
        } else {
            std::hint::spin_loop();
        }
    }
}

/// Emits a paced stream of probe datagrams for `duration`.
pub fn send_stream(dest: SocketAddr, payload: u32, target_goodput: f64, duration: Duration) -> Result<SendReport> {
    validate_payload(payload)?;
    if !(target_goodput > 0.0 && target_goodput.is_finite()) {
        return Err(Error::invalid("target_goodput", "must be positive"));
    }
    if duration.is_zero() {
        return Err(Error::invalid("duration", "must be positive"));
    }
    let socket = bind_for(dest)?;
    let interval = bits(payload) / target_goodput;
    let total = (duration.as_secs_f64() / interval).ceil() as u64;
    let mut buf = vec![0u8; payload as usize];
    let mut send_errors = 0u64;
    let mut unreachable = false;

    let start = Instant::now();
    for k in 0..total {
        wait_until(start + Duration::from_secs_f64(k as f64 * interval));
        let sent_at = start.elapsed().as_nanos() as u64;
        ProbePacket {
            sequence: k as u32,
            send_timestamp_ns: sent_at,
        }
        .encode_into(&mut buf)?;
        match socket.send(&buf) {
            Ok(_) => {}
            Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => {
                unreachable = true;
                send_errors += 1;
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock || e.raw_os_error() == Some(105) => {
                // ENOBUFS: the local queue is full; the datagram is lost.
                send_errors += 1;
            }
            Err(e) => return Err(Error::Socket { op: "send", source: e }),
        }
    }
    // Stretch to a whole number of intervals so the rate reflects pacing.
    let elapsed = start.elapsed().as_secs_f64().max(total as f64 * interval);
    let send_pps = total as f64 / elapsed;
    Ok(SendReport {
        payload,
        sent: total,
        duration: elapsed,
        send_pps,
        send_goodput: send_pps * bits(payload),
        send_errors,
        unreachable,
    })
}

#[derive(Debug)]
pub struct SweepStep {
    pub payload: u32,
    pub outcome: Result<SendReport>,
}

/// Sender side of a payload sweep. Failed steps are kept and the sweep
/// carries on.
pub fn run_sweep(
    dest: SocketAddr,
    payloads: &[u32],
    target_goodput: f64,
    per_step: Duration,
    quiet_gap: Duration,
) -> Vec<SweepStep> {
    let mut steps = Vec::with_capacity(payloads.len());
    for (i, &payload) in payloads.iter().enumerate() {
        if i > 0 {
            thread::sleep(quiet_gap);
        }
        steps.push(SweepStep {
            payload,
            outcome: send_stream(dest, payload, target_goodput, per_step),
        });
    }
    steps
}

/// Successful steps as a sender-side series (no loss information).
pub fn sender_series(steps: &[SweepStep]) -> SweepSeries {
    steps
        .iter()
        .filter_map(|s| s.outcome.as_ref().ok().map(SendReport::to_sample))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_bounds() {
        assert!(validate_payload(11).is_err());
        assert!(validate_payload(12).is_ok());
        assert!(validate_payload(1472).is_ok());
        assert!(matches!(validate_payload(1473), Err(Error::WouldFragment { .. })));
    }

    #[test]
    fn rejects_bad_arguments() {
        let dest: SocketAddr = "127.0.0.1:9".parse().unwrap();
        assert!(send_stream(dest, 11, 1e6, Duration::from_millis(10)).is_err());
        assert!(send_stream(dest, 100, 0.0, Duration::from_millis(10)).is_err());
        assert!(send_stream(dest, 100, 1e6, Duration::ZERO).is_err());
    }
}
