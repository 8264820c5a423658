use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::probe::ProbePacket;
use crate::error::{Error, Result};
use crate::frame::{self, bits};
use crate::series::{SweepSample, SweepSeries};

const READ_TIMEOUT: Duration = Duration::from_millis(50);
const PUBLISH_EVERY: u64 = 1024;
const JITTER_GAIN: f64 = 1.0 / 16.0;

/// Receiver-side accounting for one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamReport {
    pub payload: u32,
    /// Inferred from the highest sequence number seen (streams start at 0).
    pub sent: u64,
    pub received: u64,
    /// Sender-clock span of the stream, seconds.
    pub duration: f64,
    pub goodput: f64,
    pub throughput: f64,
    pub loss_fraction: f64,
    pub jitter: f64,
    /// Ethernet flow control cannot be inspected from here; always false.
    pub flow_control_verified: bool,
}

impl StreamReport {
    pub fn empty(listen: Duration) -> Self {
        StreamReport {
            payload: 0,
            sent: 0,
            received: 0,
            duration: listen.as_secs_f64(),
            goodput: 0.0,
            throughput: 0.0,
            loss_fraction: 0.0,
            jitter: 0.0,
            flow_control_verified: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.received == 0
    }

    pub fn to_sample(&self) -> SweepSample {
        let per_second = |n: u64| if self.duration > 0.0 { n as f64 / self.duration } else { 0.0 };
        SweepSample {
            payload: self.payload,
            frame_size: self.payload + frame::TOTAL_OVERHEAD,
            offered_pps: per_second(self.sent),
            delivered_pps: per_second(self.received),
            goodput: self.goodput,
            throughput: self.throughput,
            loss_fraction: self.loss_fraction,
            jitter: self.jitter,
        }
    }
}

/// Collects non-empty reports into a series for the estimator.
pub fn reports_to_series(reports: &[StreamReport]) -> SweepSeries {
    reports.iter().filter(|r| !r.is_empty()).map(StreamReport::to_sample).collect()
}

#[derive(Debug, Clone)]
struct StreamTracker {
    payload: u32,
    received: u64,
    max_seq: u32,
    last_send_ns: u64,
    prev: Option<(f64, f64)>,
    jitter: f64,
}

impl StreamTracker {
    fn new(payload: u32) -> Self {
        StreamTracker {
            payload,
            received: 0,
            max_seq: 0,
            last_send_ns: 0,
            prev: None,
            jitter: 0.0,
        }
    }

    fn record(&mut self, probe: ProbePacket, arrival: f64) {
        self.received += 1;
        if probe.sequence >= self.max_seq {
            self.max_seq = probe.sequence;
            self.last_send_ns = probe.send_timestamp_ns;
        }
        let sent_at = probe.send_timestamp_ns as f64 * 1e-9;
        if let Some((prev_arrival, prev_sent)) = self.prev {
            let d = ((arrival - prev_arrival) - (sent_at - prev_sent)).abs();
            self.jitter += (d - self.jitter) * JITTER_GAIN;
        }
        self.prev = Some((arrival, sent_at));
    }

    fn report(&self) -> StreamReport {
        let sent = u64::from(self.max_seq) + 1;
        let received = self.received.min(sent);
        // Timestamps count from packet 0, so the last one covers max_seq
        // intervals; add one more for the last packet's own slot.
        let duration = if self.max_seq > 0 {
            self.last_send_ns as f64 * 1e-9 * sent as f64 / f64::from(self.max_seq)
        } else {
            0.0
        };
        let goodput = if duration > 0.0 {
            received as f64 * bits(self.payload) / duration
        } else {
            0.0
        };
        let throughput = frame::throughput_from_goodput(goodput, self.payload).unwrap_or(0.0);
        StreamReport {
            payload: self.payload,
            sent,
            received,
            duration,
            goodput,
            throughput,
            loss_fraction: (sent - received) as f64 / sent as f64,
            jitter: self.jitter,
            flow_control_verified: false,
        }
    }
}

/// Counters as last published by the receive loop.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReceiverSnapshot {
    pub datagrams: u64,
    pub ignored: u64,
    pub completed: Vec<StreamReport>,
    pub current: Option<StreamReport>,
}

/// UDP probe receiver. A new stream starts whenever the datagram size
/// changes or the sequence number restarts at 0, so one receiver can account
/// a whole sender-side sweep.
pub struct Receiver {
    socket: UdpSocket,
    snapshot: Arc<Mutex<ReceiverSnapshot>>,
}

impl Receiver {
    pub fn bind(listen: SocketAddr) -> Result<Self> {
        let socket = UdpSocket::bind(listen).map_err(Error::socket("bind"))?;
        socket
            .set_read_timeout(Some(READ_TIMEOUT))
            .map_err(Error::socket("set_read_timeout"))?;
        Ok(Receiver {
            socket,
            snapshot: Arc::default(),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        self.socket.local_addr().map_err(Error::socket("local_addr"))
    }

    /// Handle for reading progress from another thread.
    pub fn snapshot_handle(&self) -> Arc<Mutex<ReceiverSnapshot>> {
        Arc::clone(&self.snapshot)
    }

    pub fn run_for(&self, listen: Duration) -> Result<Vec<StreamReport>> {
        let deadline = Instant::now() + listen;
        self.run_while(|| Instant::now() < deadline)
    }

    /// Receives until `stop` is raised.
    pub fn run_until(&self, stop: &AtomicBool) -> Result<Vec<StreamReport>> {
        self.run_while(|| !stop.load(Ordering::Acquire))
    }

    fn run_while(&self, mut keep_going: impl FnMut() -> bool) -> Result<Vec<StreamReport>> {
        let start = Instant::now();
        let mut buf = vec![0u8; 65_536];
        let mut completed = Vec::new();
        let mut current: Option<StreamTracker> = None;
        let (mut datagrams, mut ignored) = (0u64, 0u64);

        while keep_going() {
            match self.socket.recv(&mut buf) {
                Ok(len) => {
                    let arrival = start.elapsed().as_secs_f64();
                    datagrams += 1;
                    let payload = len as u32;
                    let probe = match ProbePacket::decode(&buf[..len]) {
                        Some(p) if frame::total_frame_size(payload).is_ok() => p,
                        _ => {
                            ignored += 1;
                            continue;
                        }
                    };
                    let restart = current
                        .as_ref()
                        .is_some_and(|t| t.payload != payload || (probe.sequence == 0 && t.received > 0));
                    if restart {
                        completed.push(current.take().expect("checked above").report());
                    }
                    current
                        .get_or_insert_with(|| StreamTracker::new(payload))
                        .record(probe, arrival);
                    if datagrams % PUBLISH_EVERY == 0 {
                        self.publish(datagrams, ignored, &completed, current.as_ref());
                    }
                }
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    self.publish(datagrams, ignored, &completed, current.as_ref());
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::Socket { op: "recv", source: e }),
            }
        }
        if let Some(t) = current {
            completed.push(t.report());
        }
        self.publish(datagrams, ignored, &completed, None);
        Ok(completed)
    }

    fn publish(&self, datagrams: u64, ignored: u64, completed: &[StreamReport], current: Option<&StreamTracker>) {
        let mut snap = self.snapshot.lock().unwrap_or_else(|p| p.into_inner());
        snap.datagrams = datagrams;
        snap.ignored = ignored;
        if snap.completed.len() != completed.len() {
            snap.completed = completed.to_vec();
        }
        snap.current = current.map(StreamTracker::report);
    }
}

/// Listens for `listen` and reports the first stream seen, or an empty
/// report if nothing arrived.
pub fn receive_stream(addr: SocketAddr, listen: Duration) -> Result<StreamReport> {
    let reports = Receiver::bind(addr)?.run_for(listen)?;
    Ok(reports.into_iter().next().unwrap_or_else(|| StreamReport::empty(listen)))
}
