//! UDP harness smoke tests over 127.0.0.1.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::Duration;

use linksat::harness::{
    self, loopback_sweep, receive_stream, reports_to_series, run_sweep, send_stream, Receiver, StreamReport,
};
use linksat::{fit, FitOptions, SweepSeries};

fn any_local() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

#[test]
fn paced_sender_hits_target_count_and_rate() {
    let receiver = Receiver::bind(any_local()).unwrap();
    let dest = receiver.local_addr().unwrap();
    let stop = AtomicBool::new(false);
    thread::scope(|s| {
        let rx = s.spawn(|| receiver.run_until(&stop));

        let report = send_stream(dest, 1450, 10e6, Duration::from_secs(1)).unwrap();
        let expected = 10e6 / (1450.0 * 8.0);
        assert!((report.sent as f64 - expected).abs() <= 1.0, "sent {}", report.sent);
        let rate_error = (report.send_goodput - 10e6).abs() / 10e6;
        assert!(rate_error < 0.02, "pacing off by {rate_error}");

        let report = send_stream(dest, 25, 10e6, Duration::from_millis(500)).unwrap();
        assert_eq!(report.sent, 25_000);

        thread::sleep(Duration::from_millis(100));
        stop.store(true, Ordering::Release);
        let streams = rx.join().unwrap().unwrap();
        assert_eq!(streams.len(), 2);
        let big = &streams[0];
        assert_eq!(big.payload, 1450);
        assert!(big.loss_fraction < 0.01, "loss {}", big.loss_fraction);
        // Sequence accounting: what was not received is exactly the gap total.
        assert_eq!(big.sent, 863);
        assert!(big.received <= big.sent);
        assert!((big.throughput / big.goodput - 1496.0 / 1450.0).abs() <= 1e-12);
    });
}

#[test]
fn receiver_without_sender_reports_empty_stream() {
    let report = receive_stream(any_local(), Duration::from_millis(200)).unwrap();
    assert!(report.is_empty());
    assert_eq!(report.received, 0);
    assert_eq!((report.goodput, report.throughput), (0.0, 0.0));
}

#[test]
fn unreachable_destination_is_reported_after_sending() {
    // Bind and drop to find a port nobody listens on.
    let port = std::net::UdpSocket::bind(any_local()).unwrap().local_addr().unwrap();
    let report = send_stream(port, 100, 1e6, Duration::from_millis(100)).unwrap();
    assert_eq!(report.sent, 125);
    assert!(report.unreachable);
}

#[test]
fn snapshot_is_visible_from_another_thread() {
    let receiver = Receiver::bind(any_local()).unwrap();
    let dest = receiver.local_addr().unwrap();
    let handle = receiver.snapshot_handle();
    let stop = AtomicBool::new(false);
    thread::scope(|s| {
        let rx = s.spawn(|| receiver.run_until(&stop));
        send_stream(dest, 200, 2e6, Duration::from_millis(300)).unwrap();
        thread::sleep(Duration::from_millis(150));
        let snap = handle.lock().unwrap().clone();
        assert!(snap.datagrams > 0);
        assert_eq!(snap.current.as_ref().map(|r| r.payload), Some(200));
        stop.store(true, Ordering::Release);
        rx.join().unwrap().unwrap();
    });
}

#[test]
fn sweep_step_counts() {
    let dest: SocketAddr = "127.0.0.1:9".parse().unwrap();
    let payloads: Vec<u32> = (1..=58).map(|i| 25 * i).collect();
    let steps = run_sweep(dest, &payloads, 1e6, Duration::from_millis(10), Duration::ZERO);
    assert_eq!(steps.len(), 58);
    assert!(steps.iter().all(|s| s.outcome.is_ok()));
    assert_eq!(harness::sender_series(&steps).len(), 58);

    let single = run_sweep(dest, &[100], 1e6, Duration::from_millis(10), Duration::ZERO);
    assert_eq!(single.len(), 1);

    // A bad step is recorded and the sweep carries on.
    let mixed = run_sweep(dest, &[5, 100], 1e6, Duration::from_millis(10), Duration::ZERO);
    assert!(mixed[0].outcome.is_err());
    assert!(mixed[1].outcome.is_ok());
}

#[test]
fn loopback_reports_round_trip_through_csv_and_fit() {
    let run = loopback_sweep(
        any_local(),
        &[100, 400, 800, 1200, 1450],
        4e6,
        Duration::from_millis(300),
        Duration::from_millis(50),
    )
    .unwrap();
    assert_eq!(run.reports.len(), 5);
    let series = reports_to_series(&run.reports);

    let back = SweepSeries::read_csv(series.to_csv_string().as_bytes()).unwrap();
    for (report, sample) in run.reports.iter().zip(back.iter()) {
        assert_eq!(sample.payload, report.payload);
        assert_eq!(sample.goodput, report.goodput);
        assert_eq!(sample.throughput, report.throughput);
        assert_eq!(sample.loss_fraction, report.loss_fraction);
        assert_eq!(sample.jitter, report.jitter);
        let eq2 = f64::from(sample.frame_size) * 8.0 * sample.delivered_pps;
        assert!((sample.throughput - eq2).abs() <= 1e-9 * eq2);
    }
    fit(&back, FitOptions::default()).unwrap();
}

#[test]
fn empty_report_drops_out_of_series() {
    let series = reports_to_series(&[StreamReport::empty(Duration::from_secs(1))]);
    assert!(series.is_empty());
}
