//! Virtual-time single-link simulator with a per-packet processing ceiling.
//!
//! A source emits equally sized UDP datagrams at a fixed interval chosen so
//! that the payload bits hit `offered_goodput`. Each packet then occupies the
//! NIC for `max(τ, frame_bits / B)` seconds (or the sum, with
//! [`ServiceModel::Serial`]). Packets that find `buffer_capacity` packets
//! already in the NIC are dropped; there is no backpressure to the source.
//!
//! Arrivals stop at `duration`. Whatever is still buffered then drains, so
//! every offered packet is either delivered or dropped, and rates are taken
//! over `max(duration, last departure)`.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{self, bits};
use crate::series::{SweepSample, SweepSeries};

/// Smallest payload that can carry the probe header; sweeps start here.
pub const MIN_SWEEP_PAYLOAD: u32 = 12;
const JITTER_GAIN: f64 = 1.0 / 16.0;

/// How per-packet processing combines with wire serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ServiceModel {
    /// Processing of one packet overlaps transmission of the previous one.
    #[default]
    Overlap,
    /// Processing and transmission happen back to back.
    Serial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Link bandwidth, bits/s.
    pub bandwidth: f64,
    /// Per-packet NIC processing time τ, seconds.
    pub per_packet_service: f64,
    /// UDP payload, bytes.
    pub payload: u32,
    /// Target payload rate of the source, bits/s.
    pub offered_goodput: f64,
    /// Simulated seconds of emission.
    pub duration: f64,
    /// Packets the NIC can hold, including the one in service.
    pub buffer_capacity: usize,
    /// Half-width of the uniform multiplicative jitter on τ, in `[0, 0.1]`.
    pub noise_amplitude: f64,
    pub seed: u64,
    pub service_model: ServiceModel,
    /// Fractional processing-rate gain for the smallest frames; 0 disables
    /// it. The gain falls linearly to zero at the critical frame size `B τ / 8`.
    pub small_packet_speedup: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            bandwidth: 100e6,
            per_packet_service: 40e-6,
            payload: 1450,
            offered_goodput: 100e6,
            duration: 10.0,
            buffer_capacity: 128,
            noise_amplitude: 0.0,
            seed: 0,
            service_model: ServiceModel::Overlap,
            small_packet_speedup: 0.0,
        }
    }
}

impl SimConfig {
    pub fn with_payload(&self, payload: u32) -> Self {
        SimConfig {
            payload,
            ..self.clone()
        }
    }

    /// Frame size at which processing time equals serialization time.
    pub fn critical_frame_size(&self) -> f64 {
        self.bandwidth * self.per_packet_service / 8.0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be positive and finite")))
            }
        };
        positive("bandwidth", self.bandwidth)?;
        positive("per_packet_service", self.per_packet_service)?;
        positive("offered_goodput", self.offered_goodput)?;
        positive("duration", self.duration)?;
        frame::total_frame_size(self.payload)?;
        if self.buffer_capacity == 0 {
            return Err(Error::invalid("buffer_capacity", "must hold at least one packet"));
        }
        if !(0.0..=0.1).contains(&self.noise_amplitude) {
            return Err(Error::invalid("noise_amplitude", "must lie in [0, 0.1]"));
        }
        if !(self.small_packet_speedup >= 0.0 && self.small_packet_speedup.is_finite()) {
            return Err(Error::invalid("small_packet_speedup", "must be non-negative"));
        }
        Ok(())
    }

    fn base_processing_time(&self, frame_size: u32) -> f64 {
        let shortfall = (1.0 - f64::from(frame_size) / self.critical_frame_size()).max(0.0);
        self.per_packet_service / (1.0 + self.small_packet_speedup * shortfall)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub payload: u32,
    pub frame_size: u32,
    pub offered_packets: u64,
    pub delivered_packets: u64,
    pub dropped_packets: u64,
    pub offered_pps: f64,
    pub delivered_pps: f64,
    pub goodput: f64,
    pub throughput: f64,
    pub loss_fraction: f64,
    /// Smoothed deviation of interdeparture from interarrival spacing, seconds.
    pub jitter: f64,
}

impl SimResult {
    pub fn to_sample(&self) -> SweepSample {
        SweepSample {
            payload: self.payload,
            frame_size: self.frame_size,
            offered_pps: self.offered_pps,
            delivered_pps: self.delivered_pps,
            goodput: self.goodput,
            throughput: self.throughput,
            loss_fraction: self.loss_fraction,
            jitter: self.jitter,
        }
    }
}

pub fn simulate(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let frame_size = config.payload + frame::TOTAL_OVERHEAD;
    let serialization = bits(frame_size) / config.bandwidth;
    let processing = config.base_processing_time(frame_size);
    let interval = bits(config.payload) / config.offered_goodput;
    let offered = (config.duration / interval).ceil() as u64;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut in_nic: VecDeque<f64> = VecDeque::with_capacity(config.buffer_capacity);
    let mut last_departure = 0.0f64;
    let mut delivered = 0u64;
    let mut prev: Option<(f64, f64)> = None;
    let mut jitter = 0.0f64;

    for k in 0..offered {
        let arrival = k as f64 * interval;
        while in_nic.front().is_some_and(|&d| d <= arrival) {
            in_nic.pop_front();
        }
        if in_nic.len() >= config.buffer_capacity {
            continue;
        }
        let tau = if config.noise_amplitude > 0.0 {
            processing * (1.0 + config.noise_amplitude * rng.random_range(-1.0..=1.0))
        } else {
            processing
        };
        let service = match config.service_model {
            ServiceModel::Overlap => tau.max(serialization),
            ServiceModel::Serial => tau + serialization,
        };
        let departure = arrival.max(last_departure) + service;
        in_nic.push_back(departure);
        last_departure = departure;
        delivered += 1;

        if let Some((prev_arrival, prev_departure)) = prev {
            let d = ((departure - prev_departure) - (arrival - prev_arrival)).abs();
            jitter += (d - jitter) * JITTER_GAIN;
        }
        prev = Some((arrival, departure));
    }

    let dropped = offered - delivered;
    let elapsed = config.duration.max(last_departure);
    let delivered_pps = delivered as f64 / elapsed;
    Ok(SimResult {
        payload: config.payload,
        frame_size,
        offered_packets: offered,
        delivered_packets: delivered,
        dropped_packets: dropped,
        offered_pps: offered as f64 / config.duration,
        delivered_pps,
        goodput: bits(config.payload) * delivered_pps,
        throughput: bits(frame_size) * delivered_pps,
        loss_fraction: if offered == 0 { 0.0 } else { dropped as f64 / offered as f64 },
        jitter,
    })
}

/// Seed for one payload of a sweep; independent of evaluation order.
pub fn payload_seed(base: u64, payload: u32) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ u64::from(payload).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Payloads `min, min + step, ..., <= max`.
pub fn sweep_payloads(payload_min: u32, payload_max: u32, step: u32) -> Result<Vec<u32>> {
    if payload_min < MIN_SWEEP_PAYLOAD {
        return Err(Error::invalid(
            "payload_min",
            format!("{payload_min} is below the {MIN_SWEEP_PAYLOAD}-byte floor"),
        ));
    }
    if payload_max > frame::fragmentation_threshold() {
        return Err(Error::WouldFragment {
            payload: payload_max,
            limit: frame::fragmentation_threshold(),
        });
    }
    if step == 0 {
        return Err(Error::invalid("step", "must be positive"));
    }
    if payload_min > payload_max {
        return Err(Error::invalid("payload_min", "must not exceed payload_max"));
    }
    Ok((payload_min..=payload_max).step_by(step as usize).collect())
}

/// Runs one simulation per payload (in parallel) and collects the results.
pub fn sweep(base: &SimConfig, payload_min: u32, payload_max: u32, step: u32) -> Result<SweepSeries> {
    let payloads = sweep_payloads(payload_min, payload_max, step)?;
    let samples = payloads
        .par_iter()
        .map(|&p| {
            let cfg = SimConfig {
                payload: p,
                seed: payload_seed(base.seed, p),
                ..base.clone()
            };
            simulate(&cfg).map(|r| r.to_sample())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepSeries::new(samples))
}
