//! Throughput decomposition and the piecewise saturation law.
//!
//! Packet sizes here are total on-wire sizes in bytes (payload plus the 46
//! bytes of framing) unless a caller deliberately works in payload terms.
//! Rates are bits per second. The bytes-to-bits factor of 8 appears only in
//! [`throughput_of`] and [`critical_flow`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameterization of the two-regime throughput law of a single link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    /// Rated link bandwidth, bits/s.
    pub bandwidth: f64,
    /// Plateau throughput actually achieved in free flow, bits/s.
    pub t_max: f64,
    /// Critical packet size, bytes.
    pub p_c: f64,
}

impl LinkModel {
    pub fn new(bandwidth: f64, t_max: f64, p_c: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid("bandwidth", "must be positive and finite"));
        }
        if !(t_max > 0.0 && t_max <= bandwidth) {
            return Err(Error::invalid("t_max", format!("{t_max} not in (0, {bandwidth}]")));
        }
        if !(p_c > 0.0 && p_c.is_finite()) {
            return Err(Error::invalid("p_c", "must be positive and finite"));
        }
        Ok(LinkModel { bandwidth, t_max, p_c })
    }

    /// An ideal link whose plateau is its full bandwidth.
    pub fn ideal(bandwidth: f64, p_c: f64) -> Result<Self> {
        Self::new(bandwidth, bandwidth, p_c)
    }
}

/// One (size, rate, throughput) observation with `T = 8 p λ` built in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficPoint {
    packet_size: f64,
    flow_rate: f64,
    throughput: f64,
}

impl TrafficPoint {
    pub fn new(packet_size: f64, flow_rate: f64) -> Self {
        TrafficPoint {
            packet_size,
            flow_rate,
            throughput: throughput_of(packet_size, flow_rate),
        }
    }

    pub fn packet_size(&self) -> f64 {
        self.packet_size
    }

    pub fn flow_rate(&self) -> f64 {
        self.flow_rate
    }

    pub fn throughput(&self) -> f64 {
        self.throughput
    }
}

/// `T = 8 p λ` for packets of `packet_size` bytes at `flow_rate` packets/s.
#[inline]
pub fn throughput_of(packet_size: f64, flow_rate: f64) -> f64 {
    packet_size * 8.0 * flow_rate
}

/// Maximum packet rate of the link, `λ_c = T_max / p_c` (p_c in bits).
pub fn critical_flow(model: &LinkModel) -> f64 {
    model.t_max / (model.p_c * 8.0)
}

/// Saturated-regime throughput `(p / p_c) T_max`, defined for `0 < p <= p_c`.
pub fn saturated_throughput(model: &LinkModel, packet_size: f64) -> Result<f64> {
    if packet_size.is_nan() || packet_size <= 0.0 {
        return Err(Error::invalid("packet_size", "must be positive"));
    }
    if packet_size > model.p_c {
        return Err(Error::OutsideSaturatedRegime {
            size: packet_size,
            p_c: model.p_c,
        });
    }
    Ok(packet_size / model.p_c * model.t_max)
}

/// Both regimes together: `min(T_max, (p / p_c) T_max)`.
pub fn model_throughput(model: &LinkModel, packet_size: f64) -> f64 {
    if packet_size >= model.p_c {
        model.t_max
    } else {
        packet_size / model.p_c * model.t_max
    }
}

/// Slope `dp/dλ = -p/λ` of the constant-throughput tradeoff curve.
pub fn tradeoff_slope(packet_size: f64, flow_rate: f64) -> Result<f64> {
    if flow_rate == 0.0 || !flow_rate.is_finite() {
        return Err(Error::invalid("flow_rate", "must be non-zero and finite"));
    }
    Ok(-packet_size / flow_rate)
}
