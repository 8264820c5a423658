//! Ethernet/IPv4/UDP encapsulation arithmetic.
//!
//! A UDP payload of `n` bytes travels as a frame of `n + 46` bytes: 8 bytes of
//! UDP header, 20 of IPv4 header and 18 of Ethernet header plus trailing CRC.
//! The Ethernet frame payload (everything inside the 18 Ethernet bytes) is
//! capped at 1500 bytes. Minimum-frame padding is not modelled; the smallest
//! frame this toolkit deals with (71 bytes) is above the 64-byte floor anyway.

use crate::error::{Error, Result};

pub const UDP_HEADER: u32 = 8;
pub const IP_HEADER: u32 = 20;
/// Ethernet header (14) plus frame check sequence (4).
pub const ETH_OVERHEAD: u32 = 18;
pub const MAX_FRAME_PAYLOAD: u32 = 1500;
pub const MAX_FRAME: u32 = MAX_FRAME_PAYLOAD + ETH_OVERHEAD;

/// Bytes added to a UDP payload on the wire when it is not fragmented.
pub const TOTAL_OVERHEAD: u32 = UDP_HEADER + IP_HEADER + ETH_OVERHEAD;

/// Encapsulation constants for one frame layout.
///
/// Only the standard Ethernet II / IPv4 / UDP layout exists today; the struct
/// keeps the numbers together so callers can print or serialize them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub udp_header: u32,
    pub ip_header: u32,
    pub eth_overhead: u32,
    pub max_frame_payload: u32,
    pub max_frame: u32,
}

impl FrameLayout {
    pub const STANDARD: FrameLayout = FrameLayout {
        udp_header: UDP_HEADER,
        ip_header: IP_HEADER,
        eth_overhead: ETH_OVERHEAD,
        max_frame_payload: MAX_FRAME_PAYLOAD,
        max_frame: MAX_FRAME,
    };

    pub const fn total_overhead(&self) -> u32 {
        self.udp_header + self.ip_header + self.eth_overhead
    }
}

impl Default for FrameLayout {
    fn default() -> Self {
        Self::STANDARD
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentationResult {
    pub frame_payload_sizes: Vec<u32>,
    pub fragmented: bool,
}

/// Largest UDP payload that fits in one frame: 1500 - 28 = 1472.
pub const fn fragmentation_threshold() -> u32 {
    MAX_FRAME_PAYLOAD - UDP_HEADER - IP_HEADER
}

fn check_unfragmented(payload: u32) -> Result<()> {
    if payload == 0 {
        return Err(Error::ZeroPayload);
    }
    if payload > fragmentation_threshold() {
        return Err(Error::WouldFragment {
            payload,
            limit: fragmentation_threshold(),
        });
    }
    Ok(())
}

/// On-wire frame size for an unfragmented payload.
pub fn total_frame_size(payload: u32) -> Result<u32> {
    check_unfragmented(payload)?;
    Ok(payload + TOTAL_OVERHEAD)
}

/// Splits the IP datagram carrying `payload` into Ethernet frame payloads.
///
/// Oversized datagrams are cut into 1500-byte chunks plus a remainder. The
/// IP header is counted once, not replicated per fragment as a real stack
/// would do, so 1475 bytes of payload gives `[1500, 3]`.
pub fn fragment(payload: u32) -> Result<FragmentationResult> {
    if payload == 0 {
        return Err(Error::ZeroPayload);
    }
    let mut remaining = payload + UDP_HEADER + IP_HEADER;
    let mut sizes = Vec::with_capacity((remaining / MAX_FRAME_PAYLOAD + 1) as usize);
    while remaining > MAX_FRAME_PAYLOAD {
        sizes.push(MAX_FRAME_PAYLOAD);
        remaining -= MAX_FRAME_PAYLOAD;
    }
    sizes.push(remaining);
    Ok(FragmentationResult {
        fragmented: sizes.len() > 1,
        frame_payload_sizes: sizes,
    })
}

/// Converts a payload-only rate (what Iperf-like tools report) to the
/// on-wire rate including all 46 bytes of per-packet overhead.
pub fn throughput_from_goodput(goodput_bps: f64, payload: u32) -> Result<f64> {
    check_unfragmented(payload)?;
    check_rate(goodput_bps)?;
    Ok(goodput_bps * f64::from(payload + TOTAL_OVERHEAD) / f64::from(payload))
}

pub fn goodput_from_throughput(throughput_bps: f64, payload: u32) -> Result<f64> {
    check_unfragmented(payload)?;
    check_rate(throughput_bps)?;
    Ok(throughput_bps * f64::from(payload) / f64::from(payload + TOTAL_OVERHEAD))
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::invalid("rate", format!("{rate} is not a finite non-negative rate")));
    }
    Ok(())
}

/// Bits carried by `bytes` bytes.
#[inline]
pub fn bits(bytes: u32) -> f64 {
    f64::from(bytes) * 8.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_constants() {
        let l = FrameLayout::default();
        assert_eq!(l.total_overhead(), 46);
        assert_eq!(l.max_frame, l.max_frame_payload + l.eth_overhead);
        assert_eq!(l.max_frame, 1518);
    }

    #[test]
    fn frame_sizes() {
        assert_eq!(total_frame_size(50).unwrap(), 96);
        assert_eq!(total_frame_size(1450).unwrap(), 1496);
        assert_eq!(total_frame_size(1472).unwrap(), 1518);
        assert!(matches!(
            total_frame_size(1473),
            Err(Error::WouldFragment { payload: 1473, limit: 1472 })
        ));
        assert!(matches!(total_frame_size(0), Err(Error::ZeroPayload)));
    }

    #[test]
    fn threshold() {
        assert_eq!(fragmentation_threshold(), 1472);
        const { assert!(1475 + UDP_HEADER + IP_HEADER > MAX_FRAME_PAYLOAD) };
        assert_eq!(1472 + UDP_HEADER + IP_HEADER, MAX_FRAME_PAYLOAD);
    }

    #[test]
    fn fragments() {
        let f = fragment(1475).unwrap();
        assert_eq!(f.frame_payload_sizes, vec![1500, 3]);
        assert!(f.fragmented);

        assert_eq!(fragment(1450).unwrap().frame_payload_sizes, vec![1478]);
        assert_eq!(fragment(25).unwrap().frame_payload_sizes, vec![53]);
        assert!(!fragment(1472).unwrap().fragmented);
        assert_eq!(fragment(3000 - 28).unwrap().frame_payload_sizes, vec![1500, 1500]);
        assert_eq!(fragment(3001 - 28).unwrap().frame_payload_sizes, vec![1500, 1500, 1]);
    }

    #[test]
    fn goodput_conversion() {
        let t = throughput_from_goodput(5.0e6, 25).unwrap();
        assert!((t - 14.2e6).abs() < 1e-6);
        let t = throughput_from_goodput(96.0e6, 1450).unwrap();
        assert!((t - 96.0e6 * 1496.0 / 1450.0).abs() < 1e-6);
        assert!((t - 99.0e6).abs() < 0.05e6);
        assert!(throughput_from_goodput(1.0, 0).is_err());
        assert!(throughput_from_goodput(-1.0, 100).is_err());
    }

    proptest! {
        #[test]
        fn frame_size_is_unit_slope(p in 1u32..1472) {
            prop_assert_eq!(total_frame_size(p + 1).unwrap() - total_frame_size(p).unwrap(), 1);
            prop_assert_eq!(total_frame_size(p).unwrap() - p, 46);
        }

        #[test]
        fn fragment_chunks_bounded(p in 1u32..20_000) {
            let f = fragment(p).unwrap();
            prop_assert!(f.frame_payload_sizes.iter().all(|&s| s <= MAX_FRAME_PAYLOAD && s > 0));
            prop_assert_eq!(f.frame_payload_sizes.iter().sum::<u32>(), p + 28);
            prop_assert_eq!(f.fragmented, f.frame_payload_sizes.len() > 1);
        }

        #[test]
        fn goodput_round_trip(g in 0.0f64..1e10, p in 1u32..=1472) {
            let t = throughput_from_goodput(g, p).unwrap();
            prop_assert!(t >= g);
            if g > 0.0 {
                prop_assert!(t > g);
            }
            let back = goodput_from_throughput(t, p).unwrap();
            prop_assert!((back - g).abs() <= 1e-12 * g.max(f64::MIN_POSITIVE));
        }
    }
}
