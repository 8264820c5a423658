//! Probe datagram layout (big-endian):
//!
//! ```text
//! 0       4                  12            payload
//! +-------+------------------+-------------+
//! |  seq  | send time (ns)   | zero pad... |
//! +-------+------------------+-------------+
//! ```
//!
//! The send time counts nanoseconds on the sender's monotonic clock since the
//! first packet of the stream.

use crate::error::{Error, Result};

pub const PROBE_HEADER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbePacket {
    pub sequence: u32,
    pub send_timestamp_ns: u64,
}

impl ProbePacket {
    /// Writes the header into `buf` and zero-fills the rest; the datagram is
    /// the whole of `buf`.
    pub fn encode_into(&self, buf: &mut [u8]) -> Result<()> {
        if buf.len() < PROBE_HEADER {
            return Err(Error::invalid(
                "payload",
                format!("{} bytes cannot hold the {PROBE_HEADER}-byte probe header", buf.len()),
            ));
        }
        buf[..4].copy_from_slice(&self.sequence.to_be_bytes());
        buf[4..12].copy_from_slice(&self.send_timestamp_ns.to_be_bytes());
        buf[PROBE_HEADER..].fill(0);
        Ok(())
    }

    pub fn encode(&self, payload: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; payload];
        self.encode_into(&mut buf)?;
        Ok(buf)
    }

    pub fn decode(datagram: &[u8]) -> Option<Self> {
        let header = datagram.get(..PROBE_HEADER)?;
        Some(ProbePacket {
            sequence: u32::from_be_bytes(header[..4].try_into().ok()?),
            send_timestamp_ns: u64::from_be_bytes(header[4..12].try_into().ok()?),
        })
    }
}
