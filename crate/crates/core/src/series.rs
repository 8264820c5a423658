//! Sweep samples and the plain-text sweep table shared by the simulator, the
//! UDP harness and the estimator.
//!
//! The table is CSV with exactly these eight columns:
//!
//! ```text
//! payload_bytes,frame_bytes,offered_pps,delivered_pps,goodput_bps,throughput_bps,loss_fraction,jitter_s
//! ```
//!
//! Rows are sorted by `payload_bytes`. Real values are written with the
//! shortest decimal representation that parses back to the same `f64`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const SWEEP_HEADER: [&str; 8] = [
    "payload_bytes",
    "frame_bytes",
    "offered_pps",
    "delivered_pps",
    "goodput_bps",
    "throughput_bps",
    "loss_fraction",
    "jitter_s",
];

/// One measured or simulated point of a payload-size sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSample {
    pub payload: u32,
    pub frame_size: u32,
    pub offered_pps: f64,
    pub delivered_pps: f64,
    pub goodput: f64,
    pub throughput: f64,
    pub loss_fraction: f64,
    pub jitter: f64,
}

impl SweepSample {
    /// Builds a sample from a delivered packet rate so that throughput and
    /// goodput agree with `T = 8 p λ` by construction.
    pub fn from_rates(payload: u32, offered_pps: f64, delivered_pps: f64, loss_fraction: f64, jitter: f64) -> Self {
        let frame_size = payload + crate::frame::TOTAL_OVERHEAD;
        SweepSample {
            payload,
            frame_size,
            offered_pps,
            delivered_pps,
            goodput: crate::frame::bits(payload) * delivered_pps,
            throughput: crate::frame::bits(frame_size) * delivered_pps,
            loss_fraction,
            jitter,
        }
    }

    pub fn size(&self, convention: SizeConvention) -> u32 {
        match convention {
            SizeConvention::Frame => self.frame_size,
            SizeConvention::Payload => self.payload,
        }
    }
}

/// Which byte count "packet size" refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeConvention {
    /// Payload plus the 46 bytes of framing.
    #[default]
    Frame,
    Payload,
}

impl SizeConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            SizeConvention::Frame => "frame",
            SizeConvention::Payload => "payload",
        }
    }
}

impl std::str::FromStr for SizeConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "frame" => Ok(SizeConvention::Frame),
            "payload" => Ok(SizeConvention::Payload),
            other => Err(format!("unknown size convention `{other}` (expected frame or payload)")),
        }
    }
}

/// Samples ordered by payload size.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSeries {
    samples: Vec<SweepSample>,
}

impl SweepSeries {
    pub fn new(mut samples: Vec<SweepSample>) -> Self {
        samples.sort_by_key(|s| s.payload);
        SweepSeries { samples }
    }

    pub fn samples(&self) -> &[SweepSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SweepSample> {
        self.samples.iter()
    }

    pub fn into_samples(self) -> Vec<SweepSample> {
        self.samples
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SWEEP_HEADER).map_err(csv_io)?;
        for s in &self.samples {
            w.write_record([
                s.payload.to_string(),
                s.frame_size.to_string(),
                s.offered_pps.to_string(),
                s.delivered_pps.to_string(),
                s.goodput.to_string(),
                s.throughput.to_string(),
                s.loss_fraction.to_string(),
                s.jitter.to_string(),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Parses a sweep table. Row numbers in errors count the header as row 1.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut records = r.records();
        match records.next() {
            None => {
                return Err(Error::MalformedRow {
                    row: 1,
                    reason: "missing header".into(),
                })
            }
            Some(rec) => {
                let rec = rec.map_err(|e| row_error(1, e))?;
                if rec.iter().ne(SWEEP_HEADER.iter().copied()) {
                    return Err(Error::MalformedRow {
                        row: 1,
                        reason: format!("expected header `{}`", SWEEP_HEADER.join(",")),
                    });
                }
            }
        }

        let mut samples = Vec::new();
        for (i, rec) in records.enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| row_error(row, e))?;
            if rec.len() != SWEEP_HEADER.len() {
                return Err(Error::MalformedRow {
                    row,
                    reason: format!("expected {} columns, found {}", SWEEP_HEADER.len(), rec.len()),
                });
            }
            let int = |col: usize| -> Result<u32> {
                rec[col].parse().map_err(|_| Error::MalformedRow {
                    row,
                    reason: format!("`{}` is not a valid {}", &rec[col], SWEEP_HEADER[col]),
                })
            };
            let real = |col: usize| -> Result<f64> {
                rec[col]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::MalformedRow {
                        row,
                        reason: format!("`{}` is not a valid {}", &rec[col], SWEEP_HEADER[col]),
                    })
            };
            let sample = SweepSample {
                payload: int(0)?,
                frame_size: int(1)?,
                offered_pps: real(2)?,
                delivered_pps: real(3)?,
                goodput: real(4)?,
                throughput: real(5)?,
                loss_fraction: real(6)?,
                jitter: real(7)?,
            };
            if let Some(prev) = samples.last().map(|s: &SweepSample| s.payload) {
                if sample.payload < prev {
                    return Err(Error::MalformedRow {
                        row,
                        reason: "rows must be sorted by payload_bytes".into(),
                    });
                }
            }
            samples.push(sample);
        }
        Ok(SweepSeries { samples })
    }
}

impl FromIterator<SweepSample> for SweepSeries {
    fn from_iter<T: IntoIterator<Item = SweepSample>>(iter: T) -> Self {
        SweepSeries::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a SweepSeries {
    type Item = &'a SweepSample;
    type IntoIter = std::slice::Iter<'a, SweepSample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn row_error(row: usize, e: csv::Error) -> Error {
    Error::MalformedRow {
        row,
        reason: e.to_string(),
    }
}
