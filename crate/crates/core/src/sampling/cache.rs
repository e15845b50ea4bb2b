//! Binary sample-bank cache.
//!
//! Layout (little endian): magic `CSBK`, version `u16`, stage `u8`,
//! seed `u64`, then fixed 37-byte records `x[3]: f64, f2d: f64, tag: u8,
//! plane_id: u32` until end of file.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

use super::{LabeledSample, SampleBank, SampleTag};

pub const BANK_MAGIC: &[u8; 4] = b"CSBK";
pub const BANK_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 8;
const RECORD_LEN: usize = 3 * 8 + 8 + 1 + 4;

pub fn encode_bank(bank: &SampleBank) -> Result<Vec<u8>> {
    let stage = u8::try_from(bank.stage).map_err(|_| Error::InvalidInput("stage does not fit in u8".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * bank.samples.len());
    out.extend_from_slice(BANK_MAGIC);
    out.extend_from_slice(&BANK_VERSION.to_le_bytes());
    out.push(stage);
    out.extend_from_slice(&bank.rng_seed.to_le_bytes());
    for s in &bank.samples {
        for c in s.x.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&s.f2d.to_le_bytes());
        out.push(s.tag as u8);
        out.extend_from_slice(&s.plane_id.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_bank(bytes: &[u8]) -> Result<SampleBank> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != BANK_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != BANK_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: BANK_VERSION,
        });
    }
    let stage = bytes[6] as usize;
    let rng_seed = u64::from_le_bytes(bytes[7..15].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    if body.len() % RECORD_LEN != 0 {
        return Err(Error::Truncated {
            expected: HEADER_LEN + (body.len() / RECORD_LEN + 1) * RECORD_LEN,
            found: bytes.len(),
        });
    }
    let f64_at = |r: &[u8], i: usize| f64::from_le_bytes(r[i..i + 8].try_into().unwrap());
    let samples = body
        .chunks_exact(RECORD_LEN)
        .map(|r| {
            let tag = SampleTag::from_u8(r[32]).ok_or_else(|| Error::InvalidInput(format!("unknown sample tag {}", r[32])))?;
            Ok(LabeledSample {
                x: Vec3::new(f64_at(r, 0), f64_at(r, 8), f64_at(r, 16)),
                f2d: f64_at(r, 24),
                tag,
                plane_id: u32::from_le_bytes(r[33..37].try_into().unwrap()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBank {
        samples,
        stage,
        rng_seed,
        warnings: Vec::new(),
    })
}

pub fn write_bank(bank: &SampleBank, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_bank(bank)?)?;
    Ok(())
}

pub fn read_bank(path: &Path) -> Result<SampleBank> {
    decode_bank(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank() -> SampleBank {
        SampleBank {
            samples: vec![
                LabeledSample {
                    x: Vec3::new(0.1, -0.2, 0.3),
                    f2d: 0.0,
                    tag: SampleTag::OnContour,
                    plane_id: 0,
                },
                LabeledSample {
                    x: Vec3::new(1.0, 0.5, -1.0),
                    f2d: -0.125,
                    tag: SampleTag::AdaptiveInterior,
                    plane_id: 7,
                },
            ],
            stage: 3,
            rng_seed: 0xdead_beef,
            warnings: vec![],
        }
    }

    #[test]
    fn round_trip() {
        let b = bank();
        let bytes = encode_bank(&b).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 2 * RECORD_LEN);
        let back = decode_bank(&bytes).unwrap();
        assert_eq!(back.samples, b.samples);
        assert_eq!(back.stage, 3);
        assert_eq!(back.rng_seed, 0xdead_beef);
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = encode_bank(&bank()).unwrap();
        assert!(matches!(decode_bank(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
        bytes[0] = b'X';
        assert!(matches!(decode_bank(&bytes), Err(Error::BadMagic)));
    }
}
