//! Simulator file formats: per-microphone WAV files and `CSNP` channel files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::audio::MultichannelRecording;
use super::channel::ChannelSnapshot;
use crate::error::{Error, Result};
use crate::types::parse_numeric_csv;

pub const CSNP_MAGIC: &[u8; 4] = b"CSNP";

pub fn wav_path(dir: &Path, mic: usize) -> PathBuf {
    dir.join(format!("mic{mic:02}.wav"))
}

/// Writes one mono 16-bit PCM file per channel into `dir`.
///
/// All channels share one gain so that inter-channel levels survive; the
/// gain maps the loudest sample to 0.99 full scale and is returned.
pub fn write_wav_set(rec: &MultichannelRecording, dir: &Path) -> Result<f64> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let peak = rec
        .channels
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 0.0 { 0.99 / peak } else { 1.0 };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: rec.sample_rate.round() as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    for (i, ch) in rec.channels.iter().enumerate() {
        let path = wav_path(dir, i);
        let mut w = hound::WavWriter::create(&path, spec).map_err(|e| wav_err(&path, e))?;
        for v in ch {
            let s = (v * gain * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_sample(s).map_err(|e| wav_err(&path, e))?;
        }
        w.finalize().map_err(|e| wav_err(&path, e))?;
    }
    Ok(gain)
}

/// Reads `mic00.wav`, `mic01.wav`, ... for `count` microphones, scaling
/// samples to ±1 full scale.
pub fn read_wav_set(dir: &Path, count: usize) -> Result<MultichannelRecording> {
    let mut channels = Vec::with_capacity(count);
    let mut rate = None;
    for i in 0..count {
        let path = wav_path(dir, i);
        let mut r = hound::WavReader::open(&path).map_err(|e| wav_err(&path, e))?;
        let spec = r.spec();
        if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
            return Err(Error::format(&path, "expected mono 16-bit PCM"));
        }
        if *rate.get_or_insert(spec.sample_rate) != spec.sample_rate {
            return Err(Error::format(&path, "sample rate differs from mic00"));
        }
        let ch = r
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| wav_err(&path, e))?;
        channels.push(ch);
    }
    MultichannelRecording::new(channels, rate.unwrap_or(1) as f64, 0.0)
}

fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, other),
    }
}

/// Writes snapshots as `CSNP`: magic, u32 antennas, u32 subcarriers, u64
/// count, then per snapshot, antenna-major, interleaved f32 (re, im). All
/// little endian.
pub fn write_csnp(path: &Path, snapshots: &[ChannelSnapshot]) -> Result<()> {
    let (na, nk) = snapshots
        .first()
        .map_or((0, 0), |s| (s.antennas(), s.subcarriers()));
    if let Some(s) = snapshots.iter().find(|s| s.antennas() != na || s.subcarriers() != nk) {
        return Err(Error::shape(
            format!("{na}x{nk}"),
            format!("{}x{}", s.antennas(), s.subcarriers()),
        ));
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(CSNP_MAGIC)?;
    put(&(na as u32).to_le_bytes())?;
    put(&(nk as u32).to_le_bytes())?;
    put(&(snapshots.len() as u64).to_le_bytes())?;
    for s in snapshots {
        for a in 0..na {
            for k in 0..nk {
                let c = s.h[(a, k)];
                put(&(c.re as f32).to_le_bytes())?;
                put(&(c.im as f32).to_le_bytes())?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `CSNP` file. Timestamps come from the companion CSV; here they
/// are set to the snapshot index.
pub fn read_csnp(path: &Path) -> Result<Vec<ChannelSnapshot>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let mut magic = [0u8; 4];
    let mut read = |buf: &mut [u8]| r.read_exact(buf).map_err(|e| Error::io(path, e));
    read(&mut magic)?;
    if &magic != CSNP_MAGIC {
        return Err(Error::format(path, "bad magic, expected CSNP"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    read(&mut b4)?;
    let na = u32::from_le_bytes(b4) as usize;
    read(&mut b4)?;
    let nk = u32::from_le_bytes(b4) as usize;
    read(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut out = Vec::with_capacity(count);
    let mut buf = vec![0u8; na * nk * 8];
    for i in 0..count {
        read(&mut buf)?;
        let h = DMatrix::from_fn(na, nk, |a, k| {
            let o = (a * nk + k) * 8;
            let re = f32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
            let im = f32::from_le_bytes(buf[o + 4..o + 8].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        });
        out.push(ChannelSnapshot { t: i as f64, h });
    }
    Ok(out)
}

pub fn write_timestamps(path: &Path, snapshots: &[ChannelSnapshot]) -> Result<()> {
    let mut s = String::from("index,t\n");
    for (i, snap) in snapshots.iter().enumerate() {
        s.push_str(&format!("{i},{}\n", snap.t));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_timestamps(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows = parse_numeric_csv(&text, &["index", "t"]).map_err(|e| Error::format(path, e))?;
    Ok(rows.into_iter().map(|r| r[1]).collect())
}

/// Reads a channel file together with its timestamp CSV.
pub fn read_snapshots(csnp: &Path, timestamps: &Path) -> Result<Vec<ChannelSnapshot>> {
    let mut snaps = read_csnp(csnp)?;
    let times = read_timestamps(timestamps)?;
    if times.len() != snaps.len() {
        return Err(Error::format(
            timestamps,
            format!("{} timestamps for {} snapshots", times.len(), snaps.len()),
        ));
    }
    for (s, t) in snaps.iter_mut().zip(times) {
        s.t = t;
    }
    Ok(snaps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csnp_layout_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csnp");
        let snap = ChannelSnapshot {
            t: 0.5,
            h: DMatrix::from_row_slice(2, 3, &[
                Complex64::new(1.0, -1.0),
                Complex64::new(2.0, 0.5),
                Complex64::new(3.0, 0.0),
                Complex64::new(4.0, 0.25),
                Complex64::new(5.0, -2.0),
                Complex64::new(6.0, 8.0),
            ]),
        };
        write_csnp(&path, &[snap.clone()]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"CSNP");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 1);
        assert_eq!(bytes.len(), 20 + 6 * 8);
        // second value of antenna 0: re = 2.0, im = 0.5
        assert_eq!(f32::from_le_bytes(bytes[28..32].try_into().unwrap()), 2.0);
        assert_eq!(f32::from_le_bytes(bytes[32..36].try_into().unwrap()), 0.5);
        // first value of antenna 1
        assert_eq!(f32::from_le_bytes(bytes[44..48].try_into().unwrap()), 4.0);

        let ts = dir.path().join("a.csv");
        write_timestamps(&ts, &[snap.clone()]).unwrap();
        let back = read_snapshots(&path, &ts).unwrap();
        assert_eq!(back, vec![snap]);
    }

    #[test]
    fn csnp_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csnp");
        std::fs::write(&path, b"XXXX\0\0\0\0").unwrap();
        assert!(matches!(read_csnp(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn wav_set_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rec = MultichannelRecording::new(
            vec![vec![0.0, 0.5, -1.0, 0.25], vec![2.0, -2.0, 0.0, 1.0]],
            96_000.0,
            0.0,
        )
        .unwrap();
        let gain = write_wav_set(&rec, dir.path()).unwrap();
        assert!((gain - 0.99 / 2.0).abs() < 1e-15);
        let back = read_wav_set(dir.path(), 2).unwrap();
        assert_eq!(back.sample_rate, 96_000.0);
        for (a, b) in rec.channels.iter().flatten().zip(back.channels.iter().flatten()) {
            assert!((a * gain - b).abs() < 2.0 / 32768.0);
        }
        let spec = hound::WavReader::open(wav_path(dir.path(), 0)).unwrap().spec();
        assert_eq!((spec.bits_per_sample, spec.channels), (16, 1));
    }
}
