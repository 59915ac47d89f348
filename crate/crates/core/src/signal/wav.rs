use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use nalgebra::DMatrix;

use super::SourceMatrix;
use crate::error::{Error, Result};

fn format_err(path: &Path, reason: impl ToString) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

/// Decodes one mono WAV file to floats in [-1, 1].
fn read_mono(path: &Path) -> Result<(Vec<f64>, u32)> {
    let reader = WavReader::open(path).map_err(|e| format_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(format_err(
            path,
            format!("expected mono audio, found {} channels", spec.channels),
        ));
    }
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, bits @ 8..=32) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<Vec<_>, _>>()
        }
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<Vec<_>, _>>(),
        (format, bits) => {
            return Err(format_err(
                path,
                format!("unsupported sample encoding {format:?} {bits}-bit"),
            ))
        }
    }
    .map_err(|e| format_err(path, e))?;
    Ok((samples, spec.sample_rate))
}

/// Loads one source per file. All files must share sample rate and length.
pub fn load_wav_sources<P: AsRef<Path>>(paths: &[P]) -> Result<SourceMatrix> {
    if paths.len() < 2 {
        return Err(Error::Ingestion(format!(
            "need at least 2 WAV files, got {}",
            paths.len()
        )));
    }
    let mut rows = Vec::with_capacity(paths.len());
    let mut rate = None;
    for path in paths {
        let path = path.as_ref();
        let (samples, r) = read_mono(path)?;
        match rate {
            None => rate = Some(r),
            Some(expected) if expected != r => {
                return Err(Error::Ingestion(format!(
                    "{}: sample rate {r} Hz differs from {expected} Hz",
                    path.display()
                )))
            }
            _ => {}
        }
        if let Some(first) = rows.first().map(Vec::len) {
            if first != samples.len() {
                return Err(Error::Ingestion(format!(
                    "{}: {} samples, expected {first}",
                    path.display(),
                    samples.len()
                )));
            }
        }
        rows.push(samples);
    }
    let m = rows[0].len();
    let data = DMatrix::from_fn(rows.len(), m, |r, c| rows[r][c]);
    SourceMatrix::new(data, rate.unwrap_or_default()).map_err(|e| match e {
        Error::Parameter(msg) | Error::Degenerate(msg) => Error::Ingestion(msg),
        other => other,
    })
}

/// Every `*.wav` file (case-insensitive extension) in `dir`, sorted by name.
pub fn list_wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Error::Ingestion(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| x.eq_ignore_ascii_case("wav"))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_wav_dir(dir: &Path) -> Result<SourceMatrix> {
    load_wav_sources(&list_wav_files(dir)?)
}

/// Writes `samples` (expected in [-1, 1], clamped otherwise) as 16-bit mono PCM.
pub fn write_wav_pcm16(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| format_err(path, e))?;
    for &s in samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| format_err(path, e))?;
    }
    writer.finalize().map_err(|e| format_err(path, e))
}
