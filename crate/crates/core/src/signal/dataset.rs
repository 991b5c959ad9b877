use std::path::{Path, PathBuf};

use super::{Beat, BeatLabel, BeatMatrix, BEAT_LEN};
use crate::{Error, Result};

/// Number of columns in a beat dataset file: sbp, dbp, 75 PPG, 75 ECG.
pub const BEAT_CSV_COLUMNS: usize = 2 + 2 * BEAT_LEN;

const META_HEADER: [&str; 3] = ["source_record", "onset_index", "duration_s"];

fn header() -> Vec<String> {
    let mut h = vec!["sbp".to_string(), "dbp".to_string()];
    h.extend((0..BEAT_LEN).map(|i| format!("ppg_{i}")));
    h.extend((0..BEAT_LEN).map(|i| format!("ecg_{i}")));
    h
}

/// Sidecar file carrying provenance that does not fit the 152-column schema.
pub fn meta_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}.meta.csv"))
}

/// Writes beats as `sbp,dbp,ppg_0..ppg_74,ecg_0..ecg_74` plus a
/// `<stem>.meta.csv` sidecar with record id, onset and duration per row.
pub fn write_beats(path: &Path, beats: &[Beat]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header())?;
    let mut m = csv::Writer::from_path(meta_path(path))?;
    m.write_record(META_HEADER)?;
    for b in beats {
        let mut row = Vec::with_capacity(BEAT_CSV_COLUMNS);
        row.push(b.label.sbp_mmhg.to_string());
        row.push(b.label.dbp_mmhg.to_string());
        row.extend(b.matrix.ppg().map(|v| v.to_string()));
        row.extend(b.matrix.ecg().map(|v| v.to_string()));
        w.write_record(&row)?;
        m.write_record([
            b.matrix.source_record.clone(),
            b.matrix.onset_index.to_string(),
            b.matrix.duration_s.to_string(),
        ])?;
    }
    w.flush()?;
    m.flush()?;
    Ok(())
}

/// Reads a beat dataset. Without a sidecar, beats are attributed to the file
/// stem with their row index as onset and a nominal 1 s duration.
pub fn read_beats(path: &Path) -> Result<Vec<Beat>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let h = rdr.headers()?.clone();
    if h.iter().ne(header().iter().map(String::as_str)) {
        return Err(Error::malformed(path, "beat dataset header does not match schema"));
    }
    let meta = read_meta(path)?;
    let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let mut beats = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != BEAT_CSV_COLUMNS {
            return Err(Error::malformed(
                path,
                format!("row {}: expected {BEAT_CSV_COLUMNS} columns, found {}", row + 1, rec.len()),
            ));
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::malformed(path, format!("row {}: non-numeric cell", row + 1)))?;
        let (source, onset, duration) = match &meta {
            Some(m) => m.get(row).cloned().ok_or_else(|| {
                Error::malformed(meta_path(path), format!("missing metadata row {}", row + 1))
            })?,
            None => (stem.clone(), row, 1.0),
        };
        beats.push(Beat {
            matrix: BeatMatrix::new(
                &vals[2..2 + BEAT_LEN],
                &vals[2 + BEAT_LEN..],
                source,
                onset,
                duration,
            )?,
            label: BeatLabel {
                sbp_mmhg: vals[0],
                dbp_mmhg: vals[1],
            },
        });
    }
    Ok(beats)
}

fn read_meta(path: &Path) -> Result<Option<Vec<(String, usize, f64)>>> {
    let mp = meta_path(path);
    if !mp.is_file() {
        return Ok(None);
    }
    let mut rdr = csv::Reader::from_path(&mp)?;
    if rdr.headers()?.iter().ne(META_HEADER) {
        return Err(Error::malformed(&mp, "unexpected metadata header"));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let bad = || Error::malformed(&mp, "bad metadata row");
        if rec.len() != 3 {
            return Err(bad());
        }
        out.push((
            rec[0].to_string(),
            rec[1].parse().map_err(|_| bad())?,
            rec[2].parse().map_err(|_| bad())?,
        ));
    }
    Ok(Some(out))
}
