use std::fs;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 125.0;

const HEADER: [&str; 3] = ["ppg", "abp", "ecg"];

/// Synchronized PPG (a.u.), ABP (mmHg) and ECG (mV) channels of one recording.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub id: String,
    pub sample_rate_hz: f64,
    pub ppg: Vec<f64>,
    pub abp: Vec<f64>,
    pub ecg: Vec<f64>,
}

impl RawRecord {
    /// Validates channel lengths and the two-second minimum duration.
    pub fn new(
        id: impl Into<String>,
        sample_rate_hz: f64,
        ppg: Vec<f64>,
        abp: Vec<f64>,
        ecg: Vec<f64>,
    ) -> Result<Self> {
        let id = id.into();
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if ppg.len() != abp.len() || abp.len() != ecg.len() {
            return Err(Error::InvalidInput(format!(
                "record {id}: channel lengths differ ({}, {}, {})",
                ppg.len(),
                abp.len(),
                ecg.len()
            )));
        }
        let min = (2.0 * sample_rate_hz).ceil() as usize;
        if ppg.len() < min {
            return Err(Error::EmptyRecord {
                id,
                len: ppg.len(),
                min,
            });
        }
        Ok(Self {
            id,
            sample_rate_hz,
            ppg,
            abp,
            ecg,
        })
    }

    pub fn len(&self) -> usize {
        self.ppg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ppg.is_empty()
    }
}

/// Loads one record per CSV file. `path` may be a single file or a directory,
/// in which case every `*.csv` inside it is read in file-name order.
pub fn load_records(path: &Path, sample_rate_hz: f64) -> Result<Vec<RawRecord>> {
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        files
    } else if path.is_file() {
        vec![path.to_path_buf()]
    } else {
        return Err(Error::InvalidInput(format!(
            "{} does not exist",
            path.display()
        )));
    };
    files
        .iter()
        .map(|f| read_record(f, sample_rate_hz))
        .collect()
}

fn read_record(path: &Path, sample_rate_hz: f64) -> Result<RawRecord> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.len() != 3 || header.iter().zip(HEADER).any(|(h, e)| h != e) {
        return Err(Error::malformed(
            path,
            format!("expected header ppg,abp,ecg, found {:?}", header.iter().collect::<Vec<_>>()),
        ));
    }
    let (mut ppg, mut abp, mut ecg) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::malformed(
                path,
                format!("row {}: expected 3 columns, found {}", row + 1, rec.len()),
            ));
        }
        let mut vals = [0.0; 3];
        for (v, cell) in vals.iter_mut().zip(rec.iter()) {
            *v = cell.parse::<f64>().map_err(|_| {
                Error::malformed(path, format!("row {}: non-numeric cell {cell:?}", row + 1))
            })?;
        }
        ppg.push(vals[0]);
        abp.push(vals[1]);
        ecg.push(vals[2]);
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    RawRecord::new(id, sample_rate_hz, ppg, abp, ecg)
}

/// Writes a record in the `ppg,abp,ecg` format. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_record(path: &Path, record: &RawRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for i in 0..record.len() {
        w.write_record([
            record.ppg[i].to_string(),
            record.abp[i].to_string(),
            record.ecg[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn parses_three_column_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("ppg,abp,ecg\n");
        for i in 0..1250 {
            body.push_str(&format!("{},{},{}\n", i as f64 * 0.001, 80.0 + i as f64 * 0.01, 0.0));
        }
        let p = write(dir.path(), "r1.csv", &body);
        let recs = load_records(&p, 125.0).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].len(), 1250);
        assert_eq!(recs[0].id, "r1");
        assert_eq!(recs[0].abp[1249], 80.0 + 12.49);
    }

    #[test]
    fn two_columns_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("ppg,abp\n");
        for _ in 0..300 {
            body.push_str("1.0,2.0\n");
        }
        let p = write(dir.path(), "bad.csv", &body);
        assert!(matches!(
            load_records(&p, 125.0),
            Err(Error::MalformedFile { .. })
        ));
        let p2 = write(dir.path(), "bad2.csv", "ppg,abp,ecg\n1,2\n");
        assert!(matches!(
            load_records(&p2, 125.0),
            Err(Error::MalformedFile { .. })
        ));
    }

    #[test]
    fn non_numeric_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.csv", "ppg,abp,ecg\n1,abc,3\n");
        assert!(matches!(
            load_records(&p, 125.0),
            Err(Error::MalformedFile { .. })
        ));
    }

    #[test]
    fn short_record_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("ppg,abp,ecg\n");
        for _ in 0..249 {
            body.push_str("1,80,0\n");
        }
        let p = write(dir.path(), "s.csv", &body);
        assert!(matches!(
            load_records(&p, 125.0),
            Err(Error::EmptyRecord { len: 249, min: 250, .. })
        ));
    }

    #[test]
    fn directory_is_read_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        let rec = |id: &str, v: f64| {
            RawRecord::new(id, 125.0, vec![v; 300], vec![80.0; 300], vec![0.0; 300]).unwrap()
        };
        write_record(&dir.path().join("b.csv"), &rec("b", 2.0)).unwrap();
        write_record(&dir.path().join("a.csv"), &rec("a", 1.0)).unwrap();
        write(dir.path(), "notes.txt", "ignored");
        let recs = load_records(dir.path(), 125.0).unwrap();
        assert_eq!(recs.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn write_then_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ppg: Vec<f64> = (0..400).map(|i| (i as f64 * 0.1).sin() / 3.0).collect();
        let abp: Vec<f64> = (0..400).map(|i| 90.0 + (i as f64 * 0.07).cos() * 17.123456789).collect();
        let ecg: Vec<f64> = (0..400).map(|i| if i % 100 == 0 { 1.0 } else { 1e-17 * i as f64 }).collect();
        let rec = RawRecord::new("rt", 125.0, ppg, abp, ecg).unwrap();
        let p = dir.path().join("rt.csv");
        write_record(&p, &rec).unwrap();
        assert_eq!(load_records(&p, 125.0).unwrap()[0], rec);
    }

    #[test]
    fn unequal_channels_rejected() {
        assert!(RawRecord::new("x", 125.0, vec![0.0; 300], vec![0.0; 299], vec![0.0; 300]).is_err());
        assert!(RawRecord::new("x", 0.0, vec![0.0; 300], vec![0.0; 300], vec![0.0; 300]).is_err());
    }
}
