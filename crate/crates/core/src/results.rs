//! Result persistence: experiment records as CSV, trained readout weights
//! as headered binary checkpoints, and the analysis tables as long-format
//! CSV. Record files carry a schema version; readers refuse to merge
//! records written under a different schema.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::analysis::{BinOccupancy, SeparabilityTable, SweepRecord};
use crate::error::{Error, Result};
use crate::readout::ReadoutWeights;

/// Version stamped into every record row.
pub const SCHEMA_VERSION: u32 = 1;

const WEIGHTS_MAGIC: &str = "MRWT1";

/// Streaming record writer: each row is flushed as it lands, so a partial
/// sweep always leaves a valid CSV behind.
pub struct RecordWriter {
    inner: csv::Writer<fs::File>,
}

impl RecordWriter {
    /// Create (or truncate) `path` and write the header.
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let file = fs::File::create(path)?;
        Ok(RecordWriter {
            inner: csv::Writer::from_writer(file),
        })
    }

    pub fn write(&mut self, record: &SweepRecord) -> Result<()> {
        self.inner
            .serialize(record)
            .and_then(|()| self.inner.flush().map_err(csv::Error::from))
            .map_err(|e| Error::format(format!("cannot write record: {e}")))
    }
}

/// Write a whole record set at once.
pub fn write_records_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut w = RecordWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    Ok(())
}

/// Read records back, refusing mixed or foreign schema versions.
pub fn read_records_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::format(format!("cannot open {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for row in reader.deserialize::<SweepRecord>() {
        let record =
            row.map_err(|e| Error::format(format!("bad record in {}: {e}", path.display())))?;
        if record.schema_version != SCHEMA_VERSION {
            return Err(Error::consistency(format!(
                "{} holds schema version {} records, this build reads version {SCHEMA_VERSION}",
                path.display(),
                record.schema_version
            )));
        }
        records.push(record);
    }
    Ok(records)
}

/// Persist trained weights: one text header line
/// (`MRWT1 n_features=<n> n_classes=<c> seed=<s> config=<hash>`),
/// then row-major little-endian f64s.
pub fn save_weights(path: &Path, w: &ReadoutWeights, seed: u64, config_hash: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(
        out,
        "{WEIGHTS_MAGIC} n_features={} n_classes={} seed={seed} config={config_hash}",
        w.n_features, w.n_classes
    )?;
    for &v in &w.w {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Load a checkpoint back, returning the weights and their header metadata.
pub fn load_weights(path: &Path) -> Result<(ReadoutWeights, u64, String)> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let fields: Vec<&str> = header.trim_end().split(' ').collect();
    let bad = || Error::format(format!("{}: not a weight checkpoint", path.display()));
    if fields.len() != 5 || fields[0] != WEIGHTS_MAGIC {
        return Err(bad());
    }
    let grab = |idx: usize, key: &str| -> Result<String> {
        fields[idx]
            .strip_prefix(&format!("{key}="))
            .map(str::to_owned)
            .ok_or_else(bad)
    };
    let n_features: usize = grab(1, "n_features")?.parse().map_err(|_| bad())?;
    let n_classes: usize = grab(2, "n_classes")?.parse().map_err(|_| bad())?;
    let seed: u64 = grab(3, "seed")?.parse().map_err(|_| bad())?;
    let config_hash = grab(4, "config")?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() != n_features * n_classes * 8 {
        return Err(Error::format(format!(
            "{}: payload holds {} bytes, header promises {}",
            path.display(),
            payload.len(),
            n_features * n_classes * 8
        )));
    }
    let w = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((
        ReadoutWeights {
            n_features,
            n_classes,
            w,
        },
        seed,
        config_hash,
    ))
}

/// Long-format separability export: `tau_ns,sequence_id,final_x`, sequence
/// ids read MSB = first pulse.
pub fn write_separability_csv(path: &Path, table: &SeparabilityTable) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "tau_ns,sequence_id,final_x")?;
    for (t, &tau) in table.tau_grid.iter().enumerate() {
        for (seq, row) in table.states.iter().enumerate() {
            writeln!(out, "{},{seq},{}", tau * 1e9, row[t])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Occupancy export: `tau_ns,bits,distinct_states` per grid point.
pub fn write_occupancy_csv(path: &Path, occ: &BinOccupancy) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "tau_ns,bits,distinct_states")?;
    for (t, &tau) in occ.tau_grid.iter().enumerate() {
        for (b, &bits) in occ.bits_grid.iter().enumerate() {
            writeln!(out, "{},{bits},{}", tau * 1e9, occ.counts[t][b])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::final_state_sweep;
    use crate::device::DeviceParams;
    use crate::encoding::Dimension;

    fn rec(seed: u64, accuracy: f64) -> SweepRecord {
        SweepRecord {
            dimension: Dimension::TwoD,
            parity: true,
            sections: 7,
            bits: 4,
            tau_ns: 6.0,
            variability_pct: 0.0,
            seed,
            accuracy,
            runtime_s: 1.25,
            config_hash: "00ff00ff00ff00ff".into(),
            schema_version: SCHEMA_VERSION,
        }
    }

    #[test]
    fn records_round_trip_with_pinned_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let records = vec![rec(1, 0.95), rec(2, 0.9)];
        write_records_csv(&path, &records).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "dimension,parity,sections,bits,tau_ns,variability_pct,seed,accuracy,runtime_s,config_hash,schema_version\n"
        ));
        assert!(text.contains("2d,true,7,4,6.0,0.0,1,0.95,1.25,00ff00ff00ff00ff,1"));
        assert_eq!(read_records_csv(&path).unwrap(), records);
    }

    #[test]
    fn foreign_schema_versions_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let mut old = rec(1, 0.9);
        old.schema_version = 99;
        write_records_csv(&path, &[old]).unwrap();
        let err = read_records_csv(&path).unwrap_err().to_string();
        assert!(err.contains("schema version 99"), "{err}");
    }

    #[test]
    fn streaming_writer_leaves_valid_partial_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partial.csv");
        let mut w = RecordWriter::create(&path).unwrap();
        w.write(&rec(1, 0.5)).unwrap();
        // file is readable while the writer is still open
        assert_eq!(read_records_csv(&path).unwrap().len(), 1);
        w.write(&rec(2, 0.6)).unwrap();
        drop(w);
        assert_eq!(read_records_csv(&path).unwrap().len(), 2);
    }

    #[test]
    fn weights_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let w = crate::readout::init_weights(13, 10, 7);
        save_weights(&path, &w, 42, "abcd1234abcd1234").unwrap();
        let (back, seed, hash) = load_weights(&path).unwrap();
        assert_eq!(back, w);
        assert_eq!(seed, 42);
        assert_eq!(hash, "abcd1234abcd1234");
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        fs::write(&path, "not a checkpoint\n").unwrap();
        assert!(load_weights(&path).is_err());

        let w = crate::readout::init_weights(4, 2, 7);
        save_weights(&path, &w, 1, "x").unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&path, bytes).unwrap();
        assert!(load_weights(&path)
            .unwrap_err()
            .to_string()
            .contains("payload"));
    }

    #[test]
    fn analysis_tables_export_as_long_csv() {
        let dir = tempfile::tempdir().unwrap();
        let table = final_state_sweep(2, &[6e-9, 10e-9], &DeviceParams::default()).unwrap();
        let sep = dir.path().join("sep.csv");
        write_separability_csv(&sep, &table).unwrap();
        let text = fs::read_to_string(&sep).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "tau_ns,sequence_id,final_x");
        assert_eq!(lines.len(), 1 + 2 * 4, "header + |tau| * 2^L rows");
        assert!(lines[1].starts_with("6,0,0.1"));

        let occ =
            crate::analysis::bin_occupancy(&table, &DeviceParams::default(), &[1, 6]).unwrap();
        let occ_path = dir.path().join("occ.csv");
        write_occupancy_csv(&occ_path, &occ).unwrap();
        let text = fs::read_to_string(&occ_path).unwrap();
        assert!(text.starts_with("tau_ns,bits,distinct_states\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 2);
    }
}
