//! Little-endian binary dataset files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ConditionVector, Dataset, Record};
use crate::error::{Error, Result};
use crate::teacher::{ConditionAxis, ConditionRanges};

pub const DATASET_MAGIC: &[u8; 4] = b"BMDS";
pub const DATASET_VERSION: u32 = 1;

fn corrupt(msg: impl Into<String>) -> Error {
    Error::corrupt("dataset", msg)
}

pub fn write_dataset_to<W: Write>(mut w: W, d: &Dataset) -> Result<()> {
    d.check()?;
    w.write_all(DATASET_MAGIC)?;
    for v in [DATASET_VERSION, d.rows as u32, d.cols as u32, d.samples as u32, d.records.len() as u32, d.mu_count as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for (lo, hi) in d.ranges.0 {
        w.write_all(&lo.to_le_bytes())?;
        w.write_all(&hi.to_le_bytes())?;
    }
    for r in &d.records {
        w.write_all(&r.mu_id.to_le_bytes())?;
        w.write_all(&r.muscle_label.to_le_bytes())?;
        for c in r.conditions.0 {
            w.write_all(&c.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(r.data.len() * 4);
        for v in &r.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(path: &Path, d: &Dataset) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_to(BufWriter::new(f), d).map_err(|e| match e {
        Error::Stream(e) => Error::io(path, e),
        other => other,
    })
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => corrupt(format!("truncated while reading {what}")),
            _ => Error::Stream(e),
        })?;
        Ok(b)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>(what)?))
    }
}

pub fn read_dataset_from<R: Read>(r: R) -> Result<Dataset> {
    let mut c = Cursor { inner: r };
    if &c.bytes::<4>("magic")? != DATASET_MAGIC {
        return Err(corrupt("bad magic, not a dataset file"));
    }
    let version = c.u32("version")?;
    if version != DATASET_VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let rows = c.u32("rows")? as usize;
    let cols = c.u32("cols")? as usize;
    let samples = c.u32("T")? as usize;
    let count = c.u32("sample count")? as usize;
    let mu_count = c.u32("MU count")? as usize;
    let mut ranges = [(0.0, 0.0); 6];
    for (axis, r) in ConditionAxis::ALL.iter().zip(ranges.iter_mut()) {
        *r = (c.f64(axis.name())?, c.f64(axis.name())?);
    }
    let ranges = ConditionRanges(ranges);
    ranges.validate().map_err(|e| corrupt(e.to_string()))?;
    let n = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(samples))
        .ok_or_else(|| corrupt("grid dimensions overflow"))?;

    let mut records = Vec::with_capacity(count.min(1 << 16));
    let mut buf = vec![0u8; n * 4];
    for i in 0..count {
        let mu_id = c.u32("record header")?;
        let muscle_label = c.u32("record header")?;
        let mut cond = [0.0; 6];
        for v in &mut cond {
            *v = c.f64("conditions")?;
        }
        c.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => corrupt(format!("truncated in record {i}")),
            _ => Error::Stream(e),
        })?;
        let data = buf.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        records.push(Record { mu_id, muscle_label, conditions: ConditionVector(cond), data });
    }
    let mut rest = [0u8; 1];
    if c.inner.read(&mut rest)? != 0 {
        return Err(corrupt("trailing bytes after the last record"));
    }
    let d = Dataset { rows, cols, samples, mu_count, ranges, records };
    d.check()?;
    Ok(d)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_from(BufReader::new(f))
}

/// One row per record: index, unit, label and the six normalized conditions.
pub fn write_conditions_csv<W: Write>(mut w: W, d: &Dataset) -> Result<()> {
    write!(w, "index,mu_id,muscle_label")?;
    for a in ConditionAxis::ALL {
        write!(w, ",{a}")?;
    }
    writeln!(w)?;
    for (i, r) in d.records.iter().enumerate() {
        write!(w, "{i},{},{}", r.mu_id, r.muscle_label)?;
        for v in r.conditions.0 {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let rec = |mu: u32, k: f32| Record {
            mu_id: mu,
            muscle_label: mu % 2,
            conditions: ConditionVector([0.5, 0.6, 0.7, 0.8, 0.9, 1.0]),
            data: (0..12).map(|i| i as f32 * k - 0.1).collect(),
        };
        Dataset {
            rows: 2,
            cols: 3,
            samples: 2,
            mu_count: 2,
            ranges: ConditionRanges::default(),
            records: vec![rec(0, 1.5), rec(0, -0.25), rec(4, f32::MIN_POSITIVE), rec(4, 3.0)],
        }
    }

    fn bytes(d: &Dataset) -> Vec<u8> {
        let mut out = Vec::new();
        write_dataset_to(&mut out, d).unwrap();
        out
    }

    #[test]
    fn round_trip_is_exact() {
        let d = sample();
        let b = bytes(&d);
        assert_eq!(read_dataset_from(&b[..]).unwrap(), d);
        assert_eq!(b.len(), 4 + 6 * 4 + 6 * 16 + 4 * (8 + 48 + 48));
    }

    #[test]
    fn truncation_is_reported_as_corrupt() {
        let b = bytes(&sample());
        for cut in [2, 20, 100, b.len() - 1] {
            let e = read_dataset_from(&b[..cut]).unwrap_err();
            assert_eq!(e.category(), "corrupt", "cut {cut}: {e}");
        }
    }

    #[test]
    fn bad_magic_and_trailing_bytes_are_corrupt() {
        let mut b = bytes(&sample());
        b.push(0);
        assert_eq!(read_dataset_from(&b[..]).unwrap_err().category(), "corrupt");
        b[0] = b'X';
        assert_eq!(read_dataset_from(&b[..]).unwrap_err().category(), "corrupt");
    }

    #[test]
    fn csv_lists_every_record() {
        let mut out = Vec::new();
        write_conditions_csv(&mut out, &sample()).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("index,mu_id,muscle_label,fibre_count,depth,"));
        assert_eq!(s.lines().count(), 5);
    }
}
