//! CSV/JSON emission helpers shared by the experiment writers.

use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes a CSV table, preceded by a `# config_hash: …` comment line when a
/// hash is supplied.
pub fn write_csv<W: Write>(mut out: W, config_hash: Option<&str>, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    if let Some(h) = config_hash {
        writeln!(out, "# config_hash: {h}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_hash_line_and_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, Some("abc"), &["x".into(), "y".into()], &[vec![1.0, 0.5]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# config_hash: abc\nx,y\n1,0.5\n");
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
