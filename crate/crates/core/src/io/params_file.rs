//! Plain-text parameter files.
//!
//! ```text
//! lgssm-params v1
//! # optional comments
//! A 2 2
//! 9.0000000000000002e-1 0.0000000000000000e0
//! 0.0000000000000000e0 9.0000000000000002e-1
//! Q 2 2
//! ...
//! ```
//!
//! Every block is "KEY rows cols" followed by rows of decimal floats with 17
//! significant digits, enough for f64 values to parse back to the identical
//! bit pattern. The six keys A, Q, C, R, mu0, Sigma0 are all required;
//! unknown or duplicate keys are rejected.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lgssm::LgssmParams;

const HEADER: &str = "lgssm-params v1";
const KEYS: [&str; 6] = ["A", "Q", "C", "R", "mu0", "Sigma0"];

pub fn write_params<W: Write>(params: &LgssmParams, w: &mut W) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    write_block(w, "A", &params.a)?;
    write_block(w, "Q", &params.q)?;
    write_block(w, "C", &params.c)?;
    write_block(w, "R", &params.r)?;
    let mu0 = DMatrix::from_fn(params.mu0.len(), 1, |r, _| params.mu0[r]);
    write_block(w, "mu0", &mu0)?;
    write_block(w, "Sigma0", &params.sigma0)?;
    Ok(())
}

fn write_block<W: Write>(w: &mut W, key: &str, m: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "{key} {} {}", m.nrows(), m.ncols())?;
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.16e}", m[(r, c)])).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_params<R: Read>(r: &mut R) -> Result<LgssmParams> {
    let mut text = String::new();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.starts_with(b"MSEQ") {
        return Err(Error::Parse(
            "input starts with MSEQ magic bytes: this is a binary tensor file, not a lgssm-params text file".into(),
        ));
    }
    text.push_str(
        std::str::from_utf8(&bytes)
            .map_err(|_| Error::Parse("parameter file is not valid UTF-8".into()))?,
    );

    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some(h) if h == HEADER => {}
        Some(h) => {
            return Err(Error::Parse(format!("expected header \"{HEADER}\", found \"{h}\"")));
        }
        None => return Err(Error::Parse("parameter file is empty".into())),
    }

    let mut blocks: HashMap<String, DMatrix<f64>> = HashMap::new();
    while let Some(line) = lines.next() {
        let mut parts = line.split_whitespace();
        let key = parts.next().expect("non-empty line");
        if !KEYS.contains(&key) {
            return Err(Error::Parse(format!("unknown key \"{key}\"")));
        }
        if blocks.contains_key(key) {
            return Err(Error::Parse(format!("duplicate key \"{key}\"")));
        }
        let dims: Vec<usize> = parts
            .map(|p| p.parse().map_err(|_| Error::Parse(format!("bad dimension in \"{line}\""))))
            .collect::<Result<_>>()?;
        if dims.len() != 2 || dims[0] == 0 || dims[1] == 0 {
            return Err(Error::Parse(format!("key \"{key}\" needs \"rows cols\" dimensions")));
        }
        let (rows, cols) = (dims[0], dims[1]);
        let mut m = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            let row_line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("block \"{key}\" is missing row {r}")))?;
            let values: Vec<f64> = row_line
                .split_whitespace()
                .map(|p| {
                    p.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad float \"{p}\" in block \"{key}\"")))
                })
                .collect::<Result<_>>()?;
            if values.len() != cols {
                return Err(Error::Parse(format!(
                    "block \"{key}\" row {r} has {} values, expected {cols}",
                    values.len()
                )));
            }
            for (c, v) in values.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        blocks.insert(key.to_string(), m);
    }

    for key in KEYS {
        if !blocks.contains_key(key) {
            return Err(Error::Parse(format!("missing key \"{key}\"")));
        }
    }
    let mu0_m = blocks.remove("mu0").expect("checked");
    if mu0_m.ncols() != 1 {
        return Err(Error::Parse("mu0 must be a column vector (cols = 1)".into()));
    }
    let mu0 = DVector::from_fn(mu0_m.nrows(), |r, _| mu0_m[(r, 0)]);
    LgssmParams::new(
        blocks.remove("A").expect("checked"),
        blocks.remove("Q").expect("checked"),
        blocks.remove("C").expect("checked"),
        blocks.remove("R").expect("checked"),
        mu0,
        blocks.remove("Sigma0").expect("checked"),
    )
}

pub fn write_params_file<P: AsRef<Path>>(path: P, params: &LgssmParams) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_params(params, &mut w)
}

pub fn read_params_file<P: AsRef<Path>>(path: P) -> Result<LgssmParams> {
    let mut r = BufReader::new(File::open(path)?);
    read_params(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> LgssmParams {
        LgssmParams::new(
            DMatrix::from_row_slice(2, 2, &[0.9, 0.1, -0.2, 0.8]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.4]),
            DMatrix::from_row_slice(1, 2, &[1.0 / 3.0, -0.5]),
            DMatrix::from_row_slice(1, 1, &[0.3]),
            DVector::from_vec(vec![0.2, -1.0 / 7.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.8]),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_reproduces_every_bit() {
        let p = fixture();
        let mut buf = Vec::new();
        write_params(&p, &mut buf).unwrap();
        let back = read_params(&mut buf.as_slice()).unwrap();
        assert_eq!(back.a, p.a);
        assert_eq!(back.q, p.q);
        assert_eq!(back.c, p.c);
        assert_eq!(back.r, p.r);
        assert_eq!(back.mu0, p.mu0);
        assert_eq!(back.sigma0, p.sigma0);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let p = fixture();
        let mut buf = Vec::new();
        write_params(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let commented = text.replace("Q 2 2", "# process noise\n\nQ 2 2");
        let back = read_params(&mut commented.as_bytes()).unwrap();
        assert_eq!(back.q, p.q);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "lgssm-params v1\nB 1 1\n1.0\n";
        let err = read_params(&mut text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("unknown key"));
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let p = fixture();
        let mut buf = Vec::new();
        write_params(&p, &mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("R 1 1\n1.0\n");
        assert!(read_params(&mut text.as_bytes()).is_err());
    }

    #[test]
    fn missing_blocks_are_rejected() {
        let text = "lgssm-params v1\nA 1 1\n1.0\n";
        let err = read_params(&mut text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("missing key"));
    }

    #[test]
    fn mseq_bytes_are_identified_in_the_error() {
        let bytes = b"MSEQ\x01\x00\x00\x00";
        let err = read_params(&mut bytes.as_slice()).unwrap_err();
        assert!(err.to_string().contains("MSEQ"));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = "lgssm-params v2\n";
        assert!(read_params(&mut text.as_bytes()).is_err());
    }
}
