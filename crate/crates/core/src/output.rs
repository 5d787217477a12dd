//! JSON and CSV emission with round-trip exact floats, and file digests.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::{self, Write};
use std::path::Path;

use crate::error::Result;

/// Pretty JSON whose floats carry 17 significant digits.
struct SeventeenDigits<'a>(serde_json::ser::PrettyFormatter<'a>);

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for SeventeenDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    forward! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

/// `{:.16e}` for finite values; JSON has no literal for the others.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

/// Serializes `value` as pretty JSON with 17-significant-digit floats.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

/// A CSV cell.
pub enum Cell<'a> {
    F(f64),
    I(u64),
    B(bool),
    S(&'a str),
}

impl std::fmt::Display for Cell<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::F(x) if x.is_finite() => write!(f, "{x:.16e}"),
            Cell::F(x) => write!(f, "{x}"),
            Cell::I(i) => write!(f, "{i}"),
            Cell::B(b) => write!(f, "{b}"),
            Cell::S(s) => write!(f, "{s}"),
        }
    }
}

/// Writes a header and rows.
pub fn write_csv<'a>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell<'a>>>) -> Result<()> {
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes columns of equal length sampled on `t_n = n·dt`.
pub fn write_series(path: &Path, dt: f64, names: &[&str], columns: &[&[f64]]) -> Result<()> {
    let len = columns.iter().map(|c| c.len()).min().unwrap_or(0);
    let mut header = vec!["t"];
    header.extend_from_slice(names);
    write_csv(
        path,
        &header,
        (0..len).map(|n| {
            let mut row = vec![Cell::F(n as f64 * dt)];
            row.extend(columns.iter().map(|c| Cell::F(c[n])));
            row
        }),
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[derive(Serialize)]
    struct Sample {
        a: f64,
        b: Vec<f64>,
        c: Option<f64>,
        d: u32,
    }

    #[test]
    fn json_floats_have_seventeen_digits() {
        let s = to_json(&Sample { a: 0.1, b: vec![1.0, -2.5e-300], c: None, d: 3 }).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("-2.5000000000000000e-300"));
        assert!(s.contains("\"c\": null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        assert_eq!(to_json(&f64::NAN).unwrap(), "null\n");
    }

    #[test]
    fn digest_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    proptest! {
        #[test]
        fn floats_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
            let s = to_json(&x).unwrap();
            prop_assert_eq!(serde_json::from_str::<f64>(&s).unwrap(), x);
        }
    }
}
