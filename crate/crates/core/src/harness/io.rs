//! Image files: 16-bit PGM for magnitudes, CSV for complex values.
//!
//! PGM files are binary P5 with maxval 65535; the largest magnitude maps to
//! 65535 and is recorded in a `# scale <value>` comment so that reading
//! restores physical units. CSV files start with one line `N,OSF` holding the
//! image side and oversampling factor, followed by `re,im` rows in row-major
//! order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::{ComplexImage, C64};

const MAXVAL: f64 = 65535.0;

fn malformed(message: impl Into<String>) -> Error {
    Error::Parse { line: 0, message: message.into() }
}

pub fn write_pgm<W: Write>(x: &ComplexImage, mut w: W) -> Result<()> {
    let n = x.side();
    let mags = x.magnitudes();
    let scale = mags.iter().cloned().fold(0.0, f64::max);
    write!(w, "P5\n# scale {scale:e}\n{n} {n}\n65535\n")?;
    let mut bytes = Vec::with_capacity(2 * mags.len());
    for m in mags {
        let v = if scale > 0.0 { (m / scale * MAXVAL).round() as u16 } else { 0 };
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Reads a square P5 image. Pixels are scaled back with the `# scale`
/// comment when present, otherwise returned divided by maxval.
pub fn read_pgm<R: Read>(r: R) -> Result<ComplexImage> {
    let mut data = Vec::new();
    BufReader::new(r).read_to_end(&mut data)?;
    let mut pos = 0;
    let mut tokens = Vec::new();
    let mut scale = None;
    while tokens.len() < 4 {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= data.len() {
            return Err(malformed("truncated PGM header"));
        }
        if data[pos] == b'#' {
            let end = data[pos..].iter().position(|&c| c == b'\n').map_or(data.len(), |e| pos + e);
            let comment = String::from_utf8_lossy(&data[pos + 1..end]).trim().to_string();
            if let Some(v) = comment.strip_prefix("scale") {
                scale = Some(v.trim().parse::<f64>().map_err(|_| malformed("bad scale comment"))?);
            }
            pos = end;
            continue;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        tokens.push(String::from_utf8_lossy(&data[start..pos]).to_string());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if tokens[0] != "P5" {
        return Err(malformed(format!("expected P5, found {}", tokens[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| malformed(format!("bad header field {s:?}")));
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if w != h {
        return Err(malformed(format!("image is {w}×{h}, expected square")));
    }
    if maxval != 65535 {
        return Err(malformed(format!("maxval {maxval}, expected 65535")));
    }
    let raster = data.get(pos..).unwrap_or(&[]);
    if raster.len() != 2 * w * h {
        return Err(Error::Shape { what: "PGM raster bytes", expected: 2 * w * h, found: raster.len() });
    }
    let unit = scale.unwrap_or(1.0) / MAXVAL;
    let values = raster
        .chunks_exact(2)
        .map(|c| C64::new(u16::from_be_bytes([c[0], c[1]]) as f64 * unit, 0.0))
        .collect();
    ComplexImage::new(w, values)
}

pub fn write_csv_image<W: Write>(x: &ComplexImage, osf: usize, mut w: W) -> Result<()> {
    writeln!(w, "{},{}", x.side(), osf)?;
    for z in x.values() {
        // shortest round-trip formatting
        writeln!(w, "{:?},{:?}", z.re, z.im)?;
    }
    w.flush()?;
    Ok(())
}

/// Returns the image and its recorded oversampling factor.
pub fn read_csv_image<R: Read>(r: R) -> Result<(ComplexImage, usize)> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().ok_or_else(|| malformed("empty image CSV"))??;
    let pair = |line: &str, lineno: usize| -> Result<(String, String)> {
        let mut parts = line.trim().split(',');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => Ok((a.trim().to_string(), b.trim().to_string())),
            _ => Err(Error::Parse { line: lineno, message: format!("expected two fields in {line:?}") }),
        }
    };
    let (n, osf) = pair(&header, 1)?;
    let bad = |lineno: usize, s: &str| Error::Parse { line: lineno, message: format!("bad number {s:?}") };
    let n: usize = n.parse().map_err(|_| bad(1, &n))?;
    let osf: usize = osf.parse().map_err(|_| bad(1, &osf))?;
    let mut values = Vec::with_capacity(n * n);
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = k + 2;
        let (re, im) = pair(&line, lineno)?;
        let re: f64 = re.parse().map_err(|_| bad(lineno, &re))?;
        let im: f64 = im.parse().map_err(|_| bad(lineno, &im))?;
        values.push(C64::new(re, im));
    }
    Ok((ComplexImage::new(n, values)?, osf))
}

fn is_pgm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Writes PGM for a `.pgm` extension and CSV otherwise.
pub fn write_image(x: &ComplexImage, osf: usize, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    if is_pgm(path) {
        write_pgm(x, file)
    } else {
        write_csv_image(x, osf, file)
    }
}

pub fn read_image(path: &Path) -> Result<ComplexImage> {
    let file = File::open(path)?;
    if is_pgm(path) {
        read_pgm(file)
    } else {
        Ok(read_csv_image(file)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ComplexImage {
        let v = (0..9).map(|k| C64::new(0.1 * k as f64 - 0.3, 1.0 / (k as f64 + 3.0))).collect();
        ComplexImage::new(3, v).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let x = sample();
        let mut buf = Vec::new();
        write_csv_image(&x, 2, &mut buf).unwrap();
        assert!(buf.starts_with(b"3,2\n"));
        let (y, osf) = read_csv_image(buf.as_slice()).unwrap();
        assert_eq!(osf, 2);
        assert_eq!(x, y);
    }

    #[test]
    fn constant_image_gives_flat_pgm() {
        let x = ComplexImage::new(4, vec![C64::new(0.0, 2.0); 16]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&x, &mut buf).unwrap();
        let raster = &buf[buf.len() - 32..];
        assert!(raster.chunks(2).all(|c| c == [0xff, 0xff]));
        let y = read_pgm(buf.as_slice()).unwrap();
        assert!(y.values().iter().all(|z| (z.re - 2.0).abs() < 1e-12 && z.im == 0.0));
    }

    #[test]
    fn pgm_keeps_magnitudes_to_quantization() {
        let x = sample();
        let mut buf = Vec::new();
        write_pgm(&x, &mut buf).unwrap();
        let y = read_pgm(buf.as_slice()).unwrap();
        let top = x.magnitudes().into_iter().fold(0.0, f64::max);
        for (a, b) in x.magnitudes().iter().zip(y.values()) {
            assert!((a - b.re).abs() <= 0.5 * top / MAXVAL + 1e-15);
        }
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert!(read_pgm(&b"P2\n2 2\n65535\n"[..]).is_err());
        assert!(read_pgm(&b"P5\n2 2\n65535\n\x00\x01"[..]).is_err());
        assert!(read_pgm(&b"P5\n2 3\n65535\n"[..]).is_err());
        assert!(read_csv_image(&b"2,1\n1.0,0.0\n"[..]).is_err());
        assert!(read_csv_image(&b"2,x\n"[..]).is_err());
        assert!(read_csv_image(&b"1,1\n1.0\n"[..]).is_err());
    }
}
