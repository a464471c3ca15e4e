use std::fs;
use std::path::Path;

use super::IoError;
use crate::optics::{Interferogram, InterferogramMeta};

pub const PGM_MAXVAL: u16 = u16::MAX;

/// Binary PGM (P5, maxval 65535, big-endian samples). Pixels are rounded
/// and clipped to `0..=65535`; the number of clipped pixels is returned.
pub fn encode_pgm(image: &Interferogram) -> (Vec<u8>, usize) {
    let mut out = format!("P5\n{} {}\n{}\n", image.width(), image.rows(), PGM_MAXVAL).into_bytes();
    out.reserve(2 * image.pixels().len());
    let mut clipped = 0;
    for &p in image.pixels() {
        let r = p.round();
        if r > f64::from(PGM_MAXVAL) {
            clipped += 1;
        }
        out.extend_from_slice(&(r.clamp(0.0, f64::from(PGM_MAXVAL)) as u16).to_be_bytes());
    }
    (out, clipped)
}

pub fn write_pgm(path: &Path, image: &Interferogram) -> Result<usize, IoError> {
    let (bytes, clipped) = encode_pgm(image);
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))?;
    Ok(clipped)
}

pub fn read_pgm(path: &Path, meta: InterferogramMeta) -> Result<Interferogram, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_pgm(&bytes, path, meta)
}

/// Parses a binary PGM with any maxval; samples are returned as raw counts.
pub fn decode_pgm(bytes: &[u8], path: &Path, meta: InterferogramMeta) -> Result<Interferogram, IoError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(IoError::BadMagic {
            path: path.to_path_buf(),
            found,
        });
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        fields[i] = header_number(bytes, &mut pos).ok_or_else(|| IoError::format(path, format!("bad PGM {name}")))?;
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(IoError::format(path, "missing whitespace after PGM header"));
    }
    pos += 1;
    let [width, rows, maxval] = fields;
    if width == 0 || rows == 0 || maxval == 0 || maxval > usize::from(PGM_MAXVAL) {
        return Err(IoError::format(path, format!("unsupported PGM geometry {width}x{rows} maxval {maxval}")));
    }
    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let need = width * rows * sample_bytes;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(IoError::format(path, format!("truncated raster: {} of {need} bytes", raster.len())));
    }
    let pixels: Vec<f64> = if sample_bytes == 1 {
        raster[..need].iter().map(|&b| f64::from(b)).collect()
    } else {
        raster[..need]
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])))
            .collect()
    };
    Interferogram::from_pixels(width, rows, pixels, meta).ok_or_else(|| IoError::format(path, "inconsistent image"))
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Option<usize> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::InterferometerConfig;

    fn meta() -> InterferogramMeta {
        InterferogramMeta {
            config: InterferometerConfig::default(),
            source: None,
            preparation: None,
            image_index: 0,
        }
    }

    #[test]
    fn round_trip() {
        let px: Vec<f64> = (0..12).map(|i| (i * 6000) as f64).collect();
        let img = Interferogram::from_pixels(4, 3, px.clone(), meta()).unwrap();
        let (bytes, clipped) = encode_pgm(&img);
        assert_eq!(clipped, 1);
        assert!(bytes.starts_with(b"P5\n4 3\n65535\n"));
        let back = decode_pgm(&bytes, Path::new("x.pgm"), meta()).unwrap();
        assert_eq!(back.pixels()[..11], px[..11]);
        assert_eq!(back.pixels()[11], 65535.0);
    }

    #[test]
    fn header_comments_and_8_bit() {
        let mut bytes = b"P5 # made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[7, 200]);
        let img = decode_pgm(&bytes, Path::new("x.pgm"), meta()).unwrap();
        assert_eq!(img.pixels(), &[7.0, 200.0]);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let err = decode_pgm(b"P2\n1 1\n255\n0", Path::new("a.pgm"), meta()).unwrap_err();
        assert!(matches!(err, IoError::BadMagic { ref found, .. } if found == "P2"));
        let err = decode_pgm(b"P5\n4 4\n65535\n\0\0", Path::new("a.pgm"), meta()).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }
}
