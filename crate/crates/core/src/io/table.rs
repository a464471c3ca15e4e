use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::IoError;
use crate::fit::{FitError, SliceOutcome};
use crate::optics::{Interferogram, InterferogramMeta};

/// Reads a plain-text image: one slice per line, values separated by
/// commas or whitespace. Blank lines and lines starting with `#` are skipped.
pub fn read_slice_csv(path: &Path, meta: InterferogramMeta) -> Result<Interferogram, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_slice_csv(&text, path, meta)
}

pub fn parse_slice_csv(text: &str, path: &Path, meta: InterferogramMeta) -> Result<Interferogram, IoError> {
    let mut width = None;
    let mut pixels = Vec::new();
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = pixels.len();
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .map_err(|_| IoError::format(path, format!("line {}: bad number {tok:?}", lineno + 1)))?;
            pixels.push(v);
        }
        let n = pixels.len() - before;
        match width {
            None => width = Some(n),
            Some(w) if w != n => {
                return Err(IoError::format(path, format!("line {}: {n} values, expected {w}", lineno + 1)));
            }
            _ => {}
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| IoError::format(path, "no data rows"))?;
    Interferogram::from_pixels(width, rows, pixels, meta)
        .ok_or_else(|| IoError::format(path, "negative or non-finite pixel values"))
}

const HEADER: &str = "image,slice,status,background,amplitude,envelope_rate,envelope_center,visibility,wavenumber,phase,residual_norm,iterations,phase_indeterminate,mean_intensity,error";

/// One row per slice fit. `rows_per_image` maps the flat result index back
/// to (image, slice).
pub fn slice_table_csv(results: &[SliceOutcome], rows_per_image: usize) -> String {
    let mut out = String::with_capacity(160 * (results.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    let per = rows_per_image.max(1);
    for (i, r) in results.iter().enumerate() {
        let (image, slice) = (i / per, i % per);
        match r {
            Ok(f) => {
                let p = &f.params;
                let _ = writeln!(
                    out,
                    "{image},{slice},ok,{},{},{},{},{},{},{},{},{},{},{},",
                    p.background,
                    p.amplitude,
                    p.envelope_rate,
                    p.envelope_center,
                    p.visibility,
                    p.wavenumber,
                    p.phase,
                    f.residual_norm,
                    f.iterations,
                    f.phase_indeterminate,
                    f.mean_intensity
                );
            }
            Err(e) => {
                let cols = match e {
                    FitError::NonConvergence { last, iterations } => format!(
                        "{},{},{},{},{},{},{},,{iterations},,",
                        last.background,
                        last.amplitude,
                        last.envelope_rate,
                        last.envelope_center,
                        last.visibility,
                        last.wavenumber,
                        last.phase
                    ),
                    _ => ",,,,,,,,,,".to_string(),
                };
                let msg = e.to_string().replace(',', ";");
                let _ = writeln!(out, "{image},{slice},failed,{cols},{msg}");
            }
        }
    }
    out
}

pub fn write_slice_table(path: &Path, results: &[SliceOutcome], rows_per_image: usize) -> Result<(), IoError> {
    fs::write(path, slice_table_csv(results, rows_per_image)).map_err(|e| IoError::io(path, e))
}
