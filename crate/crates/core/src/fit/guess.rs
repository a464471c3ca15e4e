//! Starting points for the fringe fit.
//!
//! The envelope comes from intensity moments of the background-subtracted
//! slice. The carrier frequency comes from the magnitude spectrum of what is
//! left after the envelope is removed; phase and visibility then follow
//! from a linear projection on `g·cos kx` and `g·sin kx`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, Matrix4, Vector4};
use std::cell::RefCell;

use rustfft::{num_complex::Complex, FftPlanner};

use super::lm::{minimize, LeastSquares, LmOptions};
use super::{FitError, FringeParams};

pub const MIN_SLICE_LEN: usize = 16;
/// Visibility guesses are clamped into this range.
const VIS_GUESS_RANGE: (f64, f64) = (0.05, 1.0);

/// Best single starting point for [`super::fit_slice`].
pub fn initial_guess(slice: &[f64]) -> Result<FringeParams, FitError> {
    Ok(guess_candidates(slice, 1)?.remove(0).1)
}

pub(crate) fn check_slice(slice: &[f64]) -> Result<(), FitError> {
    if slice.len() < MIN_SLICE_LEN {
        return Err(FitError::TooShort { len: slice.len() });
    }
    if slice.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Err(FitError::Degenerate);
    }
    Ok(())
}

/// Up to `max` starting points with the residual sum of squares of their
/// linear projection, best first.
pub(crate) fn guess_candidates(slice: &[f64], max: usize) -> Result<Vec<(f64, FringeParams)>, FitError> {
    check_slice(slice)?;
    let n = slice.len();
    let xs: Vec<f64> = (0..n).map(|x| x as f64).collect();

    let mut sorted = slice.to_vec();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[n / 20];

    let weights: Vec<f64> = slice.iter().map(|&y| (y - floor).max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(FitError::Degenerate);
    }
    let center = xs.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>() / total;
    let var = xs.iter().zip(&weights).map(|(x, w)| (x - center).powi(2) * w).sum::<f64>() / total;
    let rate = 0.5 / var.max(1.0);
    let moment_env: Vec<f64> = xs.iter().map(|x| (-rate * (x - center).powi(2)).exp()).collect();
    let (b0, a0) = linear_envelope_fit(slice, &moment_env, floor);

    // refine on the fringe-free model so the carrier search sees a clean residual
    let first = refine_envelope(slice, [b0, a0, rate, center]);
    let mut ranked = carrier_candidates(slice, &xs, first, max);

    // A few long fringes can pull the envelope onto one bright lobe. Averaging
    // over one period of the best carrier removes the fringes; refit the
    // envelope on that and search again.
    if let Some(k) = ranked.first().map(|(_, p)| p.wavenumber) {
        let smooth = box_smooth(slice, TAU / k);
        let second = refine_envelope(&smooth, [b0, a0, rate, center]);
        if second != first {
            ranked.extend(carrier_candidates(slice, &xs, second, max));
        }
    }
    if ranked.is_empty() {
        let [background, amplitude, rate, center] = first;
        ranked.push((
            f64::INFINITY,
            FringeParams {
                background,
                amplitude,
                envelope_rate: rate,
                envelope_center: center,
                visibility: VIS_GUESS_RANGE.0,
                wavenumber: TAU / 8.0,
                phase: 0.0,
            },
        ));
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    ranked.dedup_by(|a, b| (a.1.wavenumber - b.1.wavenumber).abs() < 1e-9 && a.1.envelope_rate == b.1.envelope_rate);
    ranked.truncate(max.max(1));
    Ok(ranked)
}

/// Fringe-free envelope `[B, A, c, m]` fitted from `start`; falls back to
/// `start` when the fit leaves the slice or goes non-finite.
fn refine_envelope(data: &[f64], start: [f64; 4]) -> [f64; 4] {
    let n = data.len();
    let refined = minimize(
        &EnvelopeProblem { slice: data },
        &start,
        &LmOptions {
            max_iterations: 30,
            ..Default::default()
        },
    );
    if refined.params.iter().all(|v| v.is_finite()) && refined.params[2] > 0.0 && (0.0..n as f64).contains(&refined.params[3]) {
        refined.params.try_into().expect("four parameters")
    } else {
        start
    }
}

/// Strongest carriers of the envelope-subtracted slice, each projected onto
/// the fixed envelope.
fn carrier_candidates(slice: &[f64], xs: &[f64], env: [f64; 4], max: usize) -> Vec<(f64, FringeParams)> {
    let [background, amplitude, rate, center] = env;
    let envelope: Vec<f64> = xs.iter().map(|x| (-rate * (x - center).powi(2)).exp()).collect();
    let amplitude = amplitude.max(1e-9 * slice.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0));
    let detrended: Vec<f64> = slice
        .iter()
        .zip(&envelope)
        .map(|(y, g)| y - background - amplitude * g)
        .collect();
    spectral_peaks(&detrended, max.max(1) + 1)
        .into_iter()
        .filter_map(|k| project(slice, xs, &envelope, rate, center, k))
        .collect()
}

/// Centred moving average over `width` pixels with fractional end weights,
/// truncated at the slice edges.
fn box_smooth(data: &[f64], width: f64) -> Vec<f64> {
    let n = data.len();
    let half = 0.5 * width.max(1.0);
    (0..n)
        .map(|i| {
            let (lo, hi) = (i as f64 - half, i as f64 + half);
            let (mut sum, mut weight) = (0.0, 0.0);
            let first = lo.floor().max(0.0) as usize;
            let last = (hi.ceil() as usize).min(n - 1);
            for (j, &y) in data.iter().enumerate().take(last + 1).skip(first) {
                // overlap of pixel [j − ½, j + ½] with the window
                let w = ((j as f64 + 0.5).min(hi) - (j as f64 - 0.5).max(lo)).clamp(0.0, 1.0);
                sum += w * y;
                weight += w;
            }
            sum / weight
        })
        .collect()
}

/// Background and amplitude from a two-term linear fit on a fixed envelope.
fn linear_envelope_fit(slice: &[f64], envelope: &[f64], floor: f64) -> (f64, f64) {
    let n = slice.len() as f64;
    let sg: f64 = envelope.iter().sum();
    let sgg: f64 = envelope.iter().map(|g| g * g).sum();
    let sy: f64 = slice.iter().sum();
    let sgy: f64 = slice.iter().zip(envelope).map(|(y, g)| y * g).sum();
    let det = n * sgg - sg * sg;
    if det.abs() < 1e-12 * n * sgg {
        (floor, slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - floor)
    } else {
        ((sgg * sy - sg * sgy) / det, (n * sgy - sg * sy) / det)
    }
}

/// `B + A·exp(−c(x − m)²)`, parameters `[B, A, c, m]`.
struct EnvelopeProblem<'a> {
    slice: &'a [f64],
}

impl LeastSquares for EnvelopeProblem<'_> {
    fn n_params(&self) -> usize {
        4
    }

    fn n_residuals(&self) -> usize {
        self.slice.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (x, (o, &y)) in out.iter_mut().zip(self.slice).enumerate() {
            let d = x as f64 - p[3];
            *o = p[0] + p[1] * (-p[2] * d * d).exp() - y;
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        for x in 0..self.slice.len() {
            let d = x as f64 - p[3];
            let g = (-p[2] * d * d).exp();
            out[(x, 0)] = 1.0;
            out[(x, 1)] = g;
            out[(x, 2)] = -p[1] * g * d * d;
            out[(x, 3)] = 2.0 * p[1] * p[2] * g * d;
        }
    }

    fn project(&self, p: &mut [f64]) {
        p[1] = p[1].max(0.0);
        p[2] = p[2].max(1e-12);
    }
}

/// Wavenumbers of the strongest local maxima of the zero-padded magnitude
/// spectrum, ignoring periods longer than half the slice.
fn spectral_peaks(signal: &[f64], count: usize) -> Vec<f64> {
    let n = signal.len();
    let len = (4 * n).next_power_of_two();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    thread_local! {
        static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len)).process(&mut buf);
    let mag: Vec<f64> = buf[..=len / 2].iter().map(|z| z.norm()).collect();

    // period ≥ 3 px up to n/2 px
    let lo = ((2 * len) as f64 / n as f64).ceil() as usize;
    let hi = ((len as f64 / 3.0).floor() as usize).min(len / 2 - 1);
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for b in lo.max(1)..=hi {
        if mag[b] >= mag[b - 1] && mag[b] > mag[b + 1] {
            // parabolic interpolation on the magnitude
            let (l, c, r) = (mag[b - 1], mag[b], mag[b + 1]);
            let denom = l - 2.0 * c + r;
            let offset = if denom.abs() > 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
            peaks.push((c, TAU * (b as f64 + offset) / len as f64));
        }
    }
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
    peaks.truncate(count);
    peaks.into_iter().map(|(_, k)| k).collect()
}

/// Linear least squares on `{1, g, g cos kx, g sin kx}` for fixed envelope
/// and carrier. Returns the residual sum of squares and the parameters.
fn project(slice: &[f64], xs: &[f64], envelope: &[f64], rate: f64, center: f64, k: f64) -> Option<(f64, FringeParams)> {
    let mut ata = Matrix4::<f64>::zeros();
    let mut aty = Vector4::<f64>::zeros();
    let mut rows = Vec::with_capacity(slice.len());
    for ((&x, &g), &y) in xs.iter().zip(envelope).zip(slice) {
        let (s, c) = (k * x).sin_cos();
        let row = Vector4::new(1.0, g, g * c, g * s);
        ata += row * row.transpose();
        aty += row * y;
        rows.push(row);
    }
    let sol = ata.cholesky()?.solve(&aty);
    let rss: f64 = rows.iter().zip(slice).map(|(r, y)| (r.dot(&sol) - y).powi(2)).sum();
    let (background, amplitude, p, q) = (sol[0], sol[1], sol[2], sol[3]);
    if !(amplitude > 0.0) {
        return None;
    }
    let visibility = ((p * p + q * q).sqrt() / amplitude).clamp(VIS_GUESS_RANGE.0, VIS_GUESS_RANGE.1);
    Some((
        rss,
        FringeParams {
            background,
            amplitude,
            envelope_rate: rate,
            envelope_center: center,
            visibility,
            wavenumber: k,
            phase: (-q).atan2(p),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(p: &FringeParams, n: usize) -> Vec<f64> {
        (0..n).map(|x| p.eval(x as f64)).collect()
    }

    fn truth() -> FringeParams {
        FringeParams {
            background: 20.0,
            amplitude: 7500.0,
            envelope_rate: 0.5 / (48.0 * 48.0),
            envelope_center: 128.0,
            visibility: 0.6,
            wavenumber: TAU / 12.0,
            phase: 0.9,
        }
    }

    #[test]
    fn carrier_within_one_bin() {
        for &period in &[4.0, 6.5, 12.0, 31.0, 64.0] {
            let p = FringeParams {
                wavenumber: TAU / period,
                ..truth()
            };
            let g = initial_guess(&sample(&p, 256)).unwrap();
            assert!((g.wavenumber - p.wavenumber).abs() < TAU / 256.0, "period {period}: {g:?}");
        }
    }

    #[test]
    fn flat_envelope_gives_lower_clamp() {
        let p = FringeParams {
            visibility: 0.0,
            ..truth()
        };
        let g = initial_guess(&sample(&p, 256)).unwrap();
        assert_eq!(g.visibility, VIS_GUESS_RANGE.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(initial_guess(&[5.0; 64]), Err(FitError::Degenerate)));
        assert!(matches!(initial_guess(&[1.0; 8]), Err(FitError::TooShort { len: 8 })));
        let mut s = sample(&truth(), 64);
        s[3] = f64::NAN;
        assert!(matches!(initial_guess(&s), Err(FitError::NonFinite)));
    }
}
