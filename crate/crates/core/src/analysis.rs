//! Spectral scoring of recovered coordinates.
//!
//! An embedding coordinate is a time series whose oscillation frequencies
//! reveal which hidden variable it tracks. This module computes one-sided
//! magnitude spectra of mean-removed, Hann-windowed series, extracts the
//! dominant peaks, and scores them against known ground-truth frequencies.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// One-sided magnitude spectrum of a real series.
#[derive(Debug, Clone)]
pub struct Spectrum {
    frequencies: Vec<f64>,
    magnitudes: Vec<f64>,
}

impl Spectrum {
    /// Frequency axis from 0 to Nyquist, `⌊N/2⌋ + 1` points.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Magnitudes matching [`Self::frequencies`].
    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Width of one frequency bin, `1 / (N · ts)`.
    pub fn bin_width(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }
}

/// One-sided magnitude spectrum of `series` sampled every `ts` seconds
/// (pass `ts = 1` for cycles/frame). The series is mean-removed and
/// Hann-windowed, so constant offsets vanish and leakage stays below the
/// peak-matching tolerance; bin `k` sits at `k / (N · ts)`.
pub fn spectrum(series: &[f64], ts: f64) -> Result<Spectrum> {
    let n = series.len();
    if n < 4 {
        return Err(Error::InsufficientSamples {
            required: 4,
            actual: n,
        });
    }
    if !(ts.is_finite() && ts > 0.0) {
        return Err(Error::DimensionMismatch(format!(
            "sampling interval must be positive: {ts}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteData);
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buffer: Vec<Complex<f64>> = series
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let window =
                0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos());
            Complex::new((v - mean) * window, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
    let bins = n / 2 + 1;
    let frequencies = (0..bins).map(|k| k as f64 / (n as f64 * ts)).collect();
    let magnitudes = buffer[..bins].iter().map(|c| c.norm()).collect();
    Ok(Spectrum {
        frequencies,
        magnitudes,
    })
}

/// A local maximum of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub frequency: f64,
    pub magnitude: f64,
    pub bin: usize,
}

/// Up to `count` strongest local maxima (DC excluded), greedily selected
/// so that chosen peaks are at least `min_separation_bins` apart; fewer
/// are returned when the spectrum has fewer maxima.
pub fn top_peaks(s: &Spectrum, count: usize, min_separation_bins: usize) -> Vec<Peak> {
    let mags = s.magnitudes();
    let mut candidates = Vec::new();
    for k in 1..mags.len() {
        let rising = mags[k] > mags[k - 1];
        let falling = k + 1 >= mags.len() || mags[k] >= mags[k + 1];
        if rising && falling {
            candidates.push(Peak {
                frequency: s.frequencies()[k],
                magnitude: mags[k],
                bin: k,
            });
        }
    }
    candidates.sort_by(|a, b| {
        b.magnitude
            .partial_cmp(&a.magnitude)
            .expect("finite magnitudes")
            .then(a.bin.cmp(&b.bin))
    });
    let mut chosen: Vec<Peak> = Vec::new();
    for peak in candidates {
        if chosen.len() == count {
            break;
        }
        if chosen
            .iter()
            .all(|c| c.bin.abs_diff(peak.bin) >= min_separation_bins)
        {
            chosen.push(peak);
        }
    }
    chosen
}

/// Spurious peaks must reach this fraction of the strongest peak to be
/// reported.
pub const SPURIOUS_RELATIVE_THRESHOLD: f64 = 0.3;

/// Outcome for one ground-truth frequency.
#[derive(Debug, Clone)]
pub struct TargetMatch {
    pub target: f64,
    pub hit: bool,
    /// The matching peak when hit.
    pub peak: Option<Peak>,
}

/// Score of a peak list against ground-truth frequencies.
#[derive(Debug, Clone)]
pub struct MatchReport {
    pub targets: Vec<TargetMatch>,
    /// Strong peaks (≥ [`SPURIOUS_RELATIVE_THRESHOLD`] of the maximum)
    /// matching no target.
    pub spurious: Vec<Peak>,
}

impl MatchReport {
    pub fn all_targets_hit(&self) -> bool {
        self.targets.iter().all(|t| t.hit)
    }

    pub fn hit_count(&self) -> usize {
        self.targets.iter().filter(|t| t.hit).count()
    }
}

/// Marks each target frequency hit when some peak lies within
/// `tol_bins · bin_width` of it, and reports strong unmatched peaks as
/// spurious.
pub fn match_frequencies(
    peaks: &[Peak],
    targets: &[f64],
    tol_bins: usize,
    bin_width: f64,
) -> Result<MatchReport> {
    if targets.is_empty() {
        return Err(Error::EmptyInput("target frequencies".into()));
    }
    let tol = tol_bins as f64 * bin_width + 1e-12;
    let matches_target = |p: &Peak| targets.iter().any(|t| (p.frequency - t).abs() <= tol);
    let targets = targets
        .iter()
        .map(|&target| {
            let peak = peaks
                .iter()
                .filter(|p| (p.frequency - target).abs() <= tol)
                .max_by(|a, b| {
                    a.magnitude
                        .partial_cmp(&b.magnitude)
                        .expect("finite magnitudes")
                })
                .copied();
            TargetMatch {
                target,
                hit: peak.is_some(),
                peak,
            }
        })
        .collect();
    let max_mag = peaks.iter().map(|p| p.magnitude).fold(0.0, f64::max);
    let spurious = peaks
        .iter()
        .filter(|p| p.magnitude >= SPURIOUS_RELATIVE_THRESHOLD * max_mag && !matches_target(p))
        .copied()
        .collect();
    Ok(MatchReport { targets, spurious })
}

/// Strongest magnitude within `tol_bins · bin_width` of `target`, relative
/// to the strongest magnitude anywhere (DC excluded from both).
///
/// Peak matching understates tones that sit closer together than the Hann
/// window's main lobe (two bins): such tones merge into one ridge with a
/// single local maximum, which can land within tolerance of only one of
/// them. Band magnitude instead asks whether the spectrum carries real
/// energy at the target, which survives the merge. Returns 0.0 when the
/// band is empty or the spectrum carries no energy off DC.
pub fn band_relative_magnitude(s: &Spectrum, target: f64, tol_bins: usize) -> f64 {
    let tol = tol_bins as f64 * s.bin_width() + 1e-12;
    let max = s.magnitudes()[1..].iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    s.frequencies()
        .iter()
        .zip(s.magnitudes())
        .skip(1)
        .filter(|(f, _)| (**f - target).abs() <= tol)
        .map(|(_, m)| m / max)
        .fold(0.0, f64::max)
}
