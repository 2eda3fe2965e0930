//! Band-pass filtering and epoch windowing applied before covariance
//! estimation.
//!
//! The band-pass is a Butterworth design realized as cascaded second-order
//! sections: analog prototype poles, lowpass-to-bandpass transform, then a
//! bilinear transform with frequency pre-warping so the -3 dB points land on
//! the requested edges. Filtering is causal (forward-only) by default; a
//! forward-backward variant is available for offline zero-phase use.

use nalgebra::Complex;

use crate::dataio::{Trial, TrialSet};
use crate::error::{Error, Result};
use crate::par;

type C64 = Complex<f64>;

/// One biquad: transfer (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

/// A designed IIR band-pass filter as a cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct IirFilterSpec {
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub fs: f64,
    pub sections: Vec<Sos>,
}

/// Designs a Butterworth band-pass filter of the given order.
///
/// `order` counts prototype poles; the band-pass has 2*order poles in
/// `order` second-order sections. Pre-warping puts the -3 dB points at
/// `low_hz` and `high_hz` exactly (up to rounding).
pub fn design_bandpass(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Result<IirFilterSpec> {
    if order < 1 {
        return Err(Error::InvalidInput("filter order must be >= 1".into()));
    }
    if !(fs > 0.0) || !fs.is_finite() {
        return Err(Error::InvalidInput(format!("invalid sampling rate {fs}")));
    }
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0) {
        return Err(Error::InvalidInput(format!(
            "band edges must satisfy 0 < low < high < fs/2; got {low_hz}..{high_hz} at fs {fs}"
        )));
    }

    let n = order;
    // Pre-warped analog edge frequencies (rad/s) for the bilinear transform.
    let fs2 = 2.0 * fs;
    let wl = fs2 * (std::f64::consts::PI * low_hz / fs).tan();
    let wh = fs2 * (std::f64::consts::PI * high_hz / fs).tan();
    let bw = wh - wl;
    let w0sq = wl * wh;

    // Butterworth prototype pole representatives with non-negative imaginary
    // part; conjugates are taken explicitly below so section coefficients
    // come out exactly real.
    let mut sections_poles: Vec<(C64, C64)> = Vec::with_capacity(n);
    for k in 0..n {
        let theta = std::f64::consts::PI * (2.0 * k as f64 + n as f64 + 1.0) / (2.0 * n as f64);
        let p = C64::new(theta.cos(), theta.sin());
        if p.im < -1e-12 {
            continue; // conjugate of an earlier representative
        }
        if p.re >= 0.0 {
            return Err(Error::UnstableFilter(
                "prototype pole not in the left half-plane".into(),
            ));
        }
        // Lowpass-to-bandpass: each prototype pole p maps to the roots of
        // s^2 - p*bw*s + w0^2.
        let q = p * (bw / 2.0);
        let disc = (q * q - C64::new(w0sq, 0.0)).sqrt();
        let bp = [q + disc, q - disc];
        if p.im > 1e-12 {
            // Complex representative: each band-pass root pairs with its own
            // mirror from the conjugate prototype pole.
            for root in bp {
                sections_poles.push((root, root.conj()));
            }
        } else if bp[0].im.abs() > 1e-12 {
            // Real prototype pole, complex band-pass pair.
            let root = if bp[0].im > 0.0 { bp[0] } else { bp[1] };
            sections_poles.push((root, root.conj()));
        } else {
            // Real prototype pole, two real band-pass poles.
            sections_poles.push((C64::new(bp[0].re, 0.0), C64::new(bp[1].re, 0.0)));
        }
    }
    debug_assert_eq!(sections_poles.len(), n);

    // Bilinear transform of each pole; zeros are n at z=1 (from s=0) plus n
    // at z=-1, one of each per section, so every numerator is g*(z^2 - 1).
    // Gain: k_analog = bw^n; the bilinear substitution multiplies by
    // (fs2 - s_zero)/(fs2 - s_pole) over all analog zeros and poles.
    let mut digital: Vec<(C64, C64)> = Vec::with_capacity(n);
    let mut denom_prod = 1.0f64;
    for &(p1, p2) in &sections_poles {
        if p1.re >= 0.0 || p2.re >= 0.0 {
            return Err(Error::UnstableFilter("analog pole in right half-plane".into()));
        }
        let pair_prod = if p2 == p1.conj() && p1.im != 0.0 {
            let d = C64::new(fs2, 0.0) - p1;
            (d * d.conj()).re
        } else {
            (fs2 - p1.re) * (fs2 - p2.re)
        };
        denom_prod *= pair_prod;
        let d1 = (C64::new(fs2, 0.0) + p1) / (C64::new(fs2, 0.0) - p1);
        let d2 = (C64::new(fs2, 0.0) + p2) / (C64::new(fs2, 0.0) - p2);
        digital.push((d1, d2));
    }
    let k = bw.powi(n as i32) * fs2.powi(n as i32) / denom_prod;
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::UnstableFilter(format!("non-positive cascade gain {k}")));
    }
    let g = k.powf(1.0 / n as f64);

    let mut sections = Vec::with_capacity(n);
    for &(d1, d2) in &digital {
        if d1.norm() >= 1.0 || d2.norm() >= 1.0 {
            return Err(Error::UnstableFilter("digital pole on or outside the unit circle".into()));
        }
        let (a1, a2) = if d2 == d1.conj() && d1.im != 0.0 {
            (-2.0 * d1.re, (d1 * d1.conj()).re)
        } else {
            (-(d1.re + d2.re), d1.re * d2.re)
        };
        sections.push(Sos { b: [g, 0.0, -g], a: [a1, a2] });
    }
    // Innermost poles first; response is order-independent, state growth is not.
    sections.sort_by(|x, y| {
        let rx = x.a[1].abs();
        let ry = y.a[1].abs();
        rx.partial_cmp(&ry).expect("finite pole radii")
    });

    Ok(IirFilterSpec { order, low_hz, high_hz, fs, sections })
}

impl IirFilterSpec {
    /// Complex frequency response at `f_hz`.
    pub fn response(&self, f_hz: f64) -> C64 {
        let w = 2.0 * std::f64::consts::PI * f_hz / self.fs;
        let z1 = C64::new(w.cos(), -w.sin());
        let z2 = z1 * z1;
        let mut h = C64::new(1.0, 0.0);
        for s in &self.sections {
            let num = C64::new(s.b[0], 0.0) + z1 * s.b[1] + z2 * s.b[2];
            let den = C64::new(1.0, 0.0) + z1 * s.a[0] + z2 * s.a[1];
            h = h * num / den;
        }
        h
    }

    /// Magnitude response at `f_hz`.
    pub fn magnitude(&self, f_hz: f64) -> f64 {
        self.response(f_hz).norm()
    }

    /// Runs one channel through the cascade, zero initial state (causal).
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = x.to_vec();
        for s in &self.sections {
            let (b0, b1, b2) = (s.b[0], s.b[1], s.b[2]);
            let (a1, a2) = (s.a[0], s.a[1]);
            let mut w1 = 0.0f64;
            let mut w2 = 0.0f64;
            for v in y.iter_mut() {
                let x_in = *v;
                let out = b0 * x_in + w1;
                w1 = b1 * x_in - a1 * out + w2;
                w2 = b2 * x_in - a2 * out;
                *v = out;
            }
        }
        y
    }

    fn run_zero_phase(&self, x: &[f64]) -> Vec<f64> {
        let mut fwd = self.run(x);
        fwd.reverse();
        let mut back = self.run(&fwd);
        back.reverse();
        back
    }
}

/// Filters every channel of a trial independently, forward-only.
pub fn apply_filter(trial: &Trial, spec: &IirFilterSpec) -> Result<Trial> {
    apply_filter_impl(trial, spec, false)
}

/// Forward-backward filtering: zero phase, squared magnitude response.
/// Not causal; offline use only.
pub fn apply_filter_zero_phase(trial: &Trial, spec: &IirFilterSpec) -> Result<Trial> {
    apply_filter_impl(trial, spec, true)
}

fn apply_filter_impl(trial: &Trial, spec: &IirFilterSpec, zero_phase: bool) -> Result<Trial> {
    if trial.fs != spec.fs {
        return Err(Error::FsMismatch { expected: spec.fs, got: trial.fs });
    }
    let mut out = trial.clone();
    for ch in 0..trial.n_channels() {
        let x: Vec<f64> = trial.data.row(ch).iter().copied().collect();
        let y = if zero_phase { spec.run_zero_phase(&x) } else { spec.run(&x) };
        for (s, v) in y.into_iter().enumerate() {
            out.data[(ch, s)] = v;
        }
    }
    Ok(out)
}

/// Filters all trials of a set; trials are processed independently.
pub fn filter_set(set: &TrialSet, spec: &IirFilterSpec, zero_phase: bool) -> Result<TrialSet> {
    let filtered = par::map_slice(&set.trials, |t| apply_filter_impl(t, spec, zero_phase));
    let mut trials = Vec::with_capacity(filtered.len());
    for t in filtered {
        trials.push(t?);
    }
    Ok(TrialSet { n_classes: set.n_classes, fs: set.fs, trials })
}

/// Extracts the samples in [start_s, end_s) from a trial.
/// The output has round((end_s - start_s) * fs) samples.
pub fn epoch(trial: &Trial, start_s: f64, end_s: f64) -> Result<Trial> {
    let t = trial.n_samples();
    let duration = t as f64 / trial.fs;
    if !(start_s >= 0.0 && start_s < end_s && end_s <= duration + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "epoch window {start_s}..{end_s} s outside recording of {duration} s"
        )));
    }
    let start = (start_s * trial.fs).round() as usize;
    let count = ((end_s - start_s) * trial.fs).round() as usize;
    if count < 2 || start + count > t {
        return Err(Error::InvalidInput(format!(
            "epoch window {start_s}..{end_s} s maps to samples {start}..{} of {t}",
            start + count
        )));
    }
    let mut out = trial.clone();
    out.data = trial.data.columns(start, count).into_owned();
    Ok(out)
}

/// Applies the same epoch window to every trial.
pub fn epoch_set(set: &TrialSet, start_s: f64, end_s: f64) -> Result<TrialSet> {
    let mut trials = Vec::with_capacity(set.trials.len());
    for t in &set.trials {
        trials.push(epoch(t, start_s, end_s)?);
    }
    Ok(TrialSet { n_classes: set.n_classes, fs: set.fs, trials })
}
