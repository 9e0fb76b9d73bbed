//! Windowed power spectra of uniformly sampled series.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// One-sided power spectrum of `x` (mean removed, Hann window, zero padded
/// by `pad`). Returns (angular frequency step, powers).
pub fn power_spectrum(x: &[f64], dt: f64, pad: usize) -> (f64, Vec<f64>) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let len = (n * pad.max(1)).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); len];
    for (i, v) in x.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1).max(1) as f64).cos();
        buf[i] = Complex::new((v - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let power = buf[..len / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
    (2.0 * std::f64::consts::PI / (len as f64 * dt), power)
}

/// Vertex of the parabola through the log-power at `k − 1`, `k`, `k + 1`, in
/// bins relative to `k`.
pub fn interpolate_peak(power: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 >= power.len() {
        return 0.0;
    }
    let tiny = f64::MIN_POSITIVE;
    let (a, b, c) = (
        power[k - 1].max(tiny).ln(),
        power[k].max(tiny).ln(),
        power[k + 1].max(tiny).ln(),
    );
    let denom = a - 2.0 * b + c;
    if denom == 0.0 {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    }
}
