//! Moving-average filtering of an innovation window: `y_r = Σ_s c_s x_{s+r}`
//! for `r = 0, …, outputs - 1`.
//!
//! Small problems are done directly; large ones go through a zero-padded FFT
//! whose coefficient spectrum is computed once and shared across paths.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::sum::Accumulator;

/// Above this many multiply-adds the FFT path is used.
pub const DIRECT_LIMIT: usize = 1 << 24;

#[derive(Clone)]
pub enum Filter {
    Direct { coeffs: Vec<f64>, outputs: usize },
    Fft(Arc<FftFilter>),
}

impl std::fmt::Debug for Filter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Filter::Direct { coeffs, outputs } => {
                write!(f, "Direct {{ taps: {}, outputs: {outputs} }}", coeffs.len())
            }
            Filter::Fft(p) => write!(f, "Fft {{ taps: {}, outputs: {}, size: {} }}", p.taps, p.outputs, p.size),
        }
    }
}

impl Filter {
    /// Chooses direct or FFT evaluation by the `outputs · taps` operation count.
    pub fn new(coeffs: &[f64], outputs: usize) -> Self {
        if outputs.saturating_mul(coeffs.len()) <= DIRECT_LIMIT {
            Filter::direct(coeffs, outputs)
        } else {
            Filter::fft(coeffs, outputs)
        }
    }

    pub fn direct(coeffs: &[f64], outputs: usize) -> Self {
        Filter::Direct { coeffs: coeffs.to_vec(), outputs }
    }

    pub fn fft(coeffs: &[f64], outputs: usize) -> Self {
        Filter::Fft(Arc::new(FftFilter::new(coeffs, outputs)))
    }

    pub fn is_fft(&self) -> bool {
        matches!(self, Filter::Fft(_))
    }

    /// `y_r = Σ_s c_s x_{s+r}` with `x` taken as zero past its end.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Filter::Direct { coeffs, outputs } => correlate_direct(coeffs, x, *outputs),
            Filter::Fft(p) => p.apply(x),
        }
    }
}

fn correlate_direct(c: &[f64], x: &[f64], outputs: usize) -> Vec<f64> {
    (0..outputs)
        .map(|r| {
            let mut acc = Accumulator::new();
            let len = c.len().min(x.len().saturating_sub(r));
            for s in 0..len {
                acc.add(c[s] * x[s + r]);
            }
            acc.value()
        })
        .collect()
}

pub struct FftFilter {
    taps: usize,
    outputs: usize,
    size: usize,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftFilter {
    fn new(coeffs: &[f64], outputs: usize) -> Self {
        let taps = coeffs.len();
        // only x[..taps + outputs - 1] matters, and the outputs read from the
        // circular convolution are clear of wrap-around once size ≥ taps + outputs - 1
        let size = (taps + outputs).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut spectrum: Vec<Complex<f64>> =
            (0..size).map(|i| Complex::new(if i < taps { coeffs[i] } else { 0.0 }, 0.0)).collect();
        forward.process(&mut spectrum);
        FftFilter { taps, outputs, size, spectrum, forward, inverse }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        // correlation as convolution with the reversed signal: y_r = (c * x')[m-1-r]
        let m = x.len().min(self.size);
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); self.size];
        for (u, slot) in buf.iter_mut().take(m).enumerate() {
            *slot = Complex::new(x[m - 1 - u], 0.0);
        }
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        (0..self.outputs)
            .map(|r| if r < m { buf[m - 1 - r].re * scale } else { 0.0 })
            .collect()
    }
}
