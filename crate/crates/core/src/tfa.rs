//! Time-frequency analysis: windows, STFT, Wigner-Ville distribution and the
//! piecewise-adaptive Gabor STFT driven by a [`WindowSchedule`].

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, shape, Result};

/// Relative width of the Gaussian window: std = sigma * (L - 1) / 2.
pub const DEFAULT_GAUSSIAN_SIGMA: f64 = 0.3;
pub const SCHEDULE_SECTIONS: usize = 16;
pub const MIN_WINDOW: usize = 16;
pub const MAX_WINDOW: usize = 127;
pub const DEFAULT_HOP: usize = 16;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_forward(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub(crate) fn fft_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// A nonnegative time-frequency image. Row 0 is the lowest frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct TfGrid {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    /// Column spacing in samples.
    pub time_step: f64,
    /// Row spacing in cycles per sample.
    pub freq_step: f64,
}

impl TfGrid {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, time_step: f64, freq_step: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("grid dimensions must be positive"));
        }
        if values.len() != rows * cols {
            return Err(shape(format!("{} values for a {rows}x{cols} grid", values.len())));
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(invalid(format!("grid values must be finite and nonnegative, found {bad}")));
        }
        Ok(Self { rows, cols, values, time_step, freq_step })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols], 1.0, 1.0)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Affine map onto [0, 1]; a constant grid maps to zeros.
    pub fn min_max_scaled(&self) -> TfGrid {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        let values = if span > 0.0 {
            self.values.iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect()
        } else {
            vec![0.0; self.values.len()]
        };
        TfGrid { values, ..self.clone() }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Scales values to unit sum; an all-zero grid is returned unchanged.
    pub fn unit_sum(&self) -> TfGrid {
        let s = self.sum();
        let values = if s > 0.0 {
            self.values.iter().map(|v| v / s).collect()
        } else {
            self.values.clone()
        };
        TfGrid { values, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Gaussian,
    Rectangular,
    Hanning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    kind: WindowKind,
    sigma: f64,
    coeffs: Vec<f64>,
}

pub fn make_window(kind: WindowKind, length: usize) -> Result<Window> {
    match kind {
        WindowKind::Gaussian => Window::gaussian(length, DEFAULT_GAUSSIAN_SIGMA),
        WindowKind::Rectangular => {
            check_window_length(length)?;
            Ok(Window { kind, sigma: 0.0, coeffs: vec![1.0; length] })
        }
        WindowKind::Hanning => {
            check_window_length(length)?;
            let m = (length - 1) as f64;
            let coeffs = (0..length).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / m).cos()).collect();
            Ok(Window { kind, sigma: 0.0, coeffs })
        }
    }
}

fn check_window_length(length: usize) -> Result<()> {
    if length < 2 {
        return Err(invalid(format!("window length must be >= 2, got {length}")));
    }
    Ok(())
}

impl Window {
    pub fn gaussian(length: usize, sigma: f64) -> Result<Self> {
        check_window_length(length)?;
        if !(sigma > 0.0) {
            return Err(invalid("gaussian sigma must be positive"));
        }
        let half = (length - 1) as f64 / 2.0;
        let coeffs = (0..length)
            .map(|n| {
                let u = (n as f64 - half) / (sigma * half);
                (-0.5 * u * u).exp()
            })
            .collect();
        Ok(Self { kind: WindowKind::Gaussian, sigma, coeffs })
    }

    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// RMS duration (samples) times RMS bandwidth (cycles/sample) of the
    /// energy densities |h|^2 and |H|^2; bounded below by 1/(4 pi).
    pub fn time_bandwidth_product(&self) -> f64 {
        let h = &self.coeffs;
        let energy: f64 = h.iter().map(|v| v * v).sum();
        let t_mean = h.iter().enumerate().map(|(n, v)| n as f64 * v * v).sum::<f64>() / energy;
        let t_var = h
            .iter()
            .enumerate()
            .map(|(n, v)| (n as f64 - t_mean).powi(2) * v * v)
            .sum::<f64>()
            / energy;

        let m = (16 * h.len()).max(16384).next_power_of_two();
        let mut buf: Vec<Complex64> = (0..m)
            .map(|i| Complex64::new(h.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        fft_forward(m).process(&mut buf);
        let freq = |k: usize| if k < m / 2 { k as f64 / m as f64 } else { k as f64 / m as f64 - 1.0 };
        let spec_energy: f64 = buf.iter().map(|c| c.norm_sqr()).sum();
        let f_mean = buf.iter().enumerate().map(|(k, c)| freq(k) * c.norm_sqr()).sum::<f64>() / spec_energy;
        let f_var = buf
            .iter()
            .enumerate()
            .map(|(k, c)| (freq(k) - f_mean).powi(2) * c.norm_sqr())
            .sum::<f64>()
            / spec_energy;
        t_var.sqrt() * f_var.sqrt()
    }
}

/// Complex one-sided STFT frames, `frames[t][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StftFrames {
    pub frames: Vec<Vec<Complex64>>,
    pub hop: usize,
    pub n_fft: usize,
}

impl StftFrames {
    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }
}

/// Sliding-window STFT with `floor((N - L)/hop) + 1` frames of `floor(L/2) + 1`
/// bins. Each frame is the DFT (analysis kernel e^{-j w n}) of the windowed
/// slice divided by the window's L2 norm.
pub fn stft(signal: &[f64], window: &Window, hop: usize) -> Result<StftFrames> {
    if signal.is_empty() {
        return Err(invalid("stft of an empty signal"));
    }
    if hop == 0 {
        return Err(invalid("hop must be >= 1"));
    }
    let len = window.len();
    if len > signal.len() {
        return Err(invalid(format!(
            "window length {len} exceeds signal length {}",
            signal.len()
        )));
    }
    let count = (signal.len() - len) / hop + 1;
    let mut engine = FrameEngine::new(len);
    let frames = (0..count)
        .map(|t| engine.transform(signal, (t * hop) as isize, window))
        .collect();
    Ok(StftFrames { frames, hop, n_fft: len })
}

struct FrameEngine {
    n_fft: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FrameEngine {
    fn new(n_fft: usize) -> Self {
        let fft = fft_forward(n_fft);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Self { n_fft, fft, buf: vec![Complex64::default(); n_fft], scratch }
    }

    /// Windowed slice starting at `start` (zero outside the signal), zero-padded
    /// to the engine's DFT length; returns the one-sided normalized spectrum.
    fn transform(&mut self, signal: &[f64], start: isize, window: &Window) -> Vec<Complex64> {
        self.buf.fill(Complex64::default());
        for (i, &w) in window.coeffs().iter().enumerate() {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < signal.len() {
                self.buf[i] = Complex64::new(signal[idx as usize] * w, 0.0);
            }
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let norm = window.l2_norm();
        self.buf[..self.n_fft / 2 + 1].iter().map(|c| c / norm).collect()
    }
}

/// Magnitude image of STFT frames: rows are bins, columns are frames.
pub fn spectrogram(frames: &StftFrames) -> Result<TfGrid> {
    let cols = frames.frames.len();
    if cols == 0 {
        return Err(invalid("no frames"));
    }
    let rows = frames.bins();
    let mut values = vec![0.0; rows * cols];
    for (t, frame) in frames.frames.iter().enumerate() {
        if frame.len() != rows {
            return Err(shape("ragged STFT frames"));
        }
        for (k, c) in frame.iter().enumerate() {
            values[k * cols + t] = c.norm();
        }
    }
    TfGrid::new(rows, cols, values, frames.hop as f64, 1.0 / frames.n_fft as f64)
}

/// Discrete analytic signal: negative frequencies removed, positive doubled.
pub fn analytic_signal(signal: &[f64]) -> Vec<Complex64> {
    let n = signal.len();
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if n == 0 {
        return buf;
    }
    fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *v *= gain;
    }
    fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c / n as f64).collect()
}

/// Real-valued Wigner-Ville plane: `values[k * cols + t]`, bin k at
/// frequency k / (2 * bins) cycles per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WvdPlane {
    pub bins: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// Discrete WVD of the analytic signal: for each sample t the lag kernel
/// z[t+tau] conj(z[t-tau]) over the maximal symmetric lag range is
/// transformed over tau. One column per sample, one bin per sample.
pub fn wvd_signed(signal: &[f64]) -> Result<WvdPlane> {
    let n = signal.len();
    if n < 4 {
        return Err(invalid(format!("wvd needs at least 4 samples, got {n}")));
    }
    let z = analytic_signal(signal);
    let m = n;
    let fft = fft_forward(m);
    let mut buf = vec![Complex64::default(); m];
    let mut values = vec![0.0; m * n];
    for t in 0..n {
        buf.fill(Complex64::default());
        let tau_max = t.min(n - 1 - t).min((m - 1) / 2);
        for tau in 0..=tau_max {
            let r = z[t + tau] * z[t - tau].conj();
            buf[tau] = r;
            if tau > 0 {
                buf[m - tau] = r.conj();
            }
        }
        fft.process(&mut buf);
        for (k, c) in buf.iter().enumerate() {
            values[k * n + t] = c.re;
        }
    }
    Ok(WvdPlane { bins: m, cols: n, values })
}

/// Magnitude of the Wigner-Ville distribution as a time-frequency grid.
pub fn wvd(signal: &[f64]) -> Result<TfGrid> {
    let plane = wvd_signed(signal)?;
    let values = plane.values.iter().map(|v| v.abs()).collect();
    TfGrid::new(plane.bins, plane.cols, values, 1.0, 1.0 / (2.0 * plane.bins as f64))
}

/// Sixteen per-section Gaussian window lengths, each in [16, 127].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowSchedule([usize; SCHEDULE_SECTIONS]);

impl WindowSchedule {
    pub fn new(lengths: [usize; SCHEDULE_SECTIONS]) -> Result<Self> {
        if let Some(bad) = lengths.iter().find(|&&l| !(MIN_WINDOW..=MAX_WINDOW).contains(&l)) {
            return Err(invalid(format!(
                "window length {bad} outside [{MIN_WINDOW}, {MAX_WINDOW}]"
            )));
        }
        Ok(Self(lengths))
    }

    pub fn from_slice(lengths: &[usize]) -> Result<Self> {
        let arr: [usize; SCHEDULE_SECTIONS] = lengths.try_into().map_err(|_| {
            invalid(format!(
                "schedule needs exactly {SCHEDULE_SECTIONS} lengths, got {}",
                lengths.len()
            ))
        })?;
        Self::new(arr)
    }

    pub fn uniform(length: usize) -> Result<Self> {
        Self::new([length; SCHEDULE_SECTIONS])
    }

    pub fn lengths(&self) -> &[usize; SCHEDULE_SECTIONS] {
        &self.0
    }

    pub fn max_len(&self) -> usize {
        *self.0.iter().max().expect("nonempty")
    }
}

impl std::fmt::Display for WindowSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Section length and zero-padded signal length used by [`astft`].
pub fn astft_layout(n: usize) -> (usize, usize) {
    let section = n.div_ceil(SCHEDULE_SECTIONS);
    (section, section * SCHEDULE_SECTIONS)
}

/// Piecewise-adaptive Gabor STFT.
///
/// The signal is zero-padded to 16 equal sections. Frame k is centered on
/// sample `k * hop` and uses the Gaussian window length of the section holding
/// its center. Every frame is zero-padded to the longest scheduled window
/// before its DFT, so all sections share `floor(max_len / 2) + 1` bins on one
/// frequency axis.
pub fn astft(signal: &[f64], schedule: &WindowSchedule, hop: usize) -> Result<TfGrid> {
    astft_with_nfft(signal, schedule, hop, schedule.max_len())
}

/// [`astft`] with an explicit DFT length (>= the longest scheduled window),
/// giving a frequency axis that does not depend on the schedule.
pub fn astft_with_nfft(signal: &[f64], schedule: &WindowSchedule, hop: usize, n_fft: usize) -> Result<TfGrid> {
    if n_fft < schedule.max_len() {
        return Err(invalid(format!(
            "n_fft {n_fft} is shorter than the longest window {}",
            schedule.max_len()
        )));
    }
    if signal.is_empty() {
        return Err(invalid("astft of an empty signal"));
    }
    if hop == 0 {
        return Err(invalid("hop must be >= 1"));
    }
    let schedule = WindowSchedule::new(*schedule.lengths())?;
    let (section, padded) = astft_layout(signal.len());
    let mut windows: Vec<Option<Window>> = vec![None; MAX_WINDOW + 1];
    let mut engine = FrameEngine::new(n_fft);
    let cols = padded.div_ceil(hop);
    let rows = n_fft / 2 + 1;
    let mut values = vec![0.0; rows * cols];
    for k in 0..cols {
        let center = k * hop;
        let len = schedule.0[(center / section).min(SCHEDULE_SECTIONS - 1)];
        let window = windows[len].get_or_insert_with(|| {
            Window::gaussian(len, DEFAULT_GAUSSIAN_SIGMA).expect("scheduled length is valid")
        });
        let start = center as isize - (len / 2) as isize;
        let frame = engine.transform(signal, start, window);
        for (b, c) in frame.iter().enumerate() {
            values[b * cols + k] = c.norm();
        }
    }
    TfGrid::new(rows, cols, values, hop as f64, 1.0 / n_fft as f64)
}

/// Bilinear resampling with corner alignment.
pub fn resample_grid(grid: &TfGrid, target_rows: usize, target_cols: usize) -> Result<TfGrid> {
    if target_rows == 0 || target_cols == 0 {
        return Err(invalid("resample targets must be >= 1"));
    }
    if target_rows == grid.rows && target_cols == grid.cols {
        return Ok(grid.clone());
    }
    let row_map = axis_map(grid.rows, target_rows);
    let col_map = axis_map(grid.cols, target_cols);
    let mut values = Vec::with_capacity(target_rows * target_cols);
    for &(r0, r1, fr) in &row_map {
        for &(c0, c1, fc) in &col_map {
            let top = grid.get(r0, c0) * (1.0 - fc) + grid.get(r0, c1) * fc;
            let bottom = grid.get(r1, c0) * (1.0 - fc) + grid.get(r1, c1) * fc;
            values.push((top * (1.0 - fr) + bottom * fr).max(0.0));
        }
    }
    let scale = |old: usize, new: usize| {
        if new > 1 && old > 1 {
            (old - 1) as f64 / (new - 1) as f64
        } else {
            old as f64 / new as f64
        }
    };
    TfGrid::new(
        target_rows,
        target_cols,
        values,
        grid.time_step * scale(grid.cols, target_cols),
        grid.freq_step * scale(grid.rows, target_rows),
    )
}

/// Like [`resample_grid`], but an axis that shrinks is box-averaged (each
/// output cell is the overlap-weighted mean of the input cells it covers)
/// instead of point-sampled. Growing axes stay bilinear. Mass in thin
/// features such as a WVD tone line survives heavy downsampling this way.
pub fn rescale_grid(grid: &TfGrid, target_rows: usize, target_cols: usize) -> Result<TfGrid> {
    if target_rows == 0 || target_cols == 0 {
        return Err(invalid("resample targets must be >= 1"));
    }
    if target_rows >= grid.rows && target_cols >= grid.cols {
        return resample_grid(grid, target_rows, target_cols);
    }
    let row_w = axis_weights(grid.rows, target_rows);
    let col_w = axis_weights(grid.cols, target_cols);
    // columns first, then rows
    let mut tmp = vec![0.0; grid.rows * target_cols];
    for r in 0..grid.rows {
        let src = grid.row(r);
        for (c, taps) in col_w.iter().enumerate() {
            tmp[r * target_cols + c] = taps.iter().map(|&(i, w)| w * src[i]).sum();
        }
    }
    let mut values = vec![0.0; target_rows * target_cols];
    for (r, taps) in row_w.iter().enumerate() {
        for &(i, w) in taps {
            let src = &tmp[i * target_cols..(i + 1) * target_cols];
            for (dst, s) in values[r * target_cols..(r + 1) * target_cols].iter_mut().zip(src) {
                *dst += w * s;
            }
        }
    }
    for v in &mut values {
        *v = v.max(0.0);
    }
    TfGrid::new(
        target_rows,
        target_cols,
        values,
        grid.time_step * grid.cols as f64 / target_cols as f64,
        grid.freq_step * grid.rows as f64 / target_rows as f64,
    )
}

fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    if dst >= src {
        return axis_map(src, dst)
            .into_iter()
            .map(|(lo, hi, f)| if lo == hi { vec![(lo, 1.0)] } else { vec![(lo, 1.0 - f), (hi, f)] })
            .collect();
    }
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|j| {
            let (a, b) = (j as f64 * scale, (j + 1) as f64 * scale);
            let mut taps = Vec::new();
            let mut i = a.floor() as usize;
            while (i as f64) < b && i < src {
                let overlap = (b.min(i as f64 + 1.0) - a.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((i, overlap / scale));
                }
                i += 1;
            }
            taps
        })
        .collect()
}

fn axis_map(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|i| {
            let pos = if dst == 1 {
                (src - 1) as f64 / 2.0
            } else {
                i as f64 * (src - 1) as f64 / (dst - 1) as f64
            };
            let lo = (pos.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// CSV form: a header line `rows,cols,time_step,freq_step`, the four values,
/// then one line per grid row.
pub fn write_grid_csv(path: &Path, grid: &TfGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "rows,cols,time_step,freq_step")?;
    writeln!(w, "{},{},{},{}", grid.rows, grid.cols, grid.time_step, grid.freq_step)?;
    for r in 0..grid.rows {
        let line: Vec<String> = grid.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv(path: &Path) -> Result<TfGrid> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let bad = |m: &str| invalid(format!("grid csv: {m}"));
    if lines.next() != Some("rows,cols,time_step,freq_step") {
        return Err(bad("missing header"));
    }
    let meta: Vec<&str> = lines.next().ok_or_else(|| bad("missing dimensions"))?.split(',').collect();
    if meta.len() != 4 {
        return Err(bad("dimension line needs 4 fields"));
    }
    let rows: usize = meta[0].parse().map_err(|_| bad("rows"))?;
    let cols: usize = meta[1].parse().map_err(|_| bad("cols"))?;
    let time_step: f64 = meta[2].parse().map_err(|_| bad("time_step"))?;
    let freq_step: f64 = meta[3].parse().map_err(|_| bad("freq_step"))?;
    let mut values = Vec::with_capacity(rows * cols);
    for line in lines.take(rows) {
        for field in line.split(',') {
            values.push(field.parse::<f64>().map_err(|_| bad("value"))?);
        }
    }
    TfGrid::new(rows, cols, values, time_step, freq_step)
}

/// 8-bit binary PGM after min-max scaling, highest frequency on the top line.
pub fn write_grid_pgm(path: &Path, grid: &TfGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&pgm_bytes(grid))?;
    w.flush()?;
    Ok(())
}

pub fn pgm_bytes(grid: &TfGrid) -> Vec<u8> {
    let scaled = grid.min_max_scaled();
    let mut out = format!("P5\n{} {}\n255\n", grid.cols, grid.rows).into_bytes();
    for r in (0..grid.rows).rev() {
        out.extend(scaled.row(r).iter().map(|v| (v * 255.0).round() as u8));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(n: usize, f: f64, phase: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 + phase).cos()).collect()
    }

    fn argmax(v: &[f64]) -> usize {
        (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
    }

    #[test]
    fn windows() {
        let rect = make_window(WindowKind::Rectangular, 4).unwrap();
        assert_eq!(rect.coeffs(), &[1.0; 4]);
        let g = make_window(WindowKind::Gaussian, 33).unwrap();
        assert_eq!(g.coeffs()[16], 1.0);
        assert_eq!(argmax(g.coeffs()), 16);
        for i in 0..33 {
            assert_eq!(g.coeffs()[i], g.coeffs()[32 - i]);
        }
        assert!(make_window(WindowKind::Hanning, 1).is_err());
        assert!(make_window(WindowKind::Hanning, 16).unwrap().coeffs().iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn stft_shape_and_zero_signal() {
        let w = make_window(WindowKind::Gaussian, 64).unwrap();
        let f = stft(&vec![0.0; 1536], &w, 16).unwrap();
        assert_eq!(f.frames.len(), 93);
        assert_eq!(f.bins(), 33);
        assert!(f.frames.iter().flatten().all(|c| c.norm() == 0.0));
        assert!(stft(&[], &w, 16).is_err());
        assert!(stft(&[0.0; 10], &w, 16).is_err());
    }

    #[test]
    fn stft_on_bin_sinusoid_peaks_at_bin() {
        let len = 32;
        let k = 5;
        let x = tone(256, k as f64 / len as f64, 0.7);
        let w = make_window(WindowKind::Rectangular, len).unwrap();
        let grid = spectrogram(&stft(&x, &w, 8).unwrap()).unwrap();
        for t in 0..grid.cols() {
            let col: Vec<f64> = (0..grid.rows()).map(|r| grid.get(r, t)).collect();
            assert_eq!(argmax(&col), k);
        }
    }

    #[test]
    fn spectrogram_is_magnitude() {
        let frames = StftFrames { frames: vec![vec![Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)]], hop: 1, n_fft: 2 };
        let g = spectrogram(&frames).unwrap();
        assert_eq!(g.get(0, 0), 5.0);
        assert_eq!(g.get(1, 0), 0.0);
    }

    #[test]
    fn resample_examples() {
        let g = TfGrid::new(2, 2, vec![0.0, 2.0, 2.0, 4.0], 1.0, 1.0).unwrap();
        let r = resample_grid(&g, 3, 3).unwrap();
        assert!((r.get(1, 1) - 2.0).abs() < 1e-15);
        assert_eq!(resample_grid(&g, 2, 2).unwrap(), g);
        let c = TfGrid::new(3, 4, vec![1.5; 12], 1.0, 1.0).unwrap();
        let up = resample_grid(&c, 7, 2).unwrap();
        assert!(up.values().iter().all(|&v| (v - 1.5).abs() < 1e-15));
    }

    #[test]
    fn schedule_bounds() {
        assert!(WindowSchedule::uniform(15).is_err());
        assert!(WindowSchedule::uniform(128).is_err());
        assert!(WindowSchedule::uniform(16).is_ok());
        assert!(WindowSchedule::from_slice(&[20; 15]).is_err());
        let mut l = [64; 16];
        l[3] = 15;
        assert!(WindowSchedule::new(l).is_err());
    }

    #[test]
    fn astft_rejects_empty_signal() {
        let s = WindowSchedule::uniform(32).unwrap();
        assert!(astft(&[], &s, 16).is_err());
        assert!(astft(&[0.0; 100], &s, 0).is_err());
    }

    #[test]
    fn grid_rejects_negative_values() {
        assert!(TfGrid::new(1, 2, vec![1.0, -0.1], 1.0, 1.0).is_err());
        assert!(TfGrid::new(0, 2, vec![], 1.0, 1.0).is_err());
    }

    #[test]
    fn pgm_header_and_range() {
        let g = TfGrid::new(2, 3, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 1.0, 1.0).unwrap();
        let bytes = pgm_bytes(&g);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let body = &bytes[header.len()..];
        assert_eq!(body, &[153, 204, 255, 0, 51, 102]);
    }
}
