//! 1-D dual-tree complex wavelet transform.
//!
//! Level 1 uses an odd-length near-symmetric biorthogonal pair applied
//! undecimated, with the two trees taking alternate output samples. Levels
//! two and up use the q-shift pair, whose a/b filters are time reverses of
//! one another and give the quarter-sample delay between trees. Tree A lands
//! in the real part of every detail coefficient, tree B in the imaginary part.
//! Boundaries are handled by half-sample symmetric extension.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;

use crate::error::{invalid, shape, Result};
use crate::tfa::{resample_grid, TfGrid};

pub const DEFAULT_LEVELS: usize = 4;

const NEAR_SYM_B_H0O: [f64; 13] = [
    -0.0017578125, 0.0, 0.022265625, -0.046875, -0.0482421875, 0.296875, 0.55546875, 0.296875,
    -0.0482421875, -0.046875, 0.022265625, 0.0, -0.0017578125,
];
const NEAR_SYM_B_G1O: [f64; 13] = [
    -0.0017578125, -0.0, 0.022265625, 0.046875, -0.0482421875, -0.296875, 0.55546875, -0.296875,
    -0.0482421875, 0.046875, 0.022265625, -0.0, -0.0017578125,
];
const NEAR_SYM_B_G0O: [f64; 19] = [
    7.062639508928571e-05, 0.0, -0.0013419015066964285, -0.0018833705357142855,
    0.007156808035714285, 0.023856026785714284, -0.05564313616071428, -0.05168805803571428,
    0.29975760323660716, 0.5594308035714286, 0.29975760323660716, -0.05168805803571428,
    -0.05564313616071428, 0.023856026785714284, 0.007156808035714285, -0.0018833705357142855,
    -0.0013419015066964285, 0.0, 7.062639508928571e-05,
];
const NEAR_SYM_B_H1O: [f64; 19] = [
    -7.062639508928571e-05, 0.0, 0.0013419015066964285, -0.0018833705357142855,
    -0.007156808035714285, 0.023856026785714284, 0.05564313616071428, -0.05168805803571428,
    -0.29975760323660716, 0.5594308035714286, -0.29975760323660716, -0.05168805803571428,
    0.05564313616071428, 0.023856026785714284, -0.007156808035714285, -0.0018833705357142855,
    0.0013419015066964285, 0.0, -7.062639508928571e-05,
];

const QSHIFT_B_H0A: [f64; 14] = [
    0.003253142763653182, -0.00388321199915849, 0.03466034684485349, -0.03887280126882779,
    -0.11720388769911527, 0.27529538466888204, 0.7561456438925225, 0.5688104207121227,
    0.011866092033797, -0.1067118046866654, 0.023825384794920298, 0.01702522388155399,
    -0.005439475937274115, -0.004556895628475491,
];
const QSHIFT_B_H1A: [f64; 14] = [
    -0.004556895628475491, 0.005439475937274115, 0.01702522388155399, -0.023825384794920298,
    -0.1067118046866654, -0.011866092033797, 0.5688104207121227, -0.7561456438925225,
    0.27529538466888204, 0.11720388769911527, -0.03887280126882779, -0.03466034684485349,
    -0.00388321199915849, -0.003253142763653182,
];

/// Analysis and synthesis filters for both trees.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub h0o: Vec<f64>,
    pub h1o: Vec<f64>,
    pub g0o: Vec<f64>,
    pub g1o: Vec<f64>,
    pub h0a: Vec<f64>,
    pub h0b: Vec<f64>,
    pub h1a: Vec<f64>,
    pub h1b: Vec<f64>,
    pub g0a: Vec<f64>,
    pub g0b: Vec<f64>,
    pub g1a: Vec<f64>,
    pub g1b: Vec<f64>,
}

impl FilterBank {
    /// Near-symmetric 13/19-tap level-1 pair with the 14-tap q-shift pair.
    pub fn kingsbury() -> Self {
        let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<_>>();
        let h0a = QSHIFT_B_H0A.to_vec();
        let h1a = QSHIFT_B_H1A.to_vec();
        Self {
            h0o: NEAR_SYM_B_H0O.to_vec(),
            h1o: NEAR_SYM_B_H1O.to_vec(),
            g0o: NEAR_SYM_B_G0O.to_vec(),
            g1o: NEAR_SYM_B_G1O.to_vec(),
            h0b: rev(&h0a),
            h1b: rev(&h1a),
            g0a: rev(&h0a),
            g0b: h0a.clone(),
            g1a: rev(&h1a),
            g1b: h1a.clone(),
            h0a,
            h1a,
        }
    }
}

impl Default for FilterBank {
    fn default() -> Self {
        Self::kingsbury()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtcwtCoeffs {
    /// `details[s - 1]` holds level s; real part tree A, imaginary part tree B.
    pub details: Vec<Vec<Complex64>>,
    /// Final real lowpass output of the cascade, samples from the two trees
    /// interleaved (tree A at even indices).
    pub lowpass: Vec<f64>,
    /// Length of the signal before symmetric padding.
    pub original_len: usize,
}

impl DtcwtCoeffs {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn padded_len(&self) -> usize {
        2 * self.details.first().map_or(0, |d| d.len())
    }

    /// Final approximation as complex pairs (tree A + j tree B).
    pub fn approximation(&self) -> Vec<Complex64> {
        self.lowpass
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            details: self
                .details
                .iter()
                .map(|d| d.iter().map(|c| c * k).collect())
                .collect(),
            lowpass: self.lowpass.iter().map(|v| v * k).collect(),
            original_len: self.original_len,
        }
    }
}

/// Per-level magnitude and phase of the detail coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPolar {
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
}

/// Magnitude and quadrant-aware phase in (-pi, pi]; zero maps to (0, 0).
pub fn polar(a: f64, b: f64) -> (f64, f64) {
    let m = a.hypot(b);
    if m == 0.0 {
        return (0.0, 0.0);
    }
    let mut theta = b.atan2(a);
    if theta <= -std::f64::consts::PI {
        theta = std::f64::consts::PI;
    }
    (m, theta)
}

pub fn magnitude_phase(coeffs: &DtcwtCoeffs) -> Vec<LevelPolar> {
    coeffs
        .details
        .iter()
        .map(|d| {
            let (magnitude, phase) = d.iter().map(|c| polar(c.re, c.im)).unzip();
            LevelPolar { magnitude, phase }
        })
        .collect()
}

/// Sum of squared detail magnitudes per level.
pub fn level_energies(coeffs: &DtcwtCoeffs) -> Vec<f64> {
    coeffs.details.iter().map(|d| d.iter().map(|c| c.norm_sqr()).sum()).collect()
}

/// Total energy of details plus approximation; about twice the signal energy.
pub fn total_energy(coeffs: &DtcwtCoeffs) -> f64 {
    level_energies(coeffs).iter().sum::<f64>() + coeffs.lowpass.iter().map(|v| v * v).sum::<f64>()
}

pub fn forward(signal: &[f64], levels: usize) -> Result<DtcwtCoeffs> {
    forward_with(&FilterBank::kingsbury(), signal, levels)
}

pub fn forward_with(bank: &FilterBank, signal: &[f64], levels: usize) -> Result<DtcwtCoeffs> {
    if levels == 0 {
        return Err(invalid("dtcwt needs at least one level"));
    }
    if levels > 20 || signal.len() < (1 << levels) {
        return Err(invalid(format!(
            "{levels} levels is too deep for {} samples",
            signal.len()
        )));
    }
    let block = 1usize << levels.max(2);
    let padded_len = signal.len().div_ceil(block) * block;
    let x: Vec<f64> = (0..padded_len)
        .map(|i| signal[sym_index(i as isize, signal.len())])
        .collect();

    let hi = colfilter(&x, &bank.h1o);
    let mut lo = colfilter(&x, &bank.h0o);
    let mut details = vec![to_complex(&hi)];
    for _ in 1..levels {
        let hi = coldfilt(&lo, &bank.h1b, &bank.h1a)?;
        lo = coldfilt(&lo, &bank.h0b, &bank.h0a)?;
        details.push(to_complex(&hi));
    }
    let coeffs = DtcwtCoeffs { details, lowpass: lo, original_len: signal.len() };
    Ok(coeffs.scale(SQRT_2))
}

pub fn inverse(coeffs: &DtcwtCoeffs) -> Result<Vec<f64>> {
    inverse_with(&FilterBank::kingsbury(), coeffs)
}

pub fn inverse_with(bank: &FilterBank, coeffs: &DtcwtCoeffs) -> Result<Vec<f64>> {
    let levels = coeffs.levels();
    if levels == 0 {
        return Err(shape("coefficients hold no levels"));
    }
    let padded = coeffs.padded_len();
    for (s, d) in coeffs.details.iter().enumerate() {
        if d.len() << (s + 1) != padded {
            return Err(shape(format!("level {} has {} coefficients", s + 1, d.len())));
        }
    }
    let expected_low = if levels == 1 { padded } else { padded >> (levels - 1) };
    if coeffs.lowpass.len() != expected_low {
        return Err(shape(format!(
            "lowpass has {} samples, expected {expected_low}",
            coeffs.lowpass.len()
        )));
    }
    if coeffs.original_len > padded || padded == 0 {
        return Err(shape("original length exceeds coefficient span"));
    }
    let c = coeffs.scale(1.0 / SQRT_2);
    let mut lo = c.lowpass;
    for s in (1..levels).rev() {
        let hi = to_real(&c.details[s]);
        let a = colifilt(&lo, &bank.g0b, &bank.g0a)?;
        let b = colifilt(&hi, &bank.g1b, &bank.g1a)?;
        lo = a.iter().zip(&b).map(|(p, q)| p + q).collect();
    }
    let hi = to_real(&c.details[0]);
    let z: Vec<f64> = colfilter(&lo, &bank.g0o)
        .iter()
        .zip(colfilter(&hi, &bank.g1o))
        .map(|(p, q)| p + q)
        .collect();
    Ok(z[..coeffs.original_len].to_vec())
}

/// Rows: approximation magnitude at the bottom, then levels from coarsest to
/// finest. Each row is nearest-neighbour stretched to the signal length and
/// the stack is bilinearly resampled to the target size.
pub fn scalogram(coeffs: &DtcwtCoeffs, target_rows: usize, target_cols: usize) -> Result<TfGrid> {
    let n = coeffs.original_len;
    let padded = coeffs.padded_len();
    if n == 0 || coeffs.levels() == 0 {
        return Err(shape("empty coefficients"));
    }
    let mut rows: Vec<Vec<f64>> = vec![coeffs.approximation().iter().map(|c| c.norm()).collect()];
    for d in coeffs.details.iter().rev() {
        rows.push(d.iter().map(|c| c.norm()).collect());
    }
    let mut values = Vec::with_capacity(rows.len() * n);
    for row in &rows {
        values.extend((0..n).map(|i| row[i * row.len() / padded]));
    }
    let grid = TfGrid::new(rows.len(), n, values, 1.0, 1.0)?;
    resample_grid(&grid, target_rows, target_cols)
}

fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

fn to_real(x: &[Complex64]) -> Vec<f64> {
    x.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Half-sample symmetric reflection of any integer index into [0, n).
fn sym_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

/// `y[i] = sum_j h[j] x[i + m - 1 - j]`, only fully overlapping outputs.
fn conv_valid(x: &[f64], h: &[f64]) -> Vec<f64> {
    let m = h.len();
    if x.len() < m {
        return Vec::new();
    }
    (0..=x.len() - m)
        .map(|i| h.iter().enumerate().map(|(j, hj)| hj * x[i + m - 1 - j]).sum())
        .collect()
}

fn extend(x: &[f64], before: usize, after: usize) -> Vec<f64> {
    let n = x.len();
    (0..before + n + after)
        .map(|i| x[sym_index(i as isize - before as isize, n)])
        .collect()
}

/// Gathers `xe[t + offset]` for t = first, first + step, ... while t < end.
fn pick(xe: &[f64], first: usize, step: usize, end: usize, offset: isize) -> Vec<f64> {
    (first..end)
        .step_by(step)
        .map(|t| xe[(t as isize + offset) as usize])
        .collect()
}

fn colfilter(x: &[f64], h: &[f64]) -> Vec<f64> {
    let m2 = h.len() / 2;
    conv_valid(&extend(x, m2, m2), h)
}

fn split(h: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (h.iter().step_by(2).copied().collect(), h.iter().skip(1).step_by(2).copied().collect())
}

fn check_pair(ha: &[f64], hb: &[f64]) -> Result<()> {
    if ha.len() != hb.len() || ha.len() % 2 != 0 {
        return Err(invalid("q-shift filters must be equal even lengths"));
    }
    Ok(())
}

/// Filter with the two q-shift trees and decimate by two; outputs alternate
/// between the trees.
fn coldfilt(x: &[f64], ha: &[f64], hb: &[f64]) -> Result<Vec<f64>> {
    check_pair(ha, hb)?;
    let r = x.len();
    if r % 4 != 0 {
        return Err(shape(format!("coldfilt input length {r} is not a multiple of 4")));
    }
    let m = ha.len();
    // xe[k] is the sample at index k - m.
    let xe = extend(x, m, m);
    let (hao, hae) = split(ha);
    let (hbo, hbe) = split(hb);
    let end = r + 2 * m - 2;
    let conv_sum = |h1: &[f64], o1: isize, h2: &[f64], o2: isize| -> Vec<f64> {
        conv_valid(&pick(&xe, 5, 4, end, o1), h1)
            .iter()
            .zip(conv_valid(&pick(&xe, 5, 4, end, o2), h2))
            .map(|(a, b)| a + b)
            .collect()
    };
    let ya = conv_sum(&hao, -1, &hae, -3);
    let yb = conv_sum(&hbo, 0, &hbe, -2);
    let a_first = dot(ha, hb) > 0.0;
    let mut y = vec![0.0; r / 2];
    for (i, (a, b)) in ya.iter().zip(&yb).enumerate() {
        let (first, second) = if a_first { (a, b) } else { (b, a) };
        y[2 * i] = *first;
        y[2 * i + 1] = *second;
    }
    Ok(y)
}

/// Upsample by two and filter with the q-shift synthesis pair.
fn colifilt(x: &[f64], ha: &[f64], hb: &[f64]) -> Result<Vec<f64>> {
    check_pair(ha, hb)?;
    let r = x.len();
    if r % 2 != 0 {
        return Err(shape(format!("colifilt input length {r} is odd")));
    }
    let m = ha.len();
    let m2 = m / 2;
    let mut y = vec![0.0; 2 * r];
    if x.iter().all(|&v| v == 0.0) {
        return Ok(y);
    }
    let xe = extend(x, m2, m2);
    let (hao, hae) = split(ha);
    let (hbo, hbe) = split(hb);
    let (da, db): (isize, isize) = if dot(ha, hb) > 0.0 { (0, -1) } else { (-1, 0) };
    let parts = if m2 % 2 == 0 {
        let (first, end) = (3, r + m);
        [
            conv_valid(&pick(&xe, first, 2, end, db - 2), &hae),
            conv_valid(&pick(&xe, first, 2, end, da - 2), &hbe),
            conv_valid(&pick(&xe, first, 2, end, db), &hao),
            conv_valid(&pick(&xe, first, 2, end, da), &hbo),
        ]
    } else {
        let (first, end) = (2, r + m - 1);
        [
            conv_valid(&pick(&xe, first, 2, end, db), &hao),
            conv_valid(&pick(&xe, first, 2, end, da), &hbo),
            conv_valid(&pick(&xe, first, 2, end, db), &hae),
            conv_valid(&pick(&xe, first, 2, end, da), &hbe),
        ]
    };
    for (phase, part) in parts.iter().enumerate() {
        for (i, v) in part.iter().enumerate() {
            let idx = 4 * i + phase;
            if idx < y.len() {
                y[idx] = *v;
            }
        }
    }
    Ok(y)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
