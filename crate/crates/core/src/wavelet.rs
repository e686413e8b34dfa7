//! Daubechies scaling/wavelet pairs by the cascade algorithm, and their
//! periodized, tensorized evaluation on dyadic grids of the torus.

use std::f64::consts::SQRT_2;

use crate::error::{invalid, Result};
use crate::grid::DyadicGrid;

/// Low-pass filter of DB(5), normalized to sum `sqrt(2)`.
#[allow(clippy::excessive_precision)]
const DB5_FILTER: [f64; 10] = [
    0.160_102_397_974_192_914_48,
    0.603_829_269_797_189_670_54,
    0.724_308_528_437_772_927_73,
    0.138_428_145_901_320_731_51,
    -0.242_294_887_066_382_031_86,
    -0.032_244_869_584_638_374_648,
    0.077_571_493_840_045_713_523,
    -0.006_241_490_212_798_274_274_2,
    -0.012_580_751_999_081_999_469,
    0.003_335_725_285_473_771_278,
];

/// Hoelder exponent of the DB(5) scaling function and wavelet.
pub const DB5_HOELDER: f64 = 1.177;

/// An orthonormal compactly supported scaling/wavelet pair, given by its
/// refinement filter.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletFamily {
    name: String,
    vanishing_moments: usize,
    filter: Vec<f64>,
    hoelder_alpha: f64,
}

impl WaveletFamily {
    pub fn new(
        name: impl Into<String>,
        vanishing_moments: usize,
        filter: Vec<f64>,
        hoelder_alpha: f64,
    ) -> Result<Self> {
        if vanishing_moments == 0 {
            return Err(invalid("a wavelet family needs at least one vanishing moment"));
        }
        if filter.len() != 2 * vanishing_moments {
            return Err(invalid(format!(
                "filter length {} does not match 2M = {}",
                filter.len(),
                2 * vanishing_moments
            )));
        }
        let sum: f64 = filter.iter().sum();
        let energy: f64 = filter.iter().map(|h| h * h).sum();
        if (sum - SQRT_2).abs() > 1e-12 {
            return Err(invalid(format!("filter sums to {sum}, expected sqrt(2)")));
        }
        if (energy - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("filter energy is {energy}, expected 1")));
        }
        if !(hoelder_alpha > 0.0) {
            return Err(invalid("Hoelder exponent must be positive"));
        }
        Ok(WaveletFamily {
            name: name.into(),
            vanishing_moments,
            filter,
            hoelder_alpha,
        })
    }

    /// DB(1). The cascade reproduces it exactly; its nominal exponent is 1.
    pub fn haar() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::new("haar", 1, vec![h, h], 1.0).expect("haar filter is valid")
    }

    pub fn daubechies5() -> Self {
        Self::new("db5", 5, DB5_FILTER.to_vec(), DB5_HOELDER).expect("db5 filter is valid")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "haar" | "db1" => Ok(Self::haar()),
            "db5" => Ok(Self::daubechies5()),
            other => Err(invalid(format!("unknown wavelet family '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vanishing_moments(&self) -> usize {
        self.vanishing_moments
    }

    pub fn filter(&self) -> &[f64] {
        &self.filter
    }

    pub fn hoelder_alpha(&self) -> f64 {
        self.hoelder_alpha
    }

    /// Support length `2M - 1` shared by the scaling function and wavelet.
    pub fn support_length(&self) -> i64 {
        2 * self.vanishing_moments as i64 - 1
    }

    /// Support `[0, 2M-1]` of the scaling function.
    pub fn scaling_support(&self) -> (i64, i64) {
        (0, self.support_length())
    }

    /// Support `[1-M, M]` of the mother wavelet.
    pub fn wavelet_support(&self) -> (i64, i64) {
        let m = self.vanishing_moments as i64;
        (1 - m, m)
    }
}

/// Samples of `phi` and `psi` on the dyadic lattice of step `2^-J` over
/// their supports (both arrays hold `(2M-1) 2^J + 1` values).
#[derive(Clone, Debug)]
pub struct WaveletTable {
    family: WaveletFamily,
    depth: u32,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

/// Runs `depth` cascade iterations starting from the indicator of `[0, 1)`
/// sampled on the integers, then derives the wavelet from the two-scale
/// relation `psi(x) = sqrt(2) sum_k (-1)^k h_{1-k} phi(2x - k)`.
pub fn cascade(family: &WaveletFamily, depth: u32) -> Result<WaveletTable> {
    if depth == 0 {
        return Err(invalid("cascade depth must be at least 1"));
    }
    if depth > 24 {
        return Err(invalid("cascade depth above 24 is not supported"));
    }
    let h = family.filter();
    let len = family.support_length() as usize;

    let mut values = vec![0.0; len + 1];
    values[0] = 1.0;
    for level in 0..depth {
        let stride = 1usize << level;
        let next_len = (len << (level + 1)) + 1;
        let mut next = vec![0.0; next_len];
        for (n, out) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &hk) in h.iter().enumerate() {
                let shift = k * stride;
                if shift > n {
                    break;
                }
                if let Some(&v) = values.get(n - shift) {
                    acc += hk * v;
                }
            }
            *out = SQRT_2 * acc;
        }
        values = next;
    }
    let phi = values;

    // psi on [1-M, M]: sample m sits at x = (1-M) + m 2^-J, and
    // phi(2x - k) is phi's sample (2(1-M) - k) 2^J + 2m.
    let m_vm = family.vanishing_moments() as i64;
    let scale = 1i64 << depth;
    let mut psi = vec![0.0; phi.len()];
    for (m, out) in psi.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in (2 - 2 * m_vm)..=1 {
            let hk = h[(1 - k) as usize];
            let g = if k.rem_euclid(2) == 0 { hk } else { -hk };
            let idx = (2 * (1 - m_vm) - k) * scale + 2 * m as i64;
            if idx >= 0 {
                if let Some(&v) = phi.get(idx as usize) {
                    acc += g * v;
                }
            }
        }
        *out = SQRT_2 * acc;
    }

    Ok(WaveletTable {
        family: family.clone(),
        depth,
        phi,
        psi,
    })
}

impl WaveletTable {
    pub fn family(&self) -> &WaveletFamily {
        &self.family
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn phi_values(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi_values(&self) -> &[f64] {
        &self.psi
    }

    pub fn step(&self) -> f64 {
        (-(self.depth as f64)).exp2()
    }

    /// Support and samples of `phi` (`wavelet == false`) or `psi`.
    fn samples(&self, wavelet: bool) -> (i64, i64, &[f64]) {
        if wavelet {
            let (a, b) = self.family.wavelet_support();
            (a, b, &self.psi)
        } else {
            let (a, b) = self.family.scaling_support();
            (a, b, &self.phi)
        }
    }

    /// Piecewise-linear interpolant of the table at `x`; zero off support.
    pub fn eval(&self, wavelet: bool, x: f64) -> f64 {
        let (a, b, values) = self.samples(wavelet);
        if x < a as f64 || x > b as f64 {
            return 0.0;
        }
        let pos = (x - a as f64) * (self.depth as f64).exp2();
        let i = pos.floor();
        let frac = pos - i;
        let i = i as usize;
        let left = values.get(i).copied().unwrap_or(0.0);
        if frac == 0.0 {
            left
        } else {
            let right = values.get(i + 1).copied().unwrap_or(0.0);
            left + frac * (right - left)
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.eval(false, x)
    }

    pub fn psi(&self, x: f64) -> f64 {
        self.eval(true, x)
    }
}

/// Smallest `w` for which the support of `psi_{w,0,l}`, centered, fits in
/// the open Euclidean ball of radius 1/2 in `R^d`.
pub fn minimal_scaling_shift(family: &WaveletFamily, d: usize) -> u32 {
    let half_width = family.support_length() as f64 / 2.0;
    let radius = half_width * (d as f64).sqrt();
    let mut w = 0u32;
    while radius * (-(w as f64)).exp2() >= 0.5 {
        w += 1;
    }
    w
}

/// Wavelet index `(j, k, l)` on the d-torus. `l` is a bit mask: bit `i`
/// selects the wavelet (1) or the scaling function (0) in coordinate `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PeriodizedIndex {
    pub j: u32,
    pub k: Vec<u64>,
    pub l: u32,
}

impl PeriodizedIndex {
    pub fn new(j: u32, k: Vec<u64>, l: u32) -> Result<Self> {
        let d = k.len();
        if !(1..=3).contains(&d) {
            return Err(invalid(format!("dimension {d} not in 1..=3")));
        }
        if j >= 63 {
            return Err(invalid("scale too large"));
        }
        if let Some(&bad) = k.iter().find(|&&ki| ki >= (1u64 << j)) {
            return Err(invalid(format!("shift {bad} outside K_{j}")));
        }
        if l >= (1 << d) {
            return Err(invalid(format!("type {l:#b} outside L_0 for d = {d}")));
        }
        if j >= 1 && l == 0 {
            return Err(invalid("the all-scaling type is only allowed at scale 0"));
        }
        Ok(PeriodizedIndex { j, k, l })
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    pub fn is_wavelet(&self, coord: usize) -> bool {
        (self.l >> coord) & 1 == 1
    }
}

/// Sparse vector over a 1-D grid: sorted, distinct indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVec {
    pub entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(i, v) in &self.entries {
            out[i] += v;
        }
        out
    }
}

/// Values of `2^{j/2} theta(2^j x - k)`, periodized over the unit interval,
/// at the points of `grid`; `theta` is `psi` if `wavelet` and `phi`
/// otherwise. Points off the table lattice are linearly interpolated.
pub fn evaluate_periodized_1d(
    table: &WaveletTable,
    j: u32,
    k: i64,
    wavelet: bool,
    grid: &DyadicGrid,
) -> SparseVec {
    let (a, b, _) = table.samples(wavelet);
    let n = grid.len() as i64;
    let offset = grid.kind.offset();
    // x_u = (u + o) / n, argument y = (u + o) 2^{j-R} - k
    let ratio = (j as f64 - grid.resolution as f64).exp2();
    let lo = (((k + a) as f64) / ratio - offset).ceil() as i64;
    let hi = (((k + b) as f64) / ratio - offset).floor() as i64;
    if hi < lo {
        return SparseVec::default();
    }
    let norm = (j as f64 / 2.0).exp2();
    let value_at = |u: i64| norm * table.eval(wavelet, (u as f64 + offset) * ratio - k as f64);

    if hi - lo + 1 >= n {
        let mut dense = vec![0.0; n as usize];
        for u in lo..=hi {
            dense[u.rem_euclid(n) as usize] += value_at(u);
        }
        SparseVec {
            entries: dense.into_iter().enumerate().collect(),
        }
    } else {
        let mut entries: Vec<(usize, f64)> =
            (lo..=hi).map(|u| (u.rem_euclid(n) as usize, value_at(u))).collect();
        entries.sort_unstable_by_key(|e| e.0);
        SparseVec { entries }
    }
}

/// Sparse tensor over a d-dimensional grid (flat indices, first coordinate
/// fastest).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseTensor {
    pub entries: Vec<(usize, f64)>,
}

impl SparseTensor {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Outer product of the one-dimensional factors of `index`, i.e. the values
/// of the periodized `psi^l_{j,k}` on `grid^d`.
pub fn evaluate_tensor(table: &WaveletTable, index: &PeriodizedIndex, grid: &DyadicGrid) -> SparseTensor {
    let factors: Vec<SparseVec> = (0..index.dim())
        .map(|c| evaluate_periodized_1d(table, index.j, index.k[c] as i64, index.is_wavelet(c), grid))
        .collect();
    outer_product(&factors, grid.len())
}

pub(crate) fn outer_product(factors: &[SparseVec], side: usize) -> SparseTensor {
    let mut entries: Vec<(usize, f64)> = vec![(0, 1.0)];
    let mut stride = 1usize;
    for f in factors {
        let mut next = Vec::with_capacity(entries.len() * f.len());
        for &(i, v) in &f.entries {
            for &(flat, acc) in &entries {
                next.push((flat + i * stride, acc * v));
            }
        }
        entries = next;
        stride *= side;
    }
    SparseTensor { entries }
}
