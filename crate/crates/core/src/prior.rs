//! Truncated Besov random tree priors: p-exponential wavelet coefficients
//! switched on by a Galton–Watson tree, evaluated on dyadic grids.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::galton_watson::{index_to_shift, sample_tree, ActiveIndexSet, TreeParams};
use crate::grid::{DyadicGrid, GridField};
use crate::rng::{StreamKey, StreamRole};
use crate::wavelet::{evaluate_periodized_1d, SparseVec, WaveletFamily, WaveletTable};

/// Largest `|b|` accepted before `exp` is considered degenerate.
pub const EXP_LIMIT: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorParams {
    pub s: f64,
    pub p: f64,
    pub kappa: f64,
    pub tree: TreeParams,
    pub truncation: u32,
}

impl PriorParams {
    pub fn new(s: f64, p: f64, kappa: f64, tree: TreeParams, truncation: u32) -> Result<Self> {
        if !(s > 0.0) {
            return Err(invalid(format!("smoothness s = {s} must be positive")));
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(invalid(format!("integrability p = {p} must lie in [1, inf)")));
        }
        if !(kappa > 0.0) {
            return Err(invalid(format!("scaling kappa = {kappa} must be positive")));
        }
        let d = tree.dim() as f64;
        if s * p <= d {
            return Err(invalid(format!("need s p > d, got s p = {}", s * p)));
        }
        Ok(PriorParams {
            s,
            p,
            kappa,
            tree,
            truncation,
        })
    }

    pub fn dim(&self) -> usize {
        self.tree.dim()
    }

    pub fn with_truncation(self, truncation: u32) -> Self {
        PriorParams { truncation, ..self }
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Ok(PriorParams {
            tree: TreeParams::new(self.tree.dim(), beta)?,
            ..self
        })
    }

    /// Whether the family is at least as smooth as the prior (`s ≤ α`).
    pub fn within_family_smoothness(&self, family: &WaveletFamily) -> bool {
        self.s <= family.hoelder_alpha()
    }

    /// Number of wavelet types `|L_j|` per node at scale `j`.
    pub fn types_at(&self, j: u32) -> usize {
        types_at(self.dim(), j)
    }
}

fn types_at(d: usize, j: u32) -> usize {
    if j == 0 {
        1 << d
    } else {
        (1 << d) - 1
    }
}

/// Type masks in `L_j`, ascending.
fn type_masks(d: usize, j: u32) -> std::ops::Range<u32> {
    let first = u32::from(j > 0);
    first..(1u32 << d)
}

/// `η_j = 2^{-j(s + d/2 - d/p)}`.
pub fn eta(j: u32, params: &PriorParams) -> f64 {
    let d = params.dim() as f64;
    (-(j as f64) * (params.s + d / 2.0 - d / params.p)).exp2()
}

/// The p-exponential law with density proportional to `exp(-|x|^p / κ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PExponential {
    p: f64,
    kappa: f64,
    lambda: f64,
    log_bound: f64,
}

impl PExponential {
    pub fn new(p: f64, kappa: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(invalid(format!("p = {p} must lie in [1, inf)")));
        }
        if !(kappa > 0.0) {
            return Err(invalid(format!("kappa = {kappa} must be positive")));
        }
        // Laplace envelope of scale λ; the log ratio -x^p/κ + x/λ peaks at x*.
        let lambda = kappa.powf(1.0 / p);
        let log_bound = if p > 1.0 {
            let x = (kappa / (p * lambda)).powf(1.0 / (p - 1.0));
            -x.powf(p) / kappa + x / lambda
        } else {
            0.0
        };
        Ok(PExponential {
            p,
            kappa,
            lambda,
            log_bound,
        })
    }

    fn laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>() - 0.5;
        -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }
}

impl Distribution<f64> for PExponential {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.p == 2.0 {
            return Normal::new(0.0, (self.kappa / 2.0).sqrt())
                .expect("positive variance")
                .sample(rng);
        }
        if self.p == 1.0 {
            return Self::laplace(self.kappa, rng);
        }
        loop {
            let x = Self::laplace(self.lambda, rng);
            let a = x.abs();
            let log_accept = -a.powf(self.p) / self.kappa + a / self.lambda - self.log_bound;
            if rng.random::<f64>().ln() < log_accept {
                return x;
            }
        }
    }
}

pub fn sample_p_exponential<R: Rng + ?Sized>(p: f64, kappa: f64, rng: &mut R) -> Result<f64> {
    Ok(PExponential::new(p, kappa)?.sample(rng))
}

/// One sample of the truncated prior: its tree and the coefficients
/// `X^l_{j,k}`, stored per scale node-major with the types of `L_j` inner.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldRealization {
    params: PriorParams,
    active: ActiveIndexSet,
    coefficients: Vec<Vec<f64>>,
}

impl FieldRealization {
    pub fn from_parts(
        params: PriorParams,
        active: ActiveIndexSet,
        coefficients: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if active.dim() != params.dim() {
            return Err(invalid("tree dimension differs from prior dimension"));
        }
        if active.max_scale() != params.truncation {
            return Err(invalid("tree depth differs from the truncation level"));
        }
        if coefficients.len() != active.max_scale() as usize + 1 {
            return Err(invalid("coefficient scales do not match the tree"));
        }
        for (j, c) in coefficients.iter().enumerate() {
            let expect = active.count(j as u32) * params.types_at(j as u32);
            if c.len() != expect {
                return Err(invalid(format!(
                    "scale {j} has {} coefficients, expected {expect}",
                    c.len()
                )));
            }
        }
        Ok(FieldRealization {
            params,
            active,
            coefficients,
        })
    }

    /// The field that is zero except for the constant term `c`.
    pub fn constant(params: PriorParams, c: f64) -> Self {
        let params = params.with_truncation(0);
        let d = params.dim();
        let mut coefficients = vec![vec![0.0; 1 << d]];
        coefficients[0][0] = c;
        FieldRealization {
            params,
            active: ActiveIndexSet::root(d),
            coefficients,
        }
    }

    pub fn params(&self) -> &PriorParams {
        &self.params
    }

    pub fn active(&self) -> &ActiveIndexSet {
        &self.active
    }

    /// Coefficients at scale `j`; entry `i·|L_j| + t` belongs to the `i`-th
    /// node and the `t`-th type of `L_j`.
    pub fn coefficients(&self, j: u32) -> &[f64] {
        &self.coefficients[j as usize]
    }

    pub fn coefficient_count(&self) -> usize {
        self.coefficients.iter().map(Vec::len).sum()
    }

    /// The same realization with scales above `n` dropped.
    pub fn truncated(&self, n: u32) -> FieldRealization {
        let n = n.min(self.params.truncation);
        FieldRealization {
            params: self.params.with_truncation(n),
            active: self.active.truncated(n),
            coefficients: self.coefficients[..=n as usize].to_vec(),
        }
    }

    /// `b_{T,N_max} - b_{T,n}`: the same tree with every coefficient at
    /// scales `≤ n` set to zero.
    pub fn tail(&self, n: u32) -> FieldRealization {
        let mut coefficients = self.coefficients.clone();
        for c in coefficients.iter_mut().take(n as usize + 1) {
            c.iter_mut().for_each(|x| *x = 0.0);
        }
        FieldRealization {
            params: self.params,
            active: self.active.clone(),
            coefficients,
        }
    }

    /// Coefficientwise sum of two realizations on the same tree.
    pub fn add(&self, other: &FieldRealization) -> Result<FieldRealization> {
        if self.active != other.active || self.params != other.params {
            return Err(invalid("fields must share their tree and parameters"));
        }
        let coefficients = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(FieldRealization {
            params: self.params,
            active: self.active.clone(),
            coefficients,
        })
    }

    /// `(j, k, l, X)` for every stored coefficient.
    pub fn terms(&self) -> impl Iterator<Item = (u32, Vec<u64>, u32, f64)> + '_ {
        let d = self.params.dim();
        (0..=self.params.truncation).flat_map(move |j| {
            let types: Vec<u32> = type_masks(d, j).collect();
            let coeffs = &self.coefficients[j as usize];
            self.active
                .nodes(j)
                .iter()
                .enumerate()
                .flat_map(move |(i, &m)| {
                    let k = index_to_shift(d, j, m);
                    let types = types.clone();
                    let row = &coeffs[i * types.len()..(i + 1) * types.len()];
                    types
                        .into_iter()
                        .zip(row.iter().copied())
                        .map(move |(l, x)| (j, k.clone(), l, x))
                })
        })
    }
}

/// Draws the tree and, independently, i.i.d. p-exponential coefficients.
/// The coefficients of node `(j, m)` come from the coefficient stream of
/// that node, so they are shared across truncations and densities.
pub fn sample_field(params: &PriorParams, key: &StreamKey) -> Result<FieldRealization> {
    let law = PExponential::new(params.p, params.kappa)?;
    let active = sample_tree(&params.tree, params.truncation, &key.node_streams(StreamRole::Tree));
    let streams = key.node_streams(StreamRole::Coefficients);
    let coefficients = (0..=params.truncation)
        .map(|j| {
            let per = params.types_at(j);
            let mut out = Vec::with_capacity(active.count(j) * per);
            for &m in active.nodes(j) {
                let mut rng = streams.node(j, m);
                out.extend((0..per).map(|_| law.sample(&mut rng)));
            }
            out
        })
        .collect();
    FieldRealization::from_parts(*params, active, coefficients)
}

/// `J = max(⌈N t / α⌉, R + 2)`, which keeps every dyadic grid of
/// resolution at most `R` on the table lattice.
pub fn cascade_depth(truncation: u32, t: f64, alpha: f64, resolution: u32) -> u32 {
    let rule = (truncation as f64 * t / alpha - 1e-9).ceil().max(1.0) as u32;
    rule.max(resolution + 2)
}

/// A grid evaluation together with the number of grid-point updates it
/// took (the evaluation cost).
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub field: GridField,
    pub touched: u64,
}

/// `b_{T,N}` on the tensor grid `grid^d`.
pub fn evaluate_field(field: &FieldRealization, grid: DyadicGrid, table: &WaveletTable) -> Evaluation {
    let d = field.params.dim();
    let side = grid.len();
    let mut out = GridField::zeros(d, grid);
    let mut touched = 0u64;
    for j in 0..=field.params.truncation {
        let scale = eta(j, &field.params);
        let types: Vec<u32> = type_masks(d, j).collect();
        let coeffs = &field.coefficients[j as usize];
        for (i, &m) in field.active.nodes(j).iter().enumerate() {
            let k = index_to_shift(d, j, m);
            // factors[c][bit]: scaling (0) or wavelet (1) along coordinate c
            let factors: Vec<[SparseVec; 2]> = k
                .iter()
                .map(|&kc| {
                    [
                        evaluate_periodized_1d(table, j, kc as i64, false, &grid),
                        evaluate_periodized_1d(table, j, kc as i64, true, &grid),
                    ]
                })
                .collect();
            for (t, &l) in types.iter().enumerate() {
                let x = coeffs[i * types.len() + t];
                let picked: Vec<&SparseVec> =
                    (0..d).map(|c| &factors[c][((l >> c) & 1) as usize]).collect();
                touched += picked.iter().map(|f| f.len() as u64).product::<u64>();
                if x != 0.0 {
                    accumulate(&mut out.values, side, &picked, scale * x);
                }
            }
        }
    }
    Evaluation { field: out, touched }
}

/// Adds `weight · f_0 ⊗ … ⊗ f_{d-1}` into a dense grid (first coordinate
/// fastest).
fn accumulate(values: &mut [f64], side: usize, factors: &[&SparseVec], weight: f64) {
    fn rec(values: &mut [f64], side: usize, factors: &[&SparseVec], base: usize, weight: f64) {
        let c = factors.len() - 1;
        let stride = side.pow(c as u32);
        for &(i, v) in &factors[c].entries {
            if c == 0 {
                values[base + i] += weight * v;
            } else {
                rec(values, side, &factors[..c], base + i * stride, weight * v);
            }
        }
    }
    rec(values, side, factors, 0, weight);
}

/// `exp(b_{T,N})` at the cell midpoints of the mesh with `2^resolution`
/// cells per side.
pub fn coefficient_on_midpoints(
    field: &FieldRealization,
    resolution: u32,
    table: &WaveletTable,
) -> Result<GridField> {
    let b = evaluate_field(field, DyadicGrid::midpoint(resolution), table).field;
    let worst = b.sup_norm();
    if !(worst <= EXP_LIMIT) {
        return Err(Error::DegenerateSample { magnitude: worst });
    }
    Ok(b.map(f64::exp))
}

/// Besov norm of the stored expansion in `B^t_{q,q}`, read off the wavelet
/// coefficients `η_j X`; `q = inf` gives the sup form.
pub fn besov_norm(field: &FieldRealization, t: f64, q: f64) -> f64 {
    let d = field.params.dim() as f64;
    if q.is_infinite() {
        return field.terms().fold(0.0, |acc, (j, _, _, x)| {
            let w = (j as f64 * (t + d / 2.0)).exp2();
            acc.max(w * eta(j, &field.params) * x.abs())
        });
    }
    let sum: f64 = field
        .terms()
        .map(|(j, _, _, x)| {
            let w = (j as f64 * q * (t + d / 2.0 - d / q)).exp2();
            w * (eta(j, &field.params) * x.abs()).powf(q)
        })
        .sum();
    sum.powf(1.0 / q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::cascade;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(d: usize, beta: f64, n: u32) -> PriorParams {
        PriorParams::new(2.0, 2.0, 1.0, TreeParams::new(d, beta).unwrap(), n).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        let tree = TreeParams::new(2, 0.5).unwrap();
        assert!(PriorParams::new(0.0, 2.0, 1.0, tree, 3).is_err());
        assert!(PriorParams::new(1.0, 0.5, 1.0, tree, 3).is_err());
        assert!(PriorParams::new(1.0, 2.0, 0.0, tree, 3).is_err());
        assert!(PriorParams::new(1.0, 2.0, 1.0, tree, 3).is_err());
        assert!(PriorParams::new(1.5, 2.0, 1.0, tree, 3).is_ok());
    }

    #[test]
    fn eta_examples() {
        let p = params(2, 0.5, 3);
        assert_eq!(eta(0, &p), 1.0);
        assert_eq!(eta(3, &p), 2f64.powi(-6));
        let q = PriorParams::new(2.0, 1.6, 1.0, TreeParams::new(2, 0.75).unwrap(), 3).unwrap();
        assert!((eta(2, &q) - 2f64.powf(-3.5)).abs() < 1e-15);
    }

    #[test]
    fn gaussian_and_laplace_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let g = PExponential::new(2.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // se of the second moment: sqrt((3σ⁴ - σ⁴)/n) with σ² = 1/2
        assert!((var - 0.5).abs() < 3.0 * (0.5f64 / n as f64).sqrt());
        let l = PExponential::new(1.0, 1.0).unwrap();
        let ys: Vec<f64> = (0..n).map(|_| l.sample(&mut rng)).collect();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * (2.0 / n as f64).sqrt());
        // fourth moment of Laplace(1) is 24, so var(x²) = 20
        assert!((var - 2.0).abs() < 3.0 * (20.0 / n as f64).sqrt());
    }

    /// `E|X|^m` for density ∝ exp(-|x|^p/κ) by the substitution-free
    /// trapezoid rule on a wide interval.
    fn quadrature_abs_moment(p: f64, kappa: f64, m: i32) -> f64 {
        let (h, top) = (1e-4f64, 20.0f64);
        let (mut num, mut den) = (0.0f64, 0.0f64);
        let mut x = 0.0f64;
        while x < top {
            let w = if x == 0.0 { 0.5 } else { 1.0 };
            let f = (-x.powf(p) / kappa).exp();
            num += w * x.powi(m) * f;
            den += w * f;
            x += h;
        }
        num / den
    }

    #[test]
    fn rejection_sampler_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in [1.2, 1.6, 3.0] {
            let law = PExponential::new(p, 1.0).unwrap();
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let m1 = xs.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
            let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
            let e1 = quadrature_abs_moment(p, 1.0, 1);
            assert!((m2 - quadrature_abs_moment(p, 1.0, 2)).abs() < 0.02);
            let e2 = quadrature_abs_moment(p, 1.0, 2);
            let se = ((e2 - e1 * e1) / n as f64).sqrt();
            assert!((m1 - e1).abs() < 4.0 * se, "p={p}: {m1} vs {e1}");
            let skew = xs.iter().map(|x| x.powi(3)).sum::<f64>() / n as f64;
            let se3 = (quadrature_abs_moment(p, 1.0, 6) / n as f64).sqrt();
            assert!(skew.abs() < 4.0 * se3, "p={p}: third moment {skew}");
        }
    }

    #[test]
    fn coefficient_counts() {
        let key = StreamKey::new(1);
        let f = sample_field(&params(2, 0.0, 4), &key).unwrap();
        assert_eq!(f.coefficient_count(), 4);
        let g = sample_field(&params(1, 1.0, 2), &key).unwrap();
        assert_eq!(g.coefficient_count(), 8);
    }

    #[test]
    fn constant_field_evaluates_to_constant() {
        let t = cascade(&WaveletFamily::daubechies5(), 8).unwrap();
        let f = FieldRealization::constant(params(2, 0.5, 3), 0.7);
        let e = evaluate_field(&f, DyadicGrid::midpoint(4), &t);
        assert!(e.field.values.iter().all(|&v| (v - 0.7).abs() < 1e-12));
        let a = coefficient_on_midpoints(&f, 4, &t).unwrap();
        assert!(a.values.iter().all(|&v| (v - 0.7f64.exp()).abs() < 1e-12));
        let z = coefficient_on_midpoints(&FieldRealization::constant(params(2, 0.5, 3), 0.0), 3, &t).unwrap();
        assert!(z.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn overflow_is_reported() {
        let t = cascade(&WaveletFamily::haar(), 6).unwrap();
        let f = FieldRealization::constant(params(2, 0.5, 3), 800.0);
        assert!(matches!(
            coefficient_on_midpoints(&f, 2, &t),
            Err(Error::DegenerateSample { .. })
        ));
    }

    #[test]
    fn single_haar_wavelet_in_one_dimension() {
        let t = cascade(&WaveletFamily::haar(), 8).unwrap();
        let p = params(1, 1.0, 1);
        let active = crate::galton_watson::grow_tree(&p.tree, 1, |_, idx| idx == 0);
        let f = FieldRealization::from_parts(p, active, vec![vec![0.0, 0.0], vec![1.0]]).unwrap();
        let e = evaluate_field(&f, DyadicGrid::lattice(3), &t).field;
        let c = eta(1, &p) * std::f64::consts::SQRT_2;
        let expect = [c, c, -c, -c, 0.0, 0.0, 0.0, 0.0];
        for (a, b) in e.values.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{:?}", e.values);
        }
    }

    #[test]
    fn besov_norm_single_term_and_zero() {
        let p = params(2, 1.0, 2);
        let active = crate::galton_watson::grow_tree(&p.tree, 2, |_, _| true);
        let mut coeffs: Vec<Vec<f64>> = (0..=2u32)
            .map(|j| vec![0.0; active.count(j) * p.types_at(j)])
            .collect();
        let zero = FieldRealization::from_parts(p, active.clone(), coeffs.clone()).unwrap();
        assert_eq!(besov_norm(&zero, 1.0, 2.0), 0.0);
        coeffs[2][5] = -1.5;
        let f = FieldRealization::from_parts(p, active, coeffs).unwrap();
        let (t, q) = (1.0f64, 2.0f64);
        let expect = (2.0 * (t + 1.0 - 2.0 / q)).exp2() * eta(2, &p) * 1.5;
        assert!((besov_norm(&f, t, q) - expect).abs() < 1e-14);
        let expect_inf = (2.0 * (t + 1.0)).exp2() * eta(2, &p) * 1.5;
        assert!((besov_norm(&f, t, f64::INFINITY) - expect_inf).abs() < 1e-14);
    }

    #[test]
    fn cascade_depth_rule() {
        assert_eq!(cascade_depth(10, 1.0, 1.177, 3), 9);
        assert_eq!(cascade_depth(4, 1.0, 1.177, 9), 11);
    }

    proptest! {
        #[test]
        fn linearity_on_shared_tree(seed in any::<u64>()) {
            let t = cascade(&WaveletFamily::daubechies5(), 7).unwrap();
            let p = params(2, 0.6, 3);
            let a = sample_field(&p, &StreamKey::new(seed)).unwrap();
            let mut b = sample_field(&p, &StreamKey::new(seed).with_sample(1)).unwrap();
            b.active = a.active.clone();
            b.coefficients = a.coefficients.iter().map(|c| c.iter().map(|x| 0.5 - x).collect()).collect();
            let g = DyadicGrid::midpoint(5);
            let ea = evaluate_field(&a, g, &t).field;
            let eb = evaluate_field(&b, g, &t).field;
            let es = evaluate_field(&a.add(&b).unwrap(), g, &t).field;
            for i in 0..es.len() {
                prop_assert!((es.values[i] - ea.values[i] - eb.values[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn tail_is_the_truncation_remainder(seed in any::<u64>(), cut in 0u32..4) {
            let t = cascade(&WaveletFamily::daubechies5(), 7).unwrap();
            let f = sample_field(&params(2, 0.6, 4), &StreamKey::new(seed)).unwrap();
            let g = DyadicGrid::lattice(5);
            let full = evaluate_field(&f, g, &t).field;
            let head = evaluate_field(&f.truncated(cut), g, &t).field;
            let tail = evaluate_field(&f.tail(cut), g, &t).field;
            for i in 0..full.len() {
                prop_assert!((full.values[i] - head.values[i] - tail.values[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn norm_is_monotone_under_truncation(seed in any::<u64>(), cut in 0u32..5, q in 1.0f64..4.0) {
            let p = params(2, 0.7, 4);
            let f = sample_field(&p, &StreamKey::new(seed)).unwrap();
            prop_assert!(besov_norm(&f.truncated(cut), 1.0, q) <= besov_norm(&f, 1.0, q) + 1e-12);
            prop_assert!(besov_norm(&f.truncated(cut), 1.0, f64::INFINITY) <= besov_norm(&f, 1.0, f64::INFINITY));
        }

        #[test]
        fn truncation_matches_direct_sampling(seed in any::<u64>(), cut in 0u32..5) {
            let p = params(2, 0.5, 4);
            let key = StreamKey::new(seed);
            let deep = sample_field(&p, &key).unwrap();
            let shallow = sample_field(&p.with_truncation(cut), &key).unwrap();
            prop_assert_eq!(deep.truncated(cut), shallow);
        }

        #[test]
        fn coefficient_storage_matches_tree(seed in any::<u64>(), d in 1usize..=3, beta in 0.0f64..=1.0) {
            let p = PriorParams::new(2.0, 2.0, 1.0, TreeParams::new(d, beta).unwrap(), 3).unwrap();
            let f = sample_field(&p, &StreamKey::new(seed)).unwrap();
            let expect: usize = (0..=3).map(|j| f.active().count(j) * p.types_at(j)).sum();
            prop_assert_eq!(f.coefficient_count(), expect);
            prop_assert_eq!(f.terms().count(), expect);
        }
    }
}
