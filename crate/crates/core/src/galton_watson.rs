//! Depth-truncated binomial Galton–Watson trees over the wavelet index set.
//!
//! A node at depth `j` is identified by its 0-based linear index
//! `m = I¹(node) - 1` in `0..2^{dj}`; its children occupy the slots
//! `m·2^d + c` for `c in 0..2^d`. The shift `k ∈ K_j` of a node is read off
//! `m` by splitting each base-`2^d` digit into its `d` bits, one per
//! coordinate, so that children of `(j, k)` are the `(j+1, 2k + e)`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{invalid, Result};
use crate::rng::{NodeStreams, MAX_NODE_BITS};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeParams {
    dim: usize,
    beta: f64,
}

impl TreeParams {
    pub fn new(dim: usize, beta: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid(format!("dimension {dim} not in 1..=3")));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(invalid(format!("wavelet density {beta} not in [0, 1]")));
        }
        Ok(TreeParams { dim, beta })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `γ = d + log2 β`; `-inf` for `β = 0`.
    pub fn gamma(&self) -> f64 {
        self.dim as f64 + self.beta.log2()
    }

    pub fn children_per_node(&self) -> usize {
        1 << self.dim
    }

    /// Mean offspring count `2^d β`.
    pub fn mean_offspring(&self) -> f64 {
        self.children_per_node() as f64 * self.beta
    }
}

/// Nodes kept by a depth-truncated tree, as sorted 0-based linear indices
/// per scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveIndexSet {
    dim: usize,
    levels: Vec<Vec<u64>>,
}

impl ActiveIndexSet {
    /// The tree consisting of the root only.
    pub fn root(dim: usize) -> Self {
        ActiveIndexSet {
            dim,
            levels: vec![vec![0]],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_scale(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    /// Linear indices present at scale `j` (empty beyond the depth).
    pub fn nodes(&self, j: u32) -> &[u64] {
        self.levels.get(j as usize).map_or(&[], Vec::as_slice)
    }

    /// `v(j)`, the number of nodes at scale `j`.
    pub fn count(&self, j: u32) -> usize {
        self.nodes(j).len()
    }

    pub fn total(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, j: u32, index: u64) -> bool {
        self.nodes(j).binary_search(&index).is_ok()
    }

    /// Shifts present at scale `j`, in linear-index order.
    pub fn shifts(&self, j: u32) -> impl Iterator<Item = Vec<u64>> + '_ {
        let d = self.dim;
        self.nodes(j).iter().map(move |&m| index_to_shift(d, j, m))
    }

    /// All `(j, k)` pairs, scale by scale.
    pub fn pairs(&self) -> Vec<(u32, Vec<u64>)> {
        (0..=self.max_scale())
            .flat_map(|j| self.shifts(j).map(move |k| (j, k)))
            .collect()
    }

    /// The same tree cut at depth `n`.
    pub fn truncated(&self, n: u32) -> ActiveIndexSet {
        let keep = (n as usize + 1).min(self.levels.len());
        ActiveIndexSet {
            dim: self.dim,
            levels: self.levels[..keep].to_vec(),
        }
    }

    /// Whether every node below the root has its parent present.
    pub fn is_ancestor_closed(&self) -> bool {
        (1..=self.max_scale()).all(|j| {
            self.nodes(j)
                .iter()
                .all(|&m| self.contains(j - 1, m >> self.dim))
        })
    }
}

/// `I¹`: a node `(n_1, …, n_j)` with entries in `1..=2^d` to its 1-based
/// linear index `1 + Σ 2^{d(j-i)} (n_i - 1)`.
pub fn node_to_linear(d: usize, node: &[u32]) -> Result<u64> {
    check_dim(d)?;
    if node.is_empty() {
        return Err(invalid("a node below the root has at least one entry"));
    }
    if node.len() as u32 * d as u32 > MAX_NODE_BITS {
        return Err(invalid("node too deep"));
    }
    let width = 1u32 << d;
    let mut m = 0u64;
    for &n in node {
        if n == 0 || n > width {
            return Err(invalid(format!("node entry {n} not in 1..={width}")));
        }
        m = (m << d) | u64::from(n - 1);
    }
    Ok(m + 1)
}

/// Inverse of [`node_to_linear`].
pub fn linear_to_node(d: usize, j: u32, n: u64) -> Result<Vec<u32>> {
    check_range(d, j, n)?;
    let m = n - 1;
    let mask = (1u64 << d) - 1;
    Ok((0..j)
        .map(|i| ((m >> (d as u32 * (j - 1 - i))) & mask) as u32 + 1)
        .collect())
}

/// `I²`: a 1-based linear index at depth `j` to its shift `k ∈ K_j`.
pub fn linear_to_shift(d: usize, j: u32, n: u64) -> Result<Vec<u64>> {
    check_range(d, j, n)?;
    Ok(index_to_shift(d, j, n - 1))
}

/// Inverse of [`linear_to_shift`].
pub fn shift_to_linear(d: usize, j: u32, k: &[u64]) -> Result<u64> {
    check_dim(d)?;
    if k.len() != d {
        return Err(invalid(format!("shift has {} coordinates, expected {d}", k.len())));
    }
    if j as usize * d > MAX_NODE_BITS as usize {
        return Err(invalid("scale too deep"));
    }
    if let Some(bad) = k.iter().find(|&&ki| ki >> j != 0) {
        return Err(invalid(format!("shift {bad} outside K_{j}")));
    }
    let mut m = 0u64;
    for bit in (0..j).rev() {
        for (c, &kc) in k.iter().enumerate() {
            m |= ((kc >> bit) & 1) << (bit as usize * d + c);
        }
    }
    Ok(m + 1)
}

pub(crate) fn index_to_shift(d: usize, j: u32, m: u64) -> Vec<u64> {
    (0..d)
        .map(|c| {
            (0..j).fold(0u64, |acc, bit| acc | (((m >> (bit as usize * d + c)) & 1) << bit))
        })
        .collect()
}

fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(invalid(format!("dimension {d} not in 1..=3")))
    }
}

fn check_range(d: usize, j: u32, n: u64) -> Result<()> {
    check_dim(d)?;
    if j as usize * d > MAX_NODE_BITS as usize {
        return Err(invalid("scale too deep"));
    }
    let top = 1u64 << (j as usize * d);
    if n == 0 || n > top {
        return Err(invalid(format!("linear index {n} not in 1..={top}")));
    }
    Ok(())
}

/// Grows a tree breadth-first to depth `max_scale`; child slot `idx` at
/// scale `j` is kept iff `survive(j, idx)`.
pub fn grow_tree(
    params: &TreeParams,
    max_scale: u32,
    mut survive: impl FnMut(u32, u64) -> bool,
) -> ActiveIndexSet {
    let d = params.dim();
    assert!(max_scale as usize * d <= MAX_NODE_BITS as usize, "tree too deep");
    let width = params.children_per_node() as u64;
    let mut levels: Vec<Vec<u64>> = vec![vec![0]];
    for j in 1..=max_scale {
        let parents = &levels[j as usize - 1];
        let mut next = Vec::new();
        for &m in parents {
            for c in 0..width {
                let child = (m << d) | c;
                if survive(j, child) {
                    next.push(child);
                }
            }
        }
        levels.push(next);
    }
    ActiveIndexSet { dim: d, levels }
}

/// Samples a tree with survival uniform `U_{j,idx}` read from the node
/// streams: child slot `c` of parent `m` uses draw `c` of stream `(j, m)`.
/// A slot survives iff `U < β`, so trees for different `β` drawn from the
/// same streams are nested.
pub fn sample_tree(params: &TreeParams, max_scale: u32, streams: &NodeStreams) -> ActiveIndexSet {
    let d = params.dim();
    let beta = params.beta();
    let width = params.children_per_node();
    let mut cache: Option<(u32, u64, [f64; 8])> = None;
    grow_tree(params, max_scale, |j, child| {
        let parent = child >> d;
        let slot = (child & (width as u64 - 1)) as usize;
        let hit = matches!(cache, Some((cj, cm, _)) if cj == j && cm == parent);
        if !hit {
            let mut rng = streams.node(j, parent);
            let mut u = [0.0; 8];
            for v in u.iter_mut().take(width) {
                *v = rng.random::<f64>();
            }
            cache = Some((j, parent, u));
        }
        cache.as_ref().expect("filled above").2[slot] < beta
    })
}

/// Probability that the untruncated tree is finite: 1 if `2^d β ≤ 1`, else
/// the smallest fixed point of `q = ((1-β) + βq)^{2^d}`.
pub fn extinction_probability(params: &TreeParams) -> f64 {
    if params.mean_offspring() <= 1.0 {
        return 1.0;
    }
    let beta = params.beta();
    let width = params.children_per_node() as i32;
    let mut q = 0.0f64;
    for _ in 0..10_000_000 {
        let next = ((1.0 - beta) + beta * q).powi(width);
        if (next - q).abs() < 1e-15 {
            return next;
        }
        q = next;
    }
    q
}

/// `P(Z_j = 0)` after `depth` generations: the `depth`-fold iterate of the
/// offspring generating function at 0.
pub fn extinct_by_depth_probability(params: &TreeParams, depth: u32) -> f64 {
    let beta = params.beta();
    let width = params.children_per_node() as i32;
    (0..depth).fold(0.0, |q, _| ((1.0 - beta) + beta * q).powi(width))
}

/// `E v(j) = 2^{jγ}`.
pub fn expected_nodes_per_scale(params: &TreeParams, j: u32) -> f64 {
    params.mean_offspring().powi(j as i32)
}

/// Generation sizes `Z_0 = 1, Z_1, …, Z_depth` of the untruncated process,
/// drawn as `Z_j ~ Bin(2^d Z_{j-1}, β)`. Stops early (returning fewer
/// entries) once the population is extinct.
pub fn simulate_generation_sizes<R: Rng + ?Sized>(
    params: &TreeParams,
    depth: u32,
    rng: &mut R,
) -> Vec<u64> {
    let width = params.children_per_node() as u64;
    let mut sizes = vec![1u64];
    let mut z = 1u64;
    for _ in 0..depth {
        let trials = z.saturating_mul(width);
        z = Binomial::new(trials, params.beta())
            .expect("beta validated in TreeParams")
            .sample(rng);
        sizes.push(z);
        if z == 0 {
            break;
        }
    }
    sizes
}

/// Whether the process is still alive after `depth` generations. Runs are
/// cut short once survival is certain to double precision.
pub fn survives_to_depth<R: Rng + ?Sized>(params: &TreeParams, depth: u32, rng: &mut R) -> bool {
    let q = extinction_probability(params);
    let width = params.children_per_node() as u64;
    let mut z = 1u64;
    for _ in 0..depth {
        if z == 0 {
            return false;
        }
        if q < 1.0 && (z as f64) * q.ln() < -745.0 {
            return true;
        }
        z = Binomial::new(z * width, params.beta())
            .expect("beta validated in TreeParams")
            .sample(rng);
    }
    z > 0
}
