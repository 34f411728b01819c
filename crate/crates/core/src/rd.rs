//! Block rate-distortion functions of discretized sources by Blahut–Arimoto.
//!
//! A source is reduced to a finite alphabet (`grid`) and an exact pmf over
//! `grid^m`. The reproduction alphabet is the same grid. The per-symbol
//! squared error `d_m` is separable, so the kernel `exp(β d_m)` is a Kronecker
//! power of one `G × G` matrix and every kernel application is a sequence of
//! mode products. Nothing of size `G^m × G^m` is ever formed.

use std::io::{BufRead, Write};

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::process::{ContinuousSpec, ProcessKind, ProcessSpec};

pub const MAX_BLOCK_LEN: usize = 3;
pub const MAX_CELLS: usize = 1024;
/// Upper limit on `|grid|^m`.
pub const MAX_STATES: usize = 1 << 22;
/// Weight of the uniform component mixed into a warm start, so that
/// reproduction points abandoned at one slope can be revived at the next.
pub const WARM_START_MIX: f64 = 1e-3;

pub type Tuple = SmallVec<[usize; MAX_BLOCK_LEN]>;

/// Exact pmf of `m` consecutive quantized source symbols.
///
/// The pmf is held densely in row-major order over `grid^m`; [`entries`]
/// gives the sparse view.
///
/// [`entries`]: DiscretizedBlock::entries
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedBlock {
    pub m: usize,
    pub grid: Vec<f64>,
    pub pmf: Vec<f64>,
    /// Width of the continuous cells, `None` for purely discrete sources.
    pub cell_width: Option<f64>,
    /// Grid indices that hold atoms of the source rather than cell midpoints.
    pub atom_indices: Vec<usize>,
}

impl DiscretizedBlock {
    /// Block of an i.i.d. source with the given single-letter pmf.
    pub fn iid(grid: Vec<f64>, marginal: &[f64], m: usize) -> Result<Self> {
        check_shape(&grid, m)?;
        if marginal.len() != grid.len() {
            return Err(Error::arg("pmf", "marginal length differs from grid"));
        }
        let g = grid.len();
        let mut pmf = vec![1.0];
        for _ in 0..m {
            let mut next = Vec::with_capacity(pmf.len() * g);
            for &a in &pmf {
                next.extend(marginal.iter().map(|&q| a * q));
            }
            pmf = next;
        }
        Self::finish(grid, pmf, m)
    }

    /// Block of a stationary first-order Markov chain with row-stochastic
    /// `transition` started from `initial`.
    pub fn markov(grid: Vec<f64>, initial: &[f64], transition: &Array2<f64>, m: usize) -> Result<Self> {
        check_shape(&grid, m)?;
        let g = grid.len();
        if initial.len() != g || transition.dim() != (g, g) {
            return Err(Error::arg("transition", "shape does not match grid"));
        }
        let mut pmf = initial.to_vec();
        for _ in 1..m {
            let mut next = Vec::with_capacity(pmf.len() * g);
            for (idx, &a) in pmf.iter().enumerate() {
                let last = idx % g;
                next.extend(transition.row(last).iter().map(|&t| a * t));
            }
            pmf = next;
        }
        Self::finish(grid, pmf, m)
    }

    /// As [`markov`](Self::markov), started from the stationary law of
    /// `transition` (found by power iteration).
    pub fn stationary_markov(grid: Vec<f64>, transition: &Array2<f64>, m: usize) -> Result<Self> {
        let g = grid.len();
        if transition.dim() != (g, g) {
            return Err(Error::arg("transition", "shape does not match grid"));
        }
        let mut pi = vec![1.0 / g as f64; g];
        for _ in 0..100_000 {
            let mut next = vec![0.0; g];
            for (i, &w) in pi.iter().enumerate() {
                for (j, &t) in transition.row(i).iter().enumerate() {
                    next[j] += w * t;
                }
            }
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= total);
            let moved: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if moved < 1e-15 {
                break;
            }
        }
        Self::markov(grid, &pi, transition, m)
    }

    fn finish(grid: Vec<f64>, pmf: Vec<f64>, m: usize) -> Result<Self> {
        let block = Self {
            m,
            grid,
            pmf,
            cell_width: None,
            atom_indices: Vec::new(),
        };
        block.validate()?;
        Ok(block)
    }

    pub fn alphabet(&self) -> usize {
        self.grid.len()
    }

    pub fn states(&self) -> usize {
        self.pmf.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::arg("grid", "grid must be strictly increasing"));
        }
        if self.pmf.len() != self.alphabet().pow(self.m as u32) {
            return Err(Error::arg("pmf", "pmf length is not |grid|^m"));
        }
        if self.pmf.iter().any(|&q| !(q >= 0.0)) {
            return Err(Error::arg("pmf", "negative or NaN probability"));
        }
        let total: f64 = self.pmf.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::arg("pmf", format!("block pmf sums to {total}")));
        }
        Ok(())
    }

    pub fn tuple_of(&self, mut index: usize) -> Tuple {
        let g = self.alphabet();
        let mut t: Tuple = SmallVec::from_elem(0, self.m);
        for slot in t.iter_mut().rev() {
            *slot = index % g;
            index /= g;
        }
        t
    }

    /// Nonzero cells as `(index tuple, probability)`.
    pub fn entries(&self) -> impl Iterator<Item = (Tuple, f64)> + '_ {
        self.pmf
            .iter()
            .enumerate()
            .filter(|(_, &q)| q > 0.0)
            .map(|(i, &q)| (self.tuple_of(i), q))
    }

    pub fn prob(&self, tuple: &[usize]) -> f64 {
        let g = self.alphabet();
        let idx = tuple.iter().fold(0usize, |acc, &t| acc * g + t);
        self.pmf[idx]
    }

    /// Entropy of the whole block in bits.
    pub fn entropy_bits(&self) -> f64 {
        -self
            .pmf
            .iter()
            .filter(|&&q| q > 0.0)
            .map(|&q| q * q.log2())
            .sum::<f64>()
    }

    /// Smallest per-symbol distortion reachable with one reproduction
    /// tuple. `d_m` is separable and the block is stationary, so this is the
    /// single-letter minimum.
    pub fn zero_rate_distortion(&self) -> f64 {
        let f = self.marginal();
        self.grid
            .iter()
            .map(|&y| {
                f.iter()
                    .zip(&self.grid)
                    .map(|(q, x)| q * (x - y) * (x - y))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Marginal of the first coordinate.
    pub fn marginal(&self) -> Vec<f64> {
        let g = self.alphabet();
        let stride = self.states() / g;
        (0..g)
            .map(|i| self.pmf[i * stride..(i + 1) * stride].iter().sum())
            .collect()
    }
}

fn check_shape(grid: &[f64], m: usize) -> Result<()> {
    if m == 0 || m > MAX_BLOCK_LEN {
        return Err(Error::Intractable(format!(
            "block length m={m} outside 1..={MAX_BLOCK_LEN}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::arg("grid", "empty grid"));
    }
    let states = (grid.len() as u128).pow(m as u32);
    if states > MAX_STATES as u128 {
        return Err(Error::Intractable(format!(
            "{}^{m} = {states} joint states exceeds {MAX_STATES}",
            grid.len()
        )));
    }
    Ok(())
}

/// Midpoints and exact masses of `n_cells` equal cells over the support.
fn cells(c: &ContinuousSpec, n_cells: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let w = c.width() / n_cells as f64;
    let edge = |k: usize| {
        if k == n_cells {
            c.support_high
        } else {
            c.support_low + k as f64 * w
        }
    };
    let mids = (0..n_cells)
        .map(|k| c.support_low + (k as f64 + 0.5) * w)
        .collect();
    let mut mass: Vec<f64> = (0..n_cells)
        .map(|k| c.interval_mass(edge(k), edge(k + 1)))
        .collect();
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|q| *q /= total);
    (mids, mass, w)
}

/// Merges `(value, mass)` points into a strictly increasing grid.
fn merge_points(points: &mut [(f64, f64, bool)]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut grid: Vec<f64> = Vec::with_capacity(points.len());
    let mut mass: Vec<f64> = Vec::with_capacity(points.len());
    let mut atoms = Vec::new();
    for &(v, q, is_atom) in points.iter() {
        if grid.last() == Some(&v) {
            *mass.last_mut().unwrap() += q;
        } else {
            grid.push(v);
            mass.push(q);
        }
        if is_atom && atoms.last() != Some(&(grid.len() - 1)) {
            atoms.push(grid.len() - 1);
        }
    }
    (grid, mass, atoms)
}

/// Exact finite-alphabet surrogate of `m` consecutive source symbols, with
/// `n_cells` uniform cells over the continuous support and every atom kept
/// as its own grid point.
pub fn discretize_source(spec: &ProcessSpec, m: usize, n_cells: usize) -> Result<DiscretizedBlock> {
    spec.ensure_valid()?;
    if n_cells == 0 || n_cells > MAX_CELLS {
        return Err(Error::Intractable(format!("N={n_cells} outside 1..={MAX_CELLS}")));
    }
    if m == 0 || m > MAX_BLOCK_LEN {
        return Err(Error::Intractable(format!(
            "block length m={m} outside 1..={MAX_BLOCK_LEN}"
        )));
    }
    let mut points: Vec<(f64, f64, bool)> = Vec::new();
    let mut cell_width = None;
    match spec.kind {
        ProcessKind::IidDiscrete => {
            points.extend(
                spec.discrete_pmf
                    .iter()
                    .filter(|p| p.1 > 0.0)
                    .map(|&(v, q)| (v, q, true)),
            );
        }
        ProcessKind::IidContinuous | ProcessKind::PiecewiseConstantMarkov => {
            let (mids, mass, w) = cells(spec.continuous_part()?, n_cells);
            points.extend(mids.into_iter().zip(mass).map(|(v, q)| (v, q, false)));
            cell_width = Some(w);
        }
        ProcessKind::IidMixture => {
            let (mids, mass, w) = cells(spec.continuous_part()?, n_cells);
            points.extend(mids.into_iter().zip(mass).map(|(v, q)| (v, spec.p * q, false)));
            if spec.p < 1.0 {
                points.push((spec.atom, 1.0 - spec.p, true));
            }
            cell_width = Some(w);
        }
    }
    let (grid, marginal, atom_indices) = merge_points(&mut points);
    check_shape(&grid, m)?;
    let mut block = if spec.kind == ProcessKind::PiecewiseConstantMarkov {
        // The quantized chain is itself Markov: a copy stays in its cell and
        // a redraw lands in cell j with probability f_j.
        let g = grid.len();
        let p = spec.p;
        let transition = Array2::from_shape_fn((g, g), |(i, j)| {
            p * marginal[j] + if i == j { 1.0 - p } else { 0.0 }
        });
        DiscretizedBlock::markov(grid, &marginal, &transition, m)?
    } else {
        DiscretizedBlock::iid(grid, &marginal, m)?
    };
    block.cell_width = cell_width;
    block.atom_indices = atom_indices;
    Ok(block)
}

/// Per-symbol squared error between grid tuples. Only the single-letter
/// table is stored; `d_m` is its coordinate average.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionTable {
    pub m: usize,
    pub single: Array2<f64>,
}

impl DistortionTable {
    pub fn entry(&self, i: &[usize], j: &[usize]) -> f64 {
        i.iter().zip(j).map(|(&a, &b)| self.single[(a, b)]).sum::<f64>() / self.m as f64
    }

    /// Largest entry, attained on the grid extremes.
    pub fn max_entry(&self) -> f64 {
        self.single.iter().copied().fold(0.0, f64::max)
    }
}

pub fn build_distortion(block: &DiscretizedBlock) -> DistortionTable {
    let g = &block.grid;
    DistortionTable {
        m: block.m,
        single: Array2::from_shape_fn((g.len(), g.len()), |(i, j)| (g[i] - g[j]).powi(2)),
    }
}

/// Applies `mats[t]` along axis `t` of a `g^m` tensor held in `x`.
struct Kron {
    g: usize,
    m: usize,
    scratch: Vec<f64>,
}

impl Kron {
    fn new(g: usize, m: usize) -> Self {
        Self {
            g,
            m,
            scratch: vec![0.0; g.pow(m as u32)],
        }
    }

    fn mode(&self, t: usize, a: &Array2<f64>, x: &[f64], out: &mut [f64]) {
        let g = self.g;
        let pre = g.pow(t as u32);
        let post = g.pow((self.m - 1 - t) as u32);
        if post == 1 {
            let xv = ArrayView2::from_shape((pre, g), x).expect("tensor shape");
            let mut ov = ArrayViewMut2::from_shape((pre, g), out).expect("tensor shape");
            general_mat_mul(1.0, &xv, &a.t(), 0.0, &mut ov);
        } else {
            let chunk = g * post;
            for (xs, os) in x.chunks_exact(chunk).zip(out.chunks_exact_mut(chunk)) {
                let xv = ArrayView2::from_shape((g, post), xs).expect("tensor shape");
                let mut ov = ArrayViewMut2::from_shape((g, post), os).expect("tensor shape");
                general_mat_mul(1.0, a, &xv, 0.0, &mut ov);
            }
        }
    }

    /// `out = (mats[0] ⊗ … ⊗ mats[m-1]) x`; `x` is clobbered.
    fn apply(&mut self, mats: &[&Array2<f64>], x: &mut [f64], out: &mut [f64]) {
        debug_assert_eq!(mats.len(), self.m);
        let mut scratch = std::mem::take(&mut self.scratch);
        let mut src: &mut [f64] = x;
        let mut dst: &mut [f64] = &mut scratch;
        for (t, a) in mats.iter().enumerate() {
            let target: &mut [f64] = if t + 1 == self.m { &mut *out } else { &mut *dst };
            self.mode(t, a, src, target);
            if t + 1 < self.m {
                std::mem::swap(&mut src, &mut dst);
            }
        }
        self.scratch = scratch;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaOptions {
    /// Stopping threshold on the certified gap, bits per symbol.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep the free energy of every iterate.
    #[serde(default)]
    pub trace: bool,
}

impl Default for BaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 5000,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaSolution {
    pub s: f64,
    /// Expected per-symbol distortion of the final test channel.
    pub d: f64,
    /// Mutual information of the final test channel, bits per symbol.
    pub r_bits: f64,
    pub iterations: usize,
    /// Upper bound on `r_bits - R(d)` in bits per symbol.
    pub gap: f64,
    pub converged: bool,
    /// Reproduction marginal over `grid^m`.
    pub q: Vec<f64>,
    /// Free energy `-Σ p ln(Kq)` per iterate when tracing.
    pub free_energy: Vec<f64>,
    /// Iterations at which the free energy rose; always empty for a correct
    /// solver.
    pub monotonicity_violations: Vec<usize>,
}

/// Slope-parameterised Blahut–Arimoto. `s < 0` is the slope of the R(D)
/// curve in bits per unit of distortion; `initial` is a reproduction
/// marginal to start from (uniform when `None`).
pub fn blahut_arimoto(
    block: &DiscretizedBlock,
    table: &DistortionTable,
    s: f64,
    opts: &BaOptions,
    initial: Option<&[f64]>,
) -> Result<BaSolution> {
    if !(s < 0.0) || !s.is_finite() {
        return Err(Error::arg(
            "s",
            format!("slope parameter must be finite and negative, got {s}"),
        ));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::arg("tol", "tolerance must be positive"));
    }
    if table.m != block.m || table.single.nrows() != block.alphabet() {
        return Err(Error::arg("table", "distortion table does not match block"));
    }
    let m = block.m;
    let g = block.alphabet();
    let n = block.states();
    let ln2 = std::f64::consts::LN_2;
    let beta = s * m as f64 * ln2;
    let k1 = table.single.mapv(|d| (s * ln2 * d).exp());
    let kernel: Vec<&Array2<f64>> = vec![&k1; m];
    let mut kron = Kron::new(g, m);

    let mut q = match initial {
        Some(q0) if q0.len() == n => {
            let total: f64 = q0.iter().sum();
            if !(total > 0.0) || q0.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::arg("initial", "warm start is not a distribution"));
            }
            q0.iter().map(|v| v / total).collect()
        }
        Some(_) => return Err(Error::arg("initial", "warm start has the wrong length")),
        None => vec![1.0 / n as f64; n],
    };
    let p = &block.pmf;
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut buf = vec![0.0; n];

    let free_energy = |z: &[f64]| -> f64 {
        p.iter()
            .zip(z)
            .filter(|(&pi, _)| pi > 0.0)
            .map(|(&pi, &zi)| -pi * zi.max(f64::MIN_POSITIVE).ln())
            .sum()
    };
    let mut trace = Vec::new();
    let mut violations = Vec::new();

    buf.copy_from_slice(&q);
    kron.apply(&kernel, &mut buf, &mut z);
    let mut f_cur = free_energy(&z);
    if opts.trace {
        trace.push(f_cur);
    }
    let mut iterations = 0;
    let mut gap;
    loop {
        for i in 0..n {
            w[i] = if p[i] > 0.0 {
                p[i] / z[i].max(f64::MIN_POSITIVE)
            } else {
                0.0
            };
        }
        buf.copy_from_slice(&w);
        kron.apply(&kernel, &mut buf, &mut c);
        // gap = max_j ln c_j - Σ_j q_j c_j ln c_j, in bits per symbol.
        let mut max_lc = f64::NEG_INFINITY;
        let mut avg_lc = 0.0;
        for j in 0..n {
            let lc = c[j].max(f64::MIN_POSITIVE).ln();
            max_lc = max_lc.max(lc);
            avg_lc += q[j] * c[j] * lc;
        }
        gap = ((max_lc - avg_lc) / (m as f64 * ln2)).max(0.0);
        if gap < opts.tol || iterations >= opts.max_iter {
            break;
        }
        iterations += 1;
        let mut total = 0.0;
        for j in 0..n {
            q[j] *= c[j];
            total += q[j];
        }
        q.iter_mut().for_each(|v| *v /= total);
        buf.copy_from_slice(&q);
        kron.apply(&kernel, &mut buf, &mut z);
        let f_next = free_energy(&z);
        if f_next > f_cur + 1e-12 * (1.0 + f_cur.abs()) {
            violations.push(iterations);
        }
        f_cur = f_next;
        if opts.trace {
            trace.push(f_cur);
        }
    }

    // Distortion: (1/m) Σ_t <w, (K ⊗ … ⊗ (K∘d) ⊗ … ⊗ K) q>.
    let b1 = &k1 * &table.single;
    let mut d_sum = 0.0;
    for t in 0..m {
        let mut mats = kernel.clone();
        mats[t] = &b1;
        buf.copy_from_slice(&q);
        kron.apply(&mats, &mut buf, &mut z);
        d_sum += w.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
    }
    let d = d_sum / m as f64;
    // I = -Σ q'_j ln c_j + βD - Σ p ln Z with q' = q∘c the output marginal.
    let out_term: f64 = q
        .iter()
        .zip(&c)
        .filter(|(&qj, &cj)| qj > 0.0 && cj > 0.0)
        .map(|(&qj, &cj)| -qj * cj * cj.ln())
        .sum();
    let info = (out_term + beta * d + f_cur).max(0.0);
    Ok(BaSolution {
        s,
        d,
        r_bits: info / (m as f64 * ln2),
        iterations,
        gap,
        converged: gap < opts.tol,
        q,
        free_energy: trace,
        monotonicity_violations: violations,
    })
}

/// Log-spaced slope parameters `s = -10^e`, `e` running from
/// `start_exponent` to `stop_exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SGrid {
    pub start_exponent: f64,
    pub stop_exponent: f64,
    pub count: usize,
}

impl SGrid {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![-(10f64.powf(self.start_exponent))],
            c => (0..c)
                .map(|i| {
                    let e = self.start_exponent
                        + (self.stop_exponent - self.start_exponent) * i as f64 / (c - 1) as f64;
                    -(10f64.powf(e))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub s: f64,
    pub d: f64,
    pub r_bits: f64,
    pub iterations: usize,
    pub gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDCurve {
    /// Sorted by increasing `d`.
    pub points: Vec<RdPoint>,
    pub m: usize,
    #[serde(rename = "N")]
    pub n_cells: usize,
    /// Discretized source entropy, bits per symbol.
    pub source_entropy: f64,
    pub cell_width: Option<f64>,
    /// Distortion of the best single reproduction point, where the rate
    /// reaches zero. `None` for curves not traced from a source.
    #[serde(default)]
    pub zero_rate_distortion: Option<f64>,
}

impl RDCurve {
    /// Builds a curve from raw points, sorting by distortion.
    pub fn from_points(mut points: Vec<RdPoint>, m: usize, n_cells: usize, source_entropy: f64) -> Self {
        points.sort_by(|a, b| a.d.total_cmp(&b.d).then(b.r_bits.total_cmp(&a.r_bits)));
        Self {
            points,
            m,
            n_cells,
            source_entropy,
            cell_width: None,
            zero_rate_distortion: None,
        }
    }

    pub fn max_gap(&self) -> f64 {
        self.points.iter().map(|p| p.gap).fold(0.0, f64::max)
    }

    pub fn unconverged(&self) -> usize {
        self.points.iter().filter(|p| !p.converged).count()
    }

    /// Indices `i` where `R[i+1]` exceeds `R[i]` beyond `tol` plus the
    /// solver gaps of the two points.
    pub fn monotonicity_violations(&self, tol: f64) -> Vec<usize> {
        self.points
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].r_bits > w[0].r_bits + tol + w[0].gap + w[1].gap)
            .map(|(i, _)| i)
            .collect()
    }

    /// Middle indices of triples where `R` sits above the chord beyond
    /// `tol` plus the solver gaps of the triple.
    pub fn convexity_violations(&self, tol: f64) -> Vec<usize> {
        self.points
            .windows(3)
            .enumerate()
            .filter(|(_, w)| {
                let span = w[2].d - w[0].d;
                if !(span > 0.0) {
                    return false;
                }
                let lam = (w[1].d - w[0].d) / span;
                let chord = (1.0 - lam) * w[0].r_bits + lam * w[2].r_bits;
                w[1].r_bits > chord + tol + w[0].gap + w[1].gap + w[2].gap
            })
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Rate at `d` by linear interpolation in `log D`; clamps outside the
    /// sampled range.
    pub fn rate_at(&self, d: f64) -> Option<f64> {
        let pts: Vec<&RdPoint> = self.points.iter().filter(|p| p.d > 0.0).collect();
        let first = pts.first()?;
        let last = pts.last()?;
        if d <= first.d {
            return Some(first.r_bits);
        }
        if d >= last.d {
            return Some(last.r_bits);
        }
        let k = pts.partition_point(|p| p.d < d);
        let (a, b) = (pts[k - 1], pts[k]);
        if b.d == a.d {
            return Some(a.r_bits);
        }
        let lam = (d.ln() - a.d.ln()) / (b.d.ln() - a.d.ln());
        Some((1.0 - lam) * a.r_bits + lam * b.r_bits)
    }

    /// Rate at `d` on the chord between the neighbouring points, linear in
    /// `D`. For a convex curve sampled from above this bounds the true rate
    /// from above. `None` outside the sampled range.
    pub fn chord_rate(&self, d: f64) -> Option<f64> {
        let first = self.points.first()?;
        let last = self.points.last()?;
        if !(d >= first.d && d <= last.d) {
            return None;
        }
        let k = self.points.partition_point(|p| p.d < d);
        if k == 0 || self.points[k].d == d {
            return Some(self.points[k].r_bits);
        }
        let (a, b) = (&self.points[k - 1], &self.points[k]);
        let lam = (d - a.d) / (b.d - a.d);
        Some((1.0 - lam) * a.r_bits + lam * b.r_bits)
    }

    /// Reads the layout written by [`write_csv`](Self::write_csv). Points
    /// are taken as converged.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "s,D,R_bits,iterations,gap,m,N" {
            return Err(Error::Config(format!("unexpected curve CSV header {header:?}")));
        }
        let mut points = Vec::new();
        let (mut m, mut n_cells) = (1, 0);
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Config(format!("curve CSV row {}: bad {what}", row + 2));
            let cols: Vec<&str> = line.trim().split(',').collect();
            if cols.len() != 7 {
                return Err(bad("column count"));
            }
            let num = |i: usize, what: &str| cols[i].parse::<f64>().map_err(|_| bad(what));
            points.push(RdPoint {
                s: num(0, "s")?,
                d: num(1, "D")?,
                r_bits: num(2, "R_bits")?,
                iterations: cols[3].parse().map_err(|_| bad("iterations"))?,
                gap: num(4, "gap")?,
                converged: true,
            });
            m = cols[5].parse().map_err(|_| bad("m"))?;
            n_cells = cols[6].parse().map_err(|_| bad("N"))?;
        }
        Ok(Self::from_points(points, m, n_cells, f64::INFINITY))
    }

    /// CSV with columns `s,D,R_bits,iterations,gap,m,N`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "s,D,R_bits,iterations,gap,m,N")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.s, p.d, p.r_bits, p.iterations, p.gap, self.m, self.n_cells
            )?;
        }
        Ok(())
    }
}

/// Solves along `s_values` (descending `|s|`), warm-starting each solve from
/// the previous reproduction marginal.
pub fn rd_curve_on_block(
    block: &DiscretizedBlock,
    table: &DistortionTable,
    s_values: &[f64],
    opts: &BaOptions,
    n_cells: usize,
) -> Result<RDCurve> {
    if s_values.is_empty() {
        return Err(Error::arg("s_grid", "no slope parameters"));
    }
    if s_values.windows(2).any(|w| !(w[0].abs() > w[1].abs())) {
        return Err(Error::arg(
            "s_grid",
            "slopes must be sorted by strictly descending |s|",
        ));
    }
    let n = block.states() as f64;
    let mut points = Vec::with_capacity(s_values.len());
    let mut warm: Option<Vec<f64>> = None;
    for &s in s_values {
        let start = warm.as_ref().map(|q| {
            q.iter()
                .map(|v| (1.0 - WARM_START_MIX) * v + WARM_START_MIX / n)
                .collect::<Vec<f64>>()
        });
        let sol = blahut_arimoto(block, table, s, opts, start.as_deref())?;
        if !sol.converged {
            log::debug!(
                "s={s}: gap {:.3e} after {} iterations (tol {:.1e})",
                sol.gap,
                sol.iterations,
                opts.tol
            );
        }
        points.push(RdPoint {
            s,
            d: sol.d,
            r_bits: sol.r_bits,
            iterations: sol.iterations,
            gap: sol.gap,
            converged: sol.converged,
        });
        warm = Some(sol.q);
    }
    let mut curve = RDCurve::from_points(points, block.m, n_cells, block.entropy_bits() / block.m as f64);
    let unconverged = curve.unconverged();
    if unconverged > 0 {
        log::info!(
            "m={}: {unconverged} of {} points stopped above tol {:.1e}; largest gap {:.3e} bits",
            block.m,
            curve.points.len(),
            opts.tol,
            curve.max_gap()
        );
    }
    curve.cell_width = block.cell_width;
    curve.zero_rate_distortion = Some(block.zero_rate_distortion());
    Ok(curve)
}

pub fn rd_curve(
    spec: &ProcessSpec,
    m: usize,
    n_cells: usize,
    s_values: &[f64],
    opts: &BaOptions,
) -> Result<RDCurve> {
    let block = discretize_source(spec, m, n_cells)?;
    let table = build_distortion(&block);
    rd_curve_on_block(&block, &table, s_values, opts, n_cells)
}
