//! Fourier–Galerkin discretization of first-order operators, the discrete
//! spectrum and its counting function, plus exact oracles for the
//! double-turn example (closed-form spectrum, lattice-point counts).

use std::collections::BTreeSet;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::diag::Diag;
use faer::{Mat, Par};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix_field::{Mat2, MatrixField};
use crate::symbol::{metric_from_symbol, Operator1st};
use crate::tolerances;
use crate::trig::{Freq, TrigPoly};

/// Blocks at least this large are diagonalized one at a time with internal
/// parallelism; smaller ones are spread over the thread pool.
const LARGE_BLOCK: usize = 384;
const RESIDUAL_SAMPLES: usize = 20;

/// Plane waves `e^{i m·x} ⊗ ê_a` with `|m_α| ≤ M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Truncation {
    m: usize,
}

impl Truncation {
    pub fn new(m: usize) -> Self {
        Self { m }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn side(&self) -> usize {
        2 * self.m + 1
    }

    /// `2 (2M + 1)³`.
    pub fn dimension(&self) -> usize {
        2 * self.side().pow(3)
    }

    pub fn contains(&self, k: Freq) -> bool {
        k.iter().all(|&c| c.unsigned_abs() as usize <= self.m)
    }

    pub fn row(&self, k: Freq, a: usize) -> Option<usize> {
        if !self.contains(k) || a > 1 {
            return None;
        }
        let s = self.side();
        let i = k.map(|c| (c + self.m as i32) as usize);
        Some(((i[0] * s + i[1]) * s + i[2]) * 2 + a)
    }

    pub fn mode(&self, row: usize) -> (Freq, usize) {
        let s = self.side();
        let a = row % 2;
        let cell = row / 2;
        let m = self.m as i32;
        ([(cell / (s * s)) as i32 - m, ((cell / s) % s) as i32 - m, (cell % s) as i32 - m], a)
    }
}

/// Sparse Hermitian matrix stored by rows, columns sorted.
#[derive(Clone, Debug)]
pub struct HermitianMatrix {
    truncation: Truncation,
    rows: Vec<Vec<(usize, Complex64)>>,
    hermiticity_residual: f64,
}

impl HermitianMatrix {
    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn dimension(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, r: usize) -> &[(usize, Complex64)] {
        &self.rows[r]
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let row = &self.rows[r];
        match row.binary_search_by_key(&c, |e| e.0) {
            Ok(i) => row[i].1,
            Err(_) => Complex64::default(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `max |A − A*|` before symmetrization.
    pub fn hermiticity_residual(&self) -> f64 {
        self.hermiticity_residual
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .par_iter()
            .map(|row| row.iter().map(|(c, a)| a * v[*c]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Mat<Complex64> {
        let n = self.dimension();
        let mut m = Mat::<Complex64>::zeros(n, n);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Connected components of the sparsity graph, each sorted, ordered by
    /// smallest member.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let n = self.dimension();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, _) in row {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let root = find(&mut parent, i);
            if label[root] == usize::MAX {
                label[root] = out.len();
                out.push(Vec::new());
            }
            out[label[root]].push(i);
        }
        out
    }
}

fn coefficient_matrix(field: &MatrixField, k: Freq) -> Mat2 {
    Mat2::from_fn(|r, c| field.entry(r, c).coefficient(k))
}

/// Galerkin matrix with entries `[i m_α P̂^α_{m′−m} + Q̂0_{m′−m}]_{a′b}` at
/// row `(m′, a′)`, column `(m, b)`, symmetrized.
pub fn assemble(op: &Operator1st, truncation: Truncation) -> Result<HermitianMatrix> {
    let limit = 2 * truncation.m() as i32;
    let fields: Vec<&MatrixField> = op.p.iter().chain(std::iter::once(&op.q0)).collect();
    let freqs: BTreeSet<Freq> = fields
        .iter()
        .flat_map(|f| f.entries().iter().flatten().flat_map(|p| p.terms().map(|(k, _)| *k)))
        .collect();
    if let Some(k) = freqs.iter().find(|k| k.iter().any(|c| c.abs() > limit)) {
        let frequency = k.iter().map(|c| c.abs()).max().unwrap_or(0);
        return Err(Error::TruncationTooSmall { frequency, limit });
    }
    let blocks: Vec<(Freq, [Mat2; 3], Mat2)> = freqs
        .iter()
        .map(|&k| (k, [0, 1, 2].map(|a| coefficient_matrix(&op.p[a], k)), coefficient_matrix(&op.q0, k)))
        .collect();
    let i = Complex64::new(0.0, 1.0);
    let dim = truncation.dimension();
    let raw: Vec<Vec<(usize, Complex64)>> = (0..dim)
        .into_par_iter()
        .map(|row| {
            let (mp, ap) = truncation.mode(row);
            let mut out = Vec::new();
            for (k, p, q) in &blocks {
                let m = [mp[0] - k[0], mp[1] - k[1], mp[2] - k[2]];
                if !truncation.contains(m) {
                    continue;
                }
                let block = (p[0] * Complex64::from(m[0] as f64)
                    + p[1] * Complex64::from(m[1] as f64)
                    + p[2] * Complex64::from(m[2] as f64))
                    * i
                    + q;
                for b in 0..2 {
                    let v = block[(ap, b)];
                    if v != Complex64::default() {
                        out.push((truncation.row(m, b).unwrap(), v));
                    }
                }
            }
            out.sort_by_key(|e| e.0);
            out
        })
        .collect();
    let lookup = |r: usize, c: usize| match raw[r].binary_search_by_key(&c, |e| e.0) {
        Ok(i) => raw[r][i].1,
        Err(_) => Complex64::default(),
    };
    let hermiticity_residual = raw
        .par_iter()
        .enumerate()
        .map(|(r, row)| row.iter().map(|&(c, v)| (v - lookup(c, r).conj()).norm()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    // symmetrize over the union of both sparsity patterns
    let mut transposed: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
    for (r, row) in raw.iter().enumerate() {
        for &(c, v) in row {
            transposed[c].push((r, v.conj()));
        }
    }
    let rows = raw
        .into_par_iter()
        .zip(transposed)
        .map(|(row, tr)| {
            let mut merged: Vec<(usize, Complex64)> = row.into_iter().chain(tr).collect();
            merged.sort_by_key(|e| e.0);
            let mut out: Vec<(usize, Complex64)> = Vec::with_capacity(merged.len());
            for (c, v) in merged {
                match out.last_mut() {
                    Some(last) if last.0 == c => last.1 += v * 0.5,
                    _ => out.push((c, v * 0.5)),
                }
            }
            out
        })
        .collect();
    Ok(HermitianMatrix {
        truncation,
        rows,
        hermiticity_residual,
    })
}

/// `√(min eigenvalue of g^{αβ})` for the operator's principal symbol.
pub fn metric_scale(op: &Operator1st, grid: &Grid) -> f64 {
    metric_from_symbol(&op.principal_symbol(), grid).min_eigenvalue().max(0.0).sqrt()
}

pub fn trust_radius(truncation: Truncation, gamma_min: f64) -> f64 {
    tolerances::TRUST_FRACTION * truncation.m() as f64 * gamma_min
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscreteSpectrum {
    pub eigenvalues: Vec<f64>,
    pub truncation: Truncation,
    pub trust_radius: f64,
    /// Worst sampled `‖Av − λv‖ / ‖A‖`.
    pub residual: f64,
    pub blocks: usize,
}

impl DiscreteSpectrum {
    pub fn is_trusted(&self, lambda: f64) -> bool {
        lambda.abs() <= self.trust_radius
    }

    pub fn trusted(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues.iter().copied().filter(|l| self.is_trusted(*l))
    }

    /// Number of eigenvalues in the open interval `(lo, hi)`.
    pub fn count_between(&self, lo: f64, hi: f64) -> usize {
        let a = self.eigenvalues.partition_point(|&l| l <= lo);
        let b = self.eigenvalues.partition_point(|&l| l < hi);
        b.saturating_sub(a)
    }
}

struct BlockEigen {
    members: Vec<usize>,
    values: Vec<f64>,
    vectors: Mat<Complex64>,
}

fn diagonalize(a: &HermitianMatrix, members: Vec<usize>, par: Par) -> Result<BlockEigen> {
    let n = members.len();
    let mut local = vec![usize::MAX; 0];
    let dense = if n == a.dimension() {
        a.to_dense()
    } else {
        local.resize(a.dimension(), usize::MAX);
        for (i, &g) in members.iter().enumerate() {
            local[g] = i;
        }
        let mut m = Mat::<Complex64>::zeros(n, n);
        for (i, &g) in members.iter().enumerate() {
            for &(c, v) in a.row(g) {
                m[(i, local[c])] = v;
            }
        }
        m
    };
    let mut s = Diag::<Complex64>::zeros(n);
    let mut u = Mat::<Complex64>::zeros(n, n);
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<Complex64>(
        n,
        ComputeEigenvectors::Yes,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        dense.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::ConvergenceFailure(format!("{e:?}")))?;
    let values = (0..n).map(|i| s[i].re).collect();
    Ok(BlockEigen {
        members,
        values,
        vectors: u,
    })
}

/// Full spectrum by dense Hermitian eigendecomposition of each connected
/// block, with a residual check on sampled eigenpairs.
pub fn eigensolve(a: &HermitianMatrix, gamma_min: f64) -> Result<DiscreteSpectrum> {
    let blocks = a.blocks();
    let nblocks = blocks.len();
    let (large, small): (Vec<_>, Vec<_>) = blocks.into_iter().partition(|b| b.len() >= LARGE_BLOCK);
    let mut solved: Vec<BlockEigen> = small
        .into_par_iter()
        .map(|b| diagonalize(a, b, Par::Seq))
        .collect::<Result<_>>()?;
    for b in large {
        solved.push(diagonalize(a, b, Par::rayon(0))?);
    }

    let mut all: Vec<(f64, usize, usize)> = solved
        .iter()
        .enumerate()
        .flat_map(|(bi, b)| b.values.iter().enumerate().map(move |(j, &v)| (v, bi, j)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let norm = all.iter().map(|e| e.0.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let samples = RESIDUAL_SAMPLES.min(all.len());
    let mut residual: f64 = 0.0;
    for s in 0..samples {
        let idx = if samples > 1 { s * (all.len() - 1) / (samples - 1) } else { 0 };
        let (lambda, bi, j) = all[idx];
        let b = &solved[bi];
        let mut v = vec![Complex64::default(); a.dimension()];
        for (i, &g) in b.members.iter().enumerate() {
            v[g] = b.vectors[(i, j)];
        }
        let av = a.apply(&v);
        let r: f64 = av.iter().zip(&v).map(|(x, y)| (x - y * lambda).norm_sqr()).sum::<f64>().sqrt();
        residual = residual.max(r / norm);
    }
    if !(residual <= 1e-9) {
        return Err(Error::ConvergenceFailure(format!("eigenpair residual {residual:.3e} exceeds 1e-9‖A‖")));
    }
    let truncation = a.truncation();
    Ok(DiscreteSpectrum {
        eigenvalues: all.into_iter().map(|e| e.0).collect(),
        truncation,
        trust_radius: trust_radius(truncation, gamma_min),
        residual,
        blocks: nblocks,
    })
}

/// Eigenvalues of `A v = λ B v` for Hermitian `A` and positive definite `B`,
/// via Cholesky reduction.
pub fn generalized_eigenvalues(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<Vec<f64>> {
    use faer::Side;
    let llt = b
        .to_dense()
        .llt(Side::Lower)
        .map_err(|e| Error::ConvergenceFailure(format!("mass matrix not positive definite: {e:?}")))?;
    let l = llt.L();
    let mut c = a.to_dense();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, c.as_mut(), Par::rayon(0));
    let mut ct = c.adjoint().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, ct.as_mut(), Par::rayon(0));
    let mut values = ct
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::ConvergenceFailure(format!("{e:?}")))?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// `w^{−1/2} ∘ L ∘ w^{−1/2}` together with the sup-norm bound on the
/// discarded part of `1/w`.
#[derive(Clone, Debug)]
pub struct WeightedOperator {
    pub operator: Operator1st,
    pub truncation_bound: f64,
}

/// `P′ = P/w`, `Q0′ = Q0/w + ½ P^α ∂_α(1/w)`, with `1/w` re-expanded on a
/// grid and truncated to `max_degree`.
pub fn weighted_reduce(op: &Operator1st, w: &TrigPoly, max_degree: i32) -> Result<WeightedOperator> {
    let (inv, bound) = if w.degree() == 0 {
        let c = w.coefficient([0, 0, 0]);
        if !(c.re > 0.0) || c.im != 0.0 {
            return Err(Error::NonpositiveWeight { min: c.re });
        }
        (TrigPoly::constant(1.0 / c.re), 0.0)
    } else {
        let n = (4 * max_degree.max(w.degree()) as usize + 4).max(tolerances::DEFAULT_GRID);
        let grid = Grid::new(n);
        let values = w.sample_real(&grid);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::NonpositiveWeight { min });
        }
        let inv: Vec<f64> = values.iter().map(|v| 1.0 / v).collect();
        TrigPoly::from_grid_real(&grid, &inv, tolerances::REEXPANSION_DROP).truncate(max_degree)
    };
    let u = MatrixField::scalar(&inv);
    let p = op.p.clone().map(|p| p.mul(&u));
    let mut q0 = op.q0.mul(&u);
    for (a, pa) in op.p.iter().enumerate() {
        q0 = q0.add(&pa.scale_poly(&inv.derivative(a)).scale(0.5));
    }
    Ok(WeightedOperator {
        operator: Operator1st::new(p, q0),
        truncation_bound: bound,
    })
}

/// Galerkin mass matrix of multiplication by `w`.
pub fn mass_matrix(w: &TrigPoly, truncation: Truncation) -> Result<HermitianMatrix> {
    let zero = MatrixField::zero();
    assemble(
        &Operator1st::new([zero.clone(), zero.clone(), zero], MatrixField::scalar(w)),
        truncation,
    )
}

/// `#{m ∈ ℤ³ : ‖m‖ < r}`.
pub fn lattice_count(r: f64) -> u64 {
    if !(r > 0.0) {
        return 0;
    }
    // ‖m‖² < r² ⇔ ‖m‖² ≤ ⌈r²⌉ − 1 for integer ‖m‖²
    let bound = (r * r).ceil() as i64 - 1;
    let side = isqrt(bound);
    (-side..=side)
        .into_par_iter()
        .map(|a| {
            let mut count = 0u64;
            let ra = bound - a * a;
            let sb = isqrt(ra);
            for b in -sb..=sb {
                let rest = ra - b * b;
                count += 2 * isqrt(rest) as u64 + 1;
            }
            count
        })
        .sum()
}

fn isqrt(n: i64) -> i64 {
    if n < 0 {
        return -1;
    }
    let mut s = (n as f64).sqrt() as i64;
    while s * s > n {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= n {
        s += 1;
    }
    s
}

/// Eigenvalues of the double-turn example in `[−bound, bound]`: `1` twice and
/// `1 ± ‖m‖` for each nonzero `m ∈ ℤ³`, sorted.
pub fn exact_example_spectrum(bound: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if bound >= 1.0 {
        out.extend([1.0, 1.0]);
    }
    let side = (bound + 1.0).floor() as i32;
    for a in -side..=side {
        for b in -side..=side {
            for c in -side..=side {
                if (a, b, c) == (0, 0, 0) {
                    continue;
                }
                let norm = ((a * a + b * b + c * c) as f64).sqrt();
                for l in [1.0 + norm, 1.0 - norm] {
                    if l.abs() <= bound {
                        out.push(l);
                    }
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Galerkin,
    ExactExample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CountSample {
    pub lambda: f64,
    pub count: u64,
    pub trusted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CountingTable {
    pub samples: Vec<CountSample>,
    pub provenance: Provenance,
}

impl CountingTable {
    pub fn is_monotone(&self) -> bool {
        self.samples.windows(2).all(|w| w[0].lambda >= w[1].lambda || w[0].count <= w[1].count)
    }
}

pub enum CountingSource<'a> {
    Galerkin(&'a DiscreteSpectrum),
    ExactExample,
}

/// `N(λ) = #{k : 0 < λ_k < λ}` at each sample point.
pub fn counting_function(source: &CountingSource<'_>, lambdas: &[f64]) -> CountingTable {
    let (samples, provenance) = match source {
        CountingSource::Galerkin(spec) => (
            lambdas
                .iter()
                .map(|&l| CountSample {
                    lambda: l,
                    count: spec.count_between(0.0, l) as u64,
                    trusted: spec.is_trusted(l),
                })
                .collect(),
            Provenance::Galerkin,
        ),
        CountingSource::ExactExample => (
            lambdas
                .par_iter()
                .map(|&l| CountSample {
                    lambda: l,
                    count: if l > 1.0 { 1 + lattice_count(l - 1.0) } else { 0 },
                    trusted: true,
                })
                .collect(),
            Provenance::ExactExample,
        ),
    };
    CountingTable { samples, provenance }
}

/// `k + ½` for `k = 0, 1, …` up to `lambda_max`; never an eigenvalue of the
/// example.
pub fn half_integer_grid(lambda_max: f64) -> Vec<f64> {
    (0..).map(|k| k as f64 + 0.5).take_while(|&l| l <= lambda_max).collect()
}

/// Midpoints between consecutive distinct positive eigenvalues below
/// `lambda_max`, plus one point below the smallest.
pub fn midpoint_grid(spec: &DiscreteSpectrum, lambda_max: f64) -> Vec<f64> {
    let mut distinct: Vec<f64> = Vec::new();
    for &l in spec.eigenvalues.iter().filter(|&&l| l > 0.0 && l <= lambda_max) {
        match distinct.last() {
            Some(&last) if l - last <= tolerances::CLUSTER => {}
            _ => distinct.push(l),
        }
    }
    let mut out = Vec::with_capacity(distinct.len());
    if let Some(&first) = distinct.first() {
        out.push(0.5 * first);
    }
    out.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticReport {
    pub a: f64,
    pub b: f64,
    /// `(λ, N(λ) − aλ³ − bλ²)`.
    pub residuals: Vec<(f64, f64)>,
    pub window: (f64, f64),
    /// Mean of `r(λ)/λ²` over the window.
    pub window_mean: f64,
    pub fit_range: (f64, f64),
    /// Least-squares slope of `log |r|` against `log λ`.
    pub exponent: Option<f64>,
}

pub fn asymptotic_compare(
    table: &CountingTable,
    a: f64,
    b: f64,
    window: (f64, f64),
    fit_range: (f64, f64),
) -> AsymptoticReport {
    let residuals: Vec<(f64, f64)> = table
        .samples
        .iter()
        .map(|s| (s.lambda, s.count as f64 - a * s.lambda.powi(3) - b * s.lambda.powi(2)))
        .collect();
    let in_window: Vec<f64> = residuals
        .iter()
        .filter(|(l, _)| *l >= window.0 && *l <= window.1)
        .map(|(l, r)| r / (l * l))
        .collect();
    let window_mean = if in_window.is_empty() {
        f64::NAN
    } else {
        in_window.iter().sum::<f64>() / in_window.len() as f64
    };
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .filter(|(l, r)| *l >= fit_range.0 && *l <= fit_range.1 && *r != 0.0)
        .map(|(l, r)| (l.ln(), r.abs().ln()))
        .collect();
    let exponent = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    AsymptoticReport {
        a,
        b,
        residuals,
        window,
        window_mean,
        fit_range,
        exponent,
    }
}

/// One-to-one matching of two sorted spectra within `tol`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SpectrumMatch {
    pub matched: usize,
    pub max_deviation: f64,
    /// Reference values without a partner.
    pub unmatched: Vec<f64>,
}

pub fn match_spectra(reference: &[f64], candidates: &[f64], tol: f64) -> SpectrumMatch {
    let mut out = SpectrumMatch::default();
    let (mut i, mut j) = (0, 0);
    while i < reference.len() {
        if j >= candidates.len() {
            out.unmatched.push(reference[i]);
            i += 1;
            continue;
        }
        let d = reference[i] - candidates[j];
        if d.abs() <= tol {
            out.matched += 1;
            out.max_deviation = out.max_deviation.max(d.abs());
            i += 1;
            j += 1;
        } else if d > 0.0 {
            j += 1;
        } else {
            out.unmatched.push(reference[i]);
            i += 1;
        }
    }
    out
}

/// Groups sorted values into clusters of width `tol`: `(center, size)`.
pub fn clusters(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for &v in values {
        match out.last_mut() {
            Some((_, n, last)) if v - *last <= tol => {
                *n += 1;
                *last = v;
            }
            _ => out.push((v, 1, v)),
        }
    }
    out.into_iter().map(|(first, n, last)| (0.5 * (first + last), n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::matrix_field::pauli;
    use crate::symbol::{operator_from_symbol, PrincipalSymbol};

    fn ring() -> Operator1st {
        operator_from_symbol(&PrincipalSymbol::standard_pauli())
    }

    #[test]
    fn truncation_index_is_bijective() {
        let t = Truncation::new(2);
        assert_eq!(t.dimension(), 250);
        for row in 0..t.dimension() {
            let (k, a) = t.mode(row);
            assert_eq!(t.row(k, a), Some(row));
        }
        assert_eq!(t.row([3, 0, 0], 0), None);
    }

    #[test]
    fn constant_pauli_blocks() {
        let t = Truncation::new(1);
        let a = assemble(&ring(), t).unwrap();
        for row in 0..t.dimension() {
            let (m, ap) = t.mode(row);
            let sigma_m = pauli(0) * Complex64::from(m[0] as f64)
                + pauli(1) * Complex64::from(m[1] as f64)
                + pauli(2) * Complex64::from(m[2] as f64);
            for &(c, v) in a.row(row) {
                let (mc, b) = t.mode(c);
                assert_eq!(mc, m);
                assert!((v - sigma_m[(ap, b)]).norm() < 1e-15);
            }
        }
        assert!(a.blocks().iter().all(|b| b.len() <= 2));
    }

    #[test]
    fn example_couplings_are_two_steps_in_third_axis() {
        let t = Truncation::new(3);
        let a = assemble(&operator_from_symbol(&catalog::example_symbol()), t).unwrap();
        for row in 0..t.dimension() {
            let (m, _) = t.mode(row);
            for &(c, _) in a.row(row) {
                let (mc, _) = t.mode(c);
                let d = [m[0] - mc[0], m[1] - mc[1], m[2] - mc[2]];
                assert!(d == [0, 0, 0] || d == [0, 0, 2] || d == [0, 0, -2], "{d:?}");
            }
        }
        assert!(a.hermiticity_residual() < 1e-12);
    }

    #[test]
    fn too_small_truncation_is_rejected() {
        let err = assemble(&operator_from_symbol(&catalog::twisted_symbol(3, false)), Truncation::new(1));
        assert!(matches!(err, Err(Error::TruncationTooSmall { frequency: 3, limit: 2 })));
    }

    #[test]
    fn constant_pauli_spectrum() {
        let t = Truncation::new(2);
        let spec = eigensolve(&assemble(&ring(), t).unwrap(), 1.0).unwrap();
        let mut exact = Vec::new();
        for row in (0..t.dimension()).step_by(2) {
            let (m, _) = t.mode(row);
            let n = ((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64).sqrt();
            exact.extend([n, -n]);
        }
        exact.sort_by(f64::total_cmp);
        let m = match_spectra(&exact, &spec.eigenvalues, 1e-12);
        assert_eq!(m.matched, exact.len());
        assert_eq!(spec.eigenvalues.iter().filter(|l| l.abs() < 1e-12).count(), 2);
        // symmetric about zero
        let n = spec.eigenvalues.len();
        for k in 0..n {
            assert!((spec.eigenvalues[k] + spec.eigenvalues[n - 1 - k]).abs() < 1e-10);
        }
    }

    #[test]
    fn diagonal_two_by_two() {
        let t = Truncation::new(0);
        let q = Mat2::new(3.0.into(), 0.0.into(), 0.0.into(), (-1.0).into());
        let zero = MatrixField::zero();
        let op = Operator1st::new([zero.clone(), zero.clone(), zero], MatrixField::constant(&q));
        let spec = eigensolve(&assemble(&op, t).unwrap(), 1.0).unwrap();
        assert_eq!(spec.eigenvalues, vec![-1.0, 3.0]);
    }

    #[test]
    fn example_galerkin_contains_interior_exact_eigenvalues() {
        let t = Truncation::new(4);
        let a = assemble(&operator_from_symbol(&catalog::example_symbol()), t).unwrap();
        let spec = eigensolve(&a, 1.0).unwrap();
        assert!(spec.blocks > 1);
        let mut interior = vec![1.0, 1.0];
        for row in (0..t.dimension()).step_by(2) {
            let (m, _) = t.mode(row);
            if m == [0, 0, 0] || m.iter().any(|c| c.abs() > 2) {
                continue;
            }
            let n = ((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64).sqrt();
            interior.extend([1.0 + n, 1.0 - n]);
        }
        interior.sort_by(f64::total_cmp);
        let m = match_spectra(&interior, &spec.eigenvalues, 1e-8);
        assert!(m.unmatched.is_empty(), "{:?}", m.unmatched);
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(lattice_count(0.5), 1);
        assert_eq!(lattice_count(1.0), 1);
        assert_eq!(lattice_count(1.5), 19);
        assert_eq!(lattice_count(2.5), 81);
        // brute force
        for r in [3.3, 4.0, 5.7] {
            let s = r as i32 + 1;
            let mut n = 0;
            for a in -s..=s {
                for b in -s..=s {
                    for c in -s..=s {
                        if ((a * a + b * b + c * c) as f64) < r * r {
                            n += 1;
                        }
                    }
                }
            }
            assert_eq!(lattice_count(r), n);
        }
    }

    #[test]
    fn exact_example_counts() {
        let t = counting_function(&CountingSource::ExactExample, &[0.5, 1.5, 2.5]);
        let counts: Vec<u64> = t.samples.iter().map(|s| s.count).collect();
        assert_eq!(counts, vec![0, 2, 20]);
        // brute-force enumeration of the closed-form spectrum
        for l in half_integer_grid(6.0) {
            let n = exact_example_spectrum(l + 1.0).iter().filter(|&&e| e > 0.0 && e < l).count() as u64;
            assert_eq!(counting_function(&CountingSource::ExactExample, &[l]).samples[0].count, n);
        }
        let low = exact_example_spectrum(0.5);
        assert_eq!(low.iter().filter(|&&e| e == 0.0).count(), 6);
        assert!(low.iter().all(|e| e.abs() <= 0.5));
        let mid = exact_example_spectrum(1.1);
        assert_eq!(mid.iter().filter(|&&e| e == 1.0).count(), 2);
        assert!(mid.iter().all(|&e| e == 1.0 || e <= 0.0));
    }

    #[test]
    fn half_integer_rows() {
        assert_eq!(half_integer_grid(2.6), vec![0.5, 1.5, 2.5]);
    }

    #[test]
    fn weighted_reduction_of_constants() {
        let op = operator_from_symbol(&catalog::example_symbol());
        let same = weighted_reduce(&op, &TrigPoly::constant(1.0), 4).unwrap();
        assert!(same.operator.max_coefficient_diff(&op) == 0.0);
        let quarter = weighted_reduce(&op, &TrigPoly::constant(4.0), 4).unwrap();
        assert!(quarter.operator.max_coefficient_diff(&op.scale(0.25)) < 1e-16);
        assert!(matches!(
            weighted_reduce(&op, &TrigPoly::cos_sin([1, 0, 0], 1.5, 0.0), 4),
            Err(Error::NonpositiveWeight { .. })
        ));
    }

    #[test]
    fn weighted_reduction_matches_generalized_problem() {
        let w = TrigPoly::constant(1.0) + TrigPoly::cos_sin([1, 0, 0], 0.5, 0.0);
        let t = Truncation::new(3);
        let reduced = weighted_reduce(&ring(), &w, 6).unwrap();
        assert!(reduced.truncation_bound < 1e-3);
        let grid = Grid::new(16);
        let gamma = metric_scale(&reduced.operator, &grid);
        assert!((gamma - 1.0 / 1.5).abs() < 1e-3);
        let spec = eigensolve(&assemble(&reduced.operator, t).unwrap(), gamma).unwrap();
        let gen = generalized_eigenvalues(&assemble(&ring(), t).unwrap(), &mass_matrix(&w, t).unwrap()).unwrap();
        // both Galerkin schemes converge to the same low eigenvalues
        let low = |v: &[f64]| v.iter().copied().filter(|l| l.abs() < 0.5).collect::<Vec<_>>();
        let m = match_spectra(&low(&gen), &spec.eigenvalues, 5e-2);
        assert!(m.unmatched.is_empty());
    }
}
