//! Constrained flip Hamiltonians `H = Σ_i σ^x_i Σ_k w_k N_i^(k)` and their
//! sparse matrices.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{complement, rydberg_filter, Basis, BasisKind, BasisState, ConstraintRule};
use crate::error::{Error, Result};

/// Perturbation strength used for the perturbed PPXPP model unless overridden.
pub const DEFAULT_DELTA: f64 = 0.09;

/// Labels accepted by [`ModelSpec::from_label`].
pub const CANONICAL_LABELS: [&str; 8] =
    ["N0", "N1", "N2", "N3", "QGL", "PERT_PPXPP", "HTOT", "PPXPP"];

/// Anything that maps a configuration to a weighted list of configurations.
pub trait Hamiltonian: Sync {
    fn sites(&self) -> usize;

    /// Call `f(target, amplitude)` for every nonzero `⟨target|H|bits⟩`.
    fn act(&self, bits: u32, f: &mut dyn FnMut(u32, f64));
}

/// A constrained flip model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub label: String,
    pub rule: ConstraintRule,
    /// Restrict the Hilbert space to Rydberg-blockaded configurations.
    #[serde(default)]
    pub rydberg: bool,
}

impl ModelSpec {
    pub fn new(label: impl Into<String>, weights: [f64; 5], rydberg: bool) -> Result<Self> {
        Ok(ModelSpec {
            label: label.into(),
            rule: ConstraintRule::new(weights)?,
            rydberg,
        })
    }

    /// `H^N(k)`: flips allowed when exactly `k` neighbours are occupied.
    pub fn level(k: usize) -> Result<Self> {
        if k > 4 {
            return Err(Error::Argument(format!("constraint level {k} not in 0..=4")));
        }
        let mut w = [0.0; 5];
        w[k] = 1.0;
        Self::new(format!("N{k}"), w, false)
    }

    /// Quantum Game of Life, `H^N(2) + H^N(3)`.
    pub fn qgl() -> Self {
        Self::new("QGL", [0.0, 0.0, 1.0, 1.0, 0.0], false).expect("valid weights")
    }

    /// `H^N(0) + δ H^N(1)` without the Rydberg restriction.
    pub fn pert_ppxpp(delta: f64) -> Result<Self> {
        if delta == 0.0 || !delta.is_finite() {
            return Err(Error::Argument(format!(
                "perturbation strength must be finite and nonzero, got {delta}"
            )));
        }
        Self::new("PERT_PPXPP", [1.0, delta, 0.0, 0.0, 0.0], false)
    }

    /// `H^N(0) + H^N(1) + H^N(2) + H^N(3)`.
    pub fn htot() -> Self {
        Self::new("HTOT", [1.0, 1.0, 1.0, 1.0, 0.0], false).expect("valid weights")
    }

    /// `H^N(0)` on the Rydberg-blockaded subspace.
    pub fn ppxpp() -> Self {
        Self::new("PPXPP", [1.0, 0.0, 0.0, 0.0, 0.0], true).expect("valid weights")
    }

    /// Resolve one of [`CANONICAL_LABELS`] (case-insensitive).
    pub fn from_label(label: &str, delta: f64) -> Result<Self> {
        match label.to_ascii_uppercase().as_str() {
            "N0" => Self::level(0),
            "N1" => Self::level(1),
            "N2" => Self::level(2),
            "N3" => Self::level(3),
            "QGL" => Ok(Self::qgl()),
            "PERT_PPXPP" | "PERT-PPXPP" => Self::pert_ppxpp(delta),
            "HTOT" => Ok(Self::htot()),
            "PPXPP" => Ok(Self::ppxpp()),
            other => Err(Error::Config(format!(
                "unknown model label {other:?}; expected one of {CANONICAL_LABELS:?}"
            ))),
        }
    }

    pub fn weights(&self) -> [f64; 5] {
        self.rule.weights()
    }

    /// Invariant under the global spin flip.
    pub fn is_spin_flip_symmetric(&self) -> bool {
        spin_flip_conjugate(self).weights() == self.weights()
    }

    /// Non-frozen configurations, Rydberg-filtered when the model asks for it.
    pub fn effective_basis(&self, sites: usize) -> Result<Basis> {
        let basis = Basis::effective(sites, &self.rule)?;
        Ok(if self.rydberg {
            rydberg_filter(&basis)
        } else {
            basis
        })
    }

    /// The full configuration space of the model: `2^L` states, or the
    /// Rydberg-blockaded ones.
    pub fn full_basis(&self, sites: usize) -> Result<Basis> {
        let basis = Basis::full(sites)?;
        Ok(if self.rydberg {
            rydberg_filter(&basis)
        } else {
            basis
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// A model acting on chains of a fixed length.
#[derive(Clone, Copy, Debug)]
pub struct ModelOnChain<'a> {
    pub model: &'a ModelSpec,
    pub sites: usize,
}

impl ModelSpec {
    pub fn on_chain(&self, sites: usize) -> ModelOnChain<'_> {
        ModelOnChain { model: self, sites }
    }
}

impl Hamiltonian for ModelOnChain<'_> {
    fn sites(&self) -> usize {
        self.sites
    }

    #[inline]
    fn act(&self, bits: u32, f: &mut dyn FnMut(u32, f64)) {
        self.model
            .rule
            .for_each_flip(bits, self.sites, |site, w| f(bits ^ (1 << site), w));
    }
}

/// `H|s⟩` as a list of `(target, amplitude)`, one entry per flippable site.
pub fn apply(model: &ModelSpec, state: BasisState) -> Result<Vec<(BasisState, f64)>> {
    let targets = crate::basis::flippable_sites(state, &model.rule)?;
    Ok(targets
        .into_iter()
        .map(|(site, w)| (state.flipped(site), w))
        .collect())
}

/// Global spin flip conjugation, `weights[k] -> weights[4 - k]`.
pub fn spin_flip_conjugate(model: &ModelSpec) -> ModelSpec {
    let mut w = model.weights();
    w.reverse();
    let label = if let Some(k) = model.label.strip_prefix('N').and_then(|d| d.parse::<usize>().ok()) {
        if k <= 4 {
            format!("N{}", 4 - k)
        } else {
            format!("{}~X", model.label)
        }
    } else {
        format!("{}~X", model.label)
    };
    ModelSpec {
        label,
        rule: ConstraintRule::new(w).expect("reflection preserves a valid rule"),
        rydberg: model.rydberg,
    }
}

/// Real sparse matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    /// Which basis indexes rows and columns.
    pub basis: String,
}

impl SparseOperator {
    /// Assemble from per-row entry lists; duplicate columns are summed and
    /// entries sorted by column.
    pub fn from_rows(dim: usize, rows: Vec<Vec<(u32, f64)>>, basis: impl Into<String>) -> Self {
        assert_eq!(rows.len(), dim, "row count must equal dimension");
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let start = cols.len();
            for (c, v) in row {
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseOperator {
            dim,
            row_ptr,
            cols,
            vals,
            basis: basis.into(),
        }
    }

    pub fn from_dense(dense: &[Vec<f64>], basis: impl Into<String>) -> Self {
        let rows = dense
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(c, &v)| (c as u32, v))
                    .collect()
            })
            .collect();
        Self::from_rows(dense.len(), rows, basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&(c as u32)) {
            Ok(p) => self.vals[span.start + p],
            Err(_) => 0.0,
        }
    }

    /// All stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut rows = vec![Vec::new(); self.dim];
        for (r, c, v) in self.triplets() {
            rows[c].push((r as u32, v));
        }
        SparseOperator::from_rows(self.dim, rows, self.basis.clone())
    }

    /// Largest `|H_ab - H_ba|`.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    /// Replace the matrix by `(H + Hᵀ) / 2`, making it exactly symmetric.
    pub fn symmetrize(&mut self) {
        let t = self.transpose();
        let mut rows = vec![Vec::new(); self.dim];
        for (r, c, v) in self.triplets().chain(t.triplets()) {
            rows[r].push((c as u32, 0.5 * v));
        }
        *self = SparseOperator::from_rows(self.dim, rows, self.basis.clone());
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm of a
    /// symmetric matrix.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, r)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn matvec_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|r| self.row(r).map(|(c, v)| x[c] * v).sum())
            .collect()
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::<f64>::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Restriction to `indices` (in the given order), reindexed densely.
    pub fn restrict(&self, indices: &[usize]) -> SparseOperator {
        let mut local = std::collections::HashMap::with_capacity(indices.len());
        for (i, &g) in indices.iter().enumerate() {
            local.insert(g, i as u32);
        }
        let rows = indices
            .iter()
            .map(|&g| {
                self.row(g)
                    .filter_map(|(c, v)| local.get(&c).map(|&lc| (lc, v)))
                    .collect()
            })
            .collect();
        SparseOperator::from_rows(indices.len(), rows, format!("{}[restricted]", self.basis))
    }
}

/// Sparse matrix of `model` over `basis`.
///
/// Every flip must land inside the basis; a target outside it means the
/// basis is not closed under the model and is reported as a consistency
/// error.
pub fn build_matrix(model: &ModelSpec, basis: &Basis) -> Result<SparseOperator> {
    let sites = basis.sites();
    let h = model.on_chain(sites);
    let rows: Result<Vec<Vec<(u32, f64)>>> = basis
        .states()
        .par_iter()
        .map(|&s| {
            let mut row = Vec::new();
            let mut missing = None;
            h.act(s, &mut |t, w| match basis.index_of(t) {
                Some(j) => row.push((j as u32, w)),
                None => missing = Some(t),
            });
            match missing {
                Some(t) => Err(Error::Consistency(format!(
                    "{model} maps {} to {} outside the {:?} basis",
                    BasisState::new(s, sites).expect("in range"),
                    BasisState::new(t, sites).expect("in range"),
                    basis.kind()
                ))),
                None => Ok(row),
            }
        })
        .collect();
    let tag = match basis.kind() {
        BasisKind::Full => format!("full L={sites}"),
        BasisKind::Effective => format!("effective({model}) L={sites}"),
        BasisKind::Rydberg => format!("rydberg L={sites}"),
        BasisKind::Custom => format!("custom L={sites}"),
    };
    Ok(SparseOperator::from_rows(basis.len(), rows?, tag))
}

impl Hamiltonian for (&SparseOperator, &Basis) {
    fn sites(&self) -> usize {
        self.1.sites()
    }

    fn act(&self, bits: u32, f: &mut dyn FnMut(u32, f64)) {
        if let Some(r) = self.1.index_of(bits) {
            for (c, v) in self.0.row(r) {
                f(self.1.states()[c], v);
            }
        }
    }
}

/// Permutation `s -> complement(s)` expressed on basis indices; `None` if
/// the basis is not closed under the flip.
pub fn complement_permutation(basis: &Basis) -> Option<Vec<usize>> {
    basis
        .states()
        .iter()
        .map(|&s| basis.index_of(complement(s, basis.sites())))
        .collect()
}
