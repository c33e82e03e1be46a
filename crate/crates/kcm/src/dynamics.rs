//! Scar initial states and quench dynamics by spectral decomposition.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, BasisKind};
use crate::error::{Error, Result};
use crate::observables::StateVector;
use crate::spectral::Spectrum;

/// `|K⟩^{⊗m}` with `|K⟩ = |0⟩^{⊗K/2} ⊗ |W⟩_{K/2}` on `L = m·K` sites.
///
/// Each unit cell leaves its first `K/2` sites empty and puts one excitation
/// in equal superposition over the last `K/2`.
pub fn build_scar_state(k: usize, m: usize) -> Result<StateVector> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::Argument(format!("unit cell K = {k} must be even and at least 2")));
    }
    if m == 0 {
        return Err(Error::Argument("at least one unit cell is required".into()));
    }
    let sites = k * m;
    let half = k / 2;
    let amp = (2.0 / k as f64).powf(m as f64 / 2.0);
    if sites > crate::basis::MAX_SITES {
        return Err(Error::Resource {
            what: "scar state sites",
            requested: sites,
            cap: crate::basis::MAX_SITES,
        });
    }
    let mut amps = vec![Complex64::default(); 1usize << sites];
    // One excited offset per cell, enumerated in mixed radix `half`.
    let configurations = half.pow(m as u32);
    for mut code in 0..configurations {
        let mut bits = 0u32;
        for cell in 0..m {
            let offset = code % half;
            code /= half;
            bits |= 1 << (cell * k + half + offset);
        }
        amps[bits as usize] = Complex64::new(amp, 0.0);
    }
    StateVector::new(sites, amps)
}

/// `n` uniformly spaced times on `[t0, t1]`, both ends included.
pub fn uniform_time_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t0],
        _ => (0..n)
            .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// 2000 points on `[0, 100]`.
pub fn default_quench_grid() -> Vec<f64> {
    uniform_time_grid(0.0, 100.0, 2000)
}

/// Initial state resolved in an eigenbasis.
#[derive(Clone, Debug)]
pub struct Decomposed {
    pub energies: Vec<f64>,
    /// `⟨E_n|ψ0⟩`.
    pub coefficients: Vec<Complex64>,
    /// Weight of `ψ0` inside the diagonalized basis.
    pub projection_weight: f64,
    /// Weight on frozen configurations, which stay put with `E = 0`.
    pub frozen_weight: f64,
    /// Weight outside the basis that is not known to be frozen.
    pub lost_weight: f64,
}

/// Resolve `ψ0` in the eigenvectors of `sp`, computed on `basis`.
pub fn decompose_state(sp: &Spectrum, basis: &Basis, psi0: &StateVector) -> Result<Decomposed> {
    let vectors = sp
        .eigenvectors
        .as_ref()
        .ok_or_else(|| Error::Argument("quench needs eigenvectors".into()))?;
    if psi0.sites() != basis.sites() {
        return Err(Error::Argument(format!(
            "state has {} sites, basis has {}",
            psi0.sites(),
            basis.sites()
        )));
    }
    if vectors.nrows() != basis.len() {
        return Err(Error::Argument(format!(
            "eigenvectors have {} rows, basis has {} states",
            vectors.nrows(),
            basis.len()
        )));
    }
    let amps = psi0.amplitudes();
    let local: Vec<Complex64> = basis.states().iter().map(|&s| amps[s as usize]).collect();
    let projection_weight: f64 = local.iter().map(Complex64::norm_sqr).sum();
    let outside = (1.0 - projection_weight).max(0.0);
    let (frozen_weight, lost_weight) = if basis.kind() == BasisKind::Effective {
        (outside, 0.0)
    } else {
        (0.0, outside)
    };
    let coefficients = (0..vectors.ncols())
        .into_par_iter()
        .map(|n| {
            vectors
                .col(n)
                .iter()
                .zip(&local)
                .map(|(&v, &c)| c * v)
                .sum::<Complex64>()
        })
        .collect();
    Ok(Decomposed {
        energies: sp.eigenvalues.clone(),
        coefficients,
        projection_weight,
        frozen_weight,
        lost_weight,
    })
}

impl Decomposed {
    /// `⟨ψ0|Ψ(t)⟩`.
    pub fn return_amplitude(&self, t: f64) -> Complex64 {
        let moving: Complex64 = self
            .energies
            .iter()
            .zip(&self.coefficients)
            .map(|(&e, c)| Complex64::from_polar(c.norm_sqr(), -e * t))
            .sum();
        moving + self.frozen_weight
    }

    /// Infinite-time mean of `|⟨ψ0|Ψ(t)⟩|²`: the squared weight of each
    /// distinct energy, frozen weight joining `E = 0`.
    pub fn long_time_mean(&self) -> f64 {
        let scale = self
            .energies
            .iter()
            .fold(1.0f64, |m, e| m.max(e.abs()));
        let tol = 1e-9 * scale;
        let mut groups: Vec<(f64, f64)> = Vec::new();
        for (&e, c) in self.energies.iter().zip(&self.coefficients) {
            match groups.last_mut() {
                Some((g, w)) if (e - *g).abs() <= tol => *w += c.norm_sqr(),
                _ => groups.push((e, c.norm_sqr())),
            }
        }
        if self.frozen_weight > 0.0 {
            match groups.iter_mut().find(|(g, _)| g.abs() <= tol) {
                Some((_, w)) => *w += self.frozen_weight,
                None => groups.push((0.0, self.frozen_weight)),
            }
        }
        groups.iter().map(|(_, w)| w * w).sum()
    }
}

/// Return amplitude, probability and eigenstate overlaps of a quench.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchResult {
    pub times: Vec<f64>,
    /// `⟨ψ0|Ψ(t)⟩` as `(re, im)`.
    pub amplitude: Vec<(f64, f64)>,
    pub probability: Vec<f64>,
    /// `(E_n, |⟨E_n|ψ0⟩|²)`.
    pub overlaps: Vec<(f64, f64)>,
    pub projection_weight: f64,
    pub frozen_weight: f64,
    /// Weight outside the basis that was dropped; nonzero only for bases
    /// other than the effective one.
    pub lost_weight: f64,
    pub long_time_mean: f64,
}

impl QuenchResult {
    /// The projection onto the diagonalized space missed more than `1e-10`.
    pub fn is_incomplete(&self) -> bool {
        self.lost_weight > 1e-10
    }

    /// Fewest eigenstates whose overlaps sum to at least `fraction`.
    pub fn dominant_count(&self, fraction: f64) -> usize {
        let mut w: Vec<f64> = self.overlaps.iter().map(|o| o.1).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        for (i, x) in w.iter().enumerate() {
            acc += x;
            if acc >= fraction {
                return i + 1;
            }
        }
        w.len()
    }

    pub fn write_return_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "re", "im", "probability"])?;
        for (i, t) in self.times.iter().enumerate() {
            let (re, im) = self.amplitude[i];
            w.write_record([
                format!("{t:.6}"),
                format!("{re:.12e}"),
                format!("{im:.12e}"),
                format!("{:.12e}", self.probability[i]),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<quench csv>", e))?;
        Ok(())
    }

    pub fn write_overlaps_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["E", "overlap"])?;
        for (e, o) in &self.overlaps {
            w.write_record([format!("{e:.12}"), format!("{o:.12e}")])?;
        }
        w.flush().map_err(|e| Error::io("<overlap csv>", e))?;
        Ok(())
    }
}

/// Evolve `ψ0` under the eigendecomposition `sp` of `H` on `basis`.
pub fn quench(sp: &Spectrum, basis: &Basis, psi0: &StateVector, times: &[f64]) -> Result<QuenchResult> {
    let d = decompose_state(sp, basis, psi0)?;
    let amplitude: Vec<Complex64> = times.par_iter().map(|&t| d.return_amplitude(t)).collect();
    Ok(QuenchResult {
        times: times.to_vec(),
        probability: amplitude.iter().map(Complex64::norm_sqr).collect(),
        amplitude: amplitude.iter().map(|a| (a.re, a.im)).collect(),
        overlaps: d
            .energies
            .iter()
            .zip(&d.coefficients)
            .map(|(&e, c)| (e, c.norm_sqr()))
            .collect(),
        projection_weight: d.projection_weight,
        frozen_weight: d.frozen_weight,
        lost_weight: d.lost_weight,
        long_time_mean: d.long_time_mean(),
    })
}

/// `Ψ(t)` on all `2^L` configurations.
pub fn evolve(sp: &Spectrum, basis: &Basis, psi0: &StateVector, t: f64) -> Result<StateVector> {
    let d = decompose_state(sp, basis, psi0)?;
    let vectors = sp.eigenvectors.as_ref().expect("checked by decompose_state");
    let mut local = vec![Complex64::default(); basis.len()];
    for (n, (&e, &c)) in d.energies.iter().zip(&d.coefficients).enumerate() {
        let phase = c * Complex64::from_polar(1.0, -e * t);
        for (slot, &v) in local.iter_mut().zip(vectors.col(n).iter()) {
            *slot += phase * v;
        }
    }
    let mut amps = psi0.amplitudes().to_vec();
    if d.frozen_weight == 0.0 && d.lost_weight > 0.0 {
        amps.iter_mut().for_each(|a| *a = Complex64::default());
    }
    for (&s, &a) in basis.states().iter().zip(&local) {
        amps[s as usize] = a;
    }
    if d.lost_weight > 0.0 {
        StateVector::normalized(psi0.sites(), amps)
    } else {
        StateVector::new(psi0.sites(), amps)
    }
}

/// Strongest revival of a return-probability series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevivalScore {
    pub time: f64,
    pub amplitude: f64,
    /// The series is constant, as for an eigenstate.
    pub degenerate: bool,
}

/// Largest local maximum after the first local minimum; zero when the
/// series has no such maximum.
pub fn revival_score(qr: &QuenchResult) -> RevivalScore {
    let p = &qr.probability;
    let (lo, hi) = p
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if p.is_empty() || hi - lo < 1e-12 {
        return RevivalScore {
            time: qr.times.first().copied().unwrap_or(0.0),
            amplitude: p.first().copied().unwrap_or(0.0),
            degenerate: true,
        };
    }
    let none = RevivalScore {
        time: 0.0,
        amplitude: 0.0,
        degenerate: false,
    };
    let Some(first_min) = (1..p.len().saturating_sub(1)).find(|&i| p[i] <= p[i - 1] && p[i] < p[i + 1])
    else {
        return none;
    };
    (first_min + 1..p.len().saturating_sub(1))
        .filter(|&i| p[i] >= p[i - 1] && p[i] > p[i + 1])
        .max_by(|&a, &b| p[a].total_cmp(&p[b]))
        .map_or(none, |i| RevivalScore {
            time: qr.times[i],
            amplitude: p[i],
            degenerate: false,
        })
}

/// Separate excursions of the return probability above `threshold` after
/// it first drops below it.
pub fn count_revivals(qr: &QuenchResult, threshold: f64) -> usize {
    let p = &qr.probability;
    let Some(start) = p.iter().position(|&x| x < threshold) else {
        return 0;
    };
    let mut above = false;
    let mut count = 0;
    for &x in &p[start..] {
        if x >= threshold && !above {
            count += 1;
        }
        above = x >= threshold;
    }
    count
}
