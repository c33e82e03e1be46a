//! Eigenstate complexity measures on the `2^L` computational basis:
//! half-chain entanglement, stabilizer Rényi entropy and participation ratio.

use faer::{Mat, Side};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::MAX_SITES;
use crate::error::{Error, Result};
use crate::fragmentation::KrylovDecomposition;
use crate::spectral::Spectrum;
use crate::symmetry::{expand_support, SectorBasis};

/// Default largest chain for stabilizer Rényi entropies.
pub const SRE_MAX_SITES: usize = 12;
/// Largest chain whose full Pauli spectrum is materialized.
pub const PAULI_SPECTRUM_MAX_SITES: usize = 12;
/// Largest chain the streaming Pauli transform accepts.
pub const PAULI_STREAM_MAX_SITES: usize = 14;
/// Schmidt weights below this are dropped from the entropy sum.
pub const SCHMIDT_CUTOFF: f64 = 1e-14;
/// Allowed deviation of `‖ψ‖` from one.
pub const NORM_TOL: f64 = 1e-10;

/// Pure state of `sites` qubits; bit `j` of an index is site `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    sites: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Wraps amplitudes without normalizing; `‖ψ‖` must be one.
    pub fn new(sites: usize, amps: Vec<Complex64>) -> Result<Self> {
        let psi = Self::unnormalized(sites, amps)?;
        let norm = psi.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Argument(format!("state norm is {norm}, expected 1")));
        }
        Ok(psi)
    }

    /// Rescales to unit norm.
    pub fn normalized(sites: usize, amps: Vec<Complex64>) -> Result<Self> {
        let mut psi = Self::unnormalized(sites, amps)?;
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::Argument("zero vector cannot be normalized".into()));
        }
        psi.amps.iter_mut().for_each(|a| *a /= norm);
        Ok(psi)
    }

    fn unnormalized(sites: usize, amps: Vec<Complex64>) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::Argument(format!("{sites} sites is outside 1..={MAX_SITES}")));
        }
        if amps.len() != 1usize << sites {
            return Err(Error::Argument(format!(
                "{} amplitudes for {sites} sites",
                amps.len()
            )));
        }
        Ok(StateVector { sites, amps })
    }

    pub fn from_real(sites: usize, amps: &[f64]) -> Result<Self> {
        Self::new(sites, amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub fn basis_state(sites: usize, bits: u32) -> Result<Self> {
        let mut amps = vec![Complex64::default(); 1usize << sites.min(MAX_SITES)];
        let slot = amps
            .get_mut(bits as usize)
            .ok_or_else(|| Error::Argument(format!("configuration {bits} needs more than {sites} sites")))?;
        *slot = Complex64::new(1.0, 0.0);
        Self::new(sites, amps)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    /// `self ⊗ other`, with `self` on the low sites.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let sites = self.sites + other.sites;
        if sites > MAX_SITES {
            return Err(Error::Resource {
                what: "tensor product sites",
                requested: sites,
                cap: MAX_SITES,
            });
        }
        let mut amps = Vec::with_capacity(1usize << sites);
        for b in &other.amps {
            amps.extend(self.amps.iter().map(|a| a * b));
        }
        Ok(StateVector { sites, amps })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn is_real(&self) -> bool {
        self.amps.iter().all(|a| a.im == 0.0)
    }
}

fn entropy_of(weights: impl IntoIterator<Item = f64>) -> f64 {
    weights
        .into_iter()
        .filter(|&w| w > SCHMIDT_CUTOFF)
        .map(|w| -w * w.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Von Neumann entropy in bits of sites `0..cut` against the rest.
pub fn entanglement_entropy(psi: &StateVector, cut: usize) -> Result<f64> {
    let l = psi.sites;
    if cut == 0 || cut >= l {
        return Err(Error::Argument(format!("cut {cut} does not split {l} sites")));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::Argument(format!("state norm is {norm}, expected 1")));
    }
    // Reduced density matrix of the smaller side.
    let (small, large, small_is_low) = if cut <= l - cut {
        (cut, l - cut, true)
    } else {
        (l - cut, cut, false)
    };
    let (ns, nl) = (1usize << small, 1usize << large);
    let amp = |s: usize, t: usize| {
        if small_is_low {
            psi.amps[s | (t << small)]
        } else {
            psi.amps[t | (s << large)]
        }
    };
    let mut rho = vec![Complex64::default(); ns * ns];
    for t in 0..nl {
        for a in 0..ns {
            let xa = amp(a, t);
            if xa == Complex64::default() {
                continue;
            }
            for b in 0..=a {
                rho[a * ns + b] += xa * amp(b, t).conj();
            }
        }
    }
    let failed = |_| Error::Numerical("reduced density matrix eigensolver did not converge".into());
    if psi.is_real() {
        let m = Mat::<f64>::from_fn(ns, ns, |i, j| {
            let (a, b) = if i >= j { (i, j) } else { (j, i) };
            rho[a * ns + b].re
        });
        let w = m.self_adjoint_eigenvalues(Side::Lower).map_err(failed)?;
        Ok(entropy_of(w))
    } else {
        // [[Re, −Im], [Im, Re]] has each eigenvalue of ρ twice.
        let m = Mat::<f64>::from_fn(2 * ns, 2 * ns, |i, j| {
            let (bi, bj) = (i / ns, j / ns);
            let (ri, rj) = (i % ns, j % ns);
            let z = if ri >= rj {
                rho[ri * ns + rj]
            } else {
                rho[rj * ns + ri].conj()
            };
            match (bi, bj) {
                (0, 0) | (1, 1) => z.re,
                (0, 1) => -z.im,
                _ => z.im,
            }
        });
        let w = m.self_adjoint_eigenvalues(Side::Lower).map_err(failed)?;
        Ok(entropy_of(w) / 2.0)
    }
}

/// Entropy of the first `⌊L/2⌋` sites.
pub fn half_chain_entropy(psi: &StateVector) -> Result<f64> {
    entanglement_entropy(psi, psi.sites / 2)
}

/// In-place Walsh–Hadamard transform (unnormalized).
pub fn fwht(v: &mut [Complex64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// `⟨ψ|X^x Z^z|ψ⟩` for every `z` at fixed flip mask `x`.
pub fn pauli_block(psi: &StateVector, x: u32, buf: &mut Vec<Complex64>) {
    let n = psi.amps.len();
    buf.clear();
    buf.extend((0..n).map(|s| psi.amps[s ^ x as usize].conj() * psi.amps[s]));
    fwht(buf);
}

fn check_stream(psi: &StateVector, cap: usize) -> Result<()> {
    if psi.sites > cap {
        return Err(Error::Resource {
            what: "Pauli spectrum sites",
            requested: psi.sites,
            cap,
        });
    }
    Ok(())
}

/// Visits `|⟨P⟩|²` block by block; `f(x, p)` receives `p[z]` for the string
/// `X^x Z^z`, up to phase.
pub fn for_each_pauli_block(psi: &StateVector, mut f: impl FnMut(u32, &[f64])) -> Result<()> {
    check_stream(psi, PAULI_STREAM_MAX_SITES)?;
    let n = psi.amps.len();
    let mut buf = Vec::with_capacity(n);
    let mut p = vec![0.0; n];
    for x in 0..n as u32 {
        pauli_block(psi, x, &mut buf);
        for (pz, w) in p.iter_mut().zip(&buf) {
            *pz = w.norm_sqr();
        }
        f(x, &p);
    }
    Ok(())
}

/// All `4^L` values `|⟨ψ|P|ψ⟩|²`, indexed `x·2^L + z`.
pub fn pauli_spectrum(psi: &StateVector) -> Result<Vec<f64>> {
    check_stream(psi, PAULI_SPECTRUM_MAX_SITES)?;
    let mut out = Vec::with_capacity(1usize << (2 * psi.sites));
    for_each_pauli_block(psi, |_, p| out.extend_from_slice(p))?;
    Ok(out)
}

/// Stabilizer Rényi entropy `−log₂(2^{−L} Σ_P |⟨P⟩|⁴)` in bits.
pub fn sre(psi: &StateVector) -> Result<f64> {
    sre_capped(psi, SRE_MAX_SITES)
}

pub fn sre_capped(psi: &StateVector, cap: usize) -> Result<f64> {
    check_stream(psi, cap.min(PAULI_STREAM_MAX_SITES))?;
    let n = psi.amps.len();
    // Fixed chunking keeps the sum independent of the thread count.
    let chunk = 64.min(n);
    let partial: Vec<f64> = (0..n as u32)
        .collect::<Vec<_>>()
        .par_chunks(chunk)
        .map(|xs| {
            let mut buf = Vec::with_capacity(n);
            xs.iter()
                .map(|&x| {
                    pauli_block(psi, x, &mut buf);
                    buf.iter().map(|w| w.norm_sqr().powi(2)).sum::<f64>()
                })
                .sum::<f64>()
        })
        .collect();
    let total: f64 = partial.iter().sum();
    Ok((-(total / n as f64).log2()).max(0.0))
}

/// `1 / Σ_i |⟨i|ψ⟩|⁴` over the computational basis.
pub fn participation_ratio(psi: &StateVector) -> f64 {
    1.0 / psi.amps.iter().map(|a| a.norm_sqr().powi(2)).sum::<f64>()
}

/// Observables of one eigenstate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenstateReport {
    pub energy: f64,
    pub s_half: f64,
    pub sre: Option<f64>,
    pub pr: f64,
    pub fragment: Option<usize>,
    pub sector: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// SRE is evaluated only up to this many sites.
    pub sre_max_sites: usize,
    /// Weight on one fragment needed to tag an eigenstate with it.
    pub dominance: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            sre_max_sites: SRE_MAX_SITES,
            dominance: 1.0 - 1e-8,
        }
    }
}

/// Which rows of the sector a spectrum was computed on.
#[derive(Clone, Copy, Debug)]
pub enum Block<'a> {
    /// The whole sector; fragments, if given, tag each eigenstate by
    /// dominant support.
    Sector(Option<&'a KrylovDecomposition>),
    /// One fragment of the sector.
    Fragment {
        id: usize,
        members: &'a [usize],
    },
}

/// Expand each eigenvector to the computational basis and evaluate
/// `S_{L/2}`, PR and (for small chains) the SRE.
pub fn spectrum_scan(
    sp: &Spectrum,
    sb: &SectorBasis,
    block: Block<'_>,
    opts: ScanOptions,
) -> Result<Vec<EigenstateReport>> {
    let vectors = sp
        .eigenvectors
        .as_ref()
        .ok_or_else(|| Error::Argument("spectrum scan needs eigenvectors".into()))?;
    let full_support: Vec<usize>;
    let support: &[usize] = match block {
        Block::Fragment { members, .. } => members,
        Block::Sector(_) => {
            full_support = (0..sb.dim()).collect();
            &full_support
        }
    };
    if vectors.nrows() != support.len() {
        return Err(Error::Argument(format!(
            "eigenvectors have {} rows, block has {}",
            vectors.nrows(),
            support.len()
        )));
    }
    let sector = sb.descriptor();
    let sites = sb.sites();
    (0..vectors.ncols())
        .into_par_iter()
        .map(|n| {
            let v: Vec<f64> = vectors.col(n).iter().copied().collect();
            let fragment = match block {
                Block::Fragment { id, .. } => Some(id),
                Block::Sector(None) => None,
                Block::Sector(Some(kd)) => dominant_fragment(&v, kd, opts.dominance),
            };
            let amps = expand_support(&v, support, sb)?;
            let psi = StateVector::from_real(sites, &amps)?;
            Ok(EigenstateReport {
                energy: sp.eigenvalues[n],
                s_half: half_chain_entropy(&psi)?,
                sre: if sites <= opts.sre_max_sites {
                    Some(sre_capped(&psi, opts.sre_max_sites)?)
                } else {
                    None
                },
                pr: participation_ratio(&psi),
                fragment,
                sector: sector.clone(),
            })
        })
        .collect()
}

fn dominant_fragment(v: &[f64], kd: &KrylovDecomposition, dominance: f64) -> Option<usize> {
    let mut weight = vec![0.0; kd.count()];
    for (i, c) in v.iter().enumerate() {
        weight[kd.labels()[i]] += c * c;
    }
    let total: f64 = weight.iter().sum();
    let (id, w) = weight
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    (*w >= dominance * total).then_some(id)
}

/// Rows of `E,S_half,M,PR,fragment_id,sector`.
pub fn write_reports_csv<W: std::io::Write>(reports: &[EigenstateReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["E", "S_half", "M", "PR", "fragment_id", "sector"])?;
    for r in reports {
        w.write_record([
            format!("{:.12}", r.energy),
            format!("{:.12}", r.s_half),
            r.sre.map_or_else(String::new, |m| format!("{m:.12}")),
            format!("{:.6}", r.pr),
            r.fragment.map_or_else(String::new, |f| f.to_string()),
            r.sector.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<eigenstate csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn product_state_has_no_entanglement() {
        let psi = StateVector::basis_state(8, 0b1010_1010).unwrap();
        assert!(half_chain_entropy(&psi).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ghz_has_one_bit() {
        let l = 6;
        let mut a = vec![0.0; 1 << l];
        a[0] = 0.5f64.sqrt();
        a[(1 << l) - 1] = 0.5f64.sqrt();
        let psi = StateVector::from_real(l, &a).unwrap();
        assert!((half_chain_entropy(&psi).unwrap() - 1.0).abs() < 1e-10);
        assert!((entanglement_entropy(&psi, 1).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flat_schmidt_spectrum_is_maximal() {
        // |ψ⟩ = 2^{-L/4} Σ_a |a⟩_A |a⟩_B with complex phases
        let l = 8;
        let h = l / 2;
        let n = 1usize << h;
        let mut a = vec![Complex64::default(); 1 << l];
        for s in 0..n {
            let phase = 0.37 * s as f64;
            a[s | (s << h)] = c(phase.cos(), phase.sin()) / (n as f64).sqrt();
        }
        let psi = StateVector::new(l, a).unwrap();
        assert!((half_chain_entropy(&psi).unwrap() - h as f64).abs() < 1e-10);
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let psi = StateVector::unnormalized(2, vec![c(1.0, 0.0); 4]).unwrap();
        assert!(matches!(half_chain_entropy(&psi), Err(Error::Argument(_))));
        assert!(StateVector::new(2, vec![c(1.0, 0.0); 4]).is_err());
    }

    #[test]
    fn single_qubit_magic() {
        let s = 0.5f64.sqrt();
        let t = std::f64::consts::FRAC_PI_4;
        let psi = StateVector::new(1, vec![c(s, 0.0), c(s * t.cos(), s * t.sin())]).unwrap();
        let m = sre_capped(&psi, 1).unwrap();
        assert!((m + 0.75f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn basis_state_pauli_spectrum() {
        let psi = StateVector::basis_state(3, 0b101).unwrap();
        let p = pauli_spectrum(&psi).unwrap();
        assert_eq!(p.len(), 64);
        assert!((p[0] - 1.0).abs() < 1e-14);
        let ones = p.iter().filter(|&&v| (v - 1.0).abs() < 1e-12).count();
        let zeros = p.iter().filter(|&&v| v.abs() < 1e-12).count();
        assert_eq!((ones, zeros), (8, 56));
        assert!(sre(&psi).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sre_cap_is_a_resource_error() {
        let psi = StateVector::basis_state(13, 0).unwrap();
        assert!(matches!(sre(&psi), Err(Error::Resource { .. })));
    }

    #[test]
    fn participation_ratio_limits() {
        let psi = StateVector::basis_state(5, 3).unwrap();
        assert_eq!(participation_ratio(&psi), 1.0);
        let d = 32;
        let u = StateVector::from_real(5, &vec![1.0 / (d as f64).sqrt(); d]).unwrap();
        assert!((participation_ratio(&u) - d as f64).abs() < 1e-9);
    }

    #[test]
    fn tensor_order() {
        let a = StateVector::basis_state(2, 0b01).unwrap();
        let b = StateVector::basis_state(3, 0b100).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.sites(), 5);
        assert_eq!(ab.amplitudes()[0b10001], c(1.0, 0.0));
    }
}
