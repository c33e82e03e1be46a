//! Zero-momentum symmetry sectors with optional inversion and spin-flip
//! parities.
//!
//! The symmetry group is generated by translation `T`, inversion `I` and the
//! global flip `K` (the latter two only when the sector fixes their parity).
//! A sector state is built from one orbit of the group:
//!
//! ```text
//! |ã⟩ = |O_a|^{-1/2} Σ_{s ∈ O_a} χ(g_s) |s⟩,   g_s a = s
//! ```
//!
//! where `χ(T^j I^p K^q) = ι^p κ^q`. The orbit representative is the
//! smallest integer in the orbit. Orbits on which `χ` is not trivial on the
//! stabiliser cancel and are dropped.

use std::fmt;
use std::ops::{AddAssign, Mul};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{complement, reflect, translate, Basis, BasisKind};
use crate::error::{Error, Result};
use crate::models::{Hamiltonian, SparseOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    fn tag(self) -> char {
        match self {
            Parity::Even => 'p',
            Parity::Odd => 'm',
        }
    }
}

/// Quantum numbers selecting a sector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SectorSpec {
    /// Only `0` is supported.
    pub momentum: i32,
    pub inversion: Option<Parity>,
    pub spin_flip: Option<Parity>,
}

impl SectorSpec {
    /// `k = 0`, no further parities.
    pub const fn zero_momentum() -> Self {
        SectorSpec {
            momentum: 0,
            inversion: None,
            spin_flip: None,
        }
    }

    /// `k = 0`, `I = +1`.
    pub const fn symmetric() -> Self {
        SectorSpec {
            momentum: 0,
            inversion: Some(Parity::Even),
            spin_flip: None,
        }
    }

    /// `k = 0`, `I = +1`, `κ = +1`.
    pub const fn fully_symmetric() -> Self {
        SectorSpec {
            momentum: 0,
            inversion: Some(Parity::Even),
            spin_flip: Some(Parity::Even),
        }
    }

    pub fn with_inversion(mut self, p: Option<Parity>) -> Self {
        self.inversion = p;
        self
    }

    pub fn with_spin_flip(mut self, p: Option<Parity>) -> Self {
        self.spin_flip = p;
        self
    }
}

impl fmt::Display for SectorSpec {
    /// `k0`, `k0.Ip`, `k0.Im.Kp`, ...
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k{}", self.momentum)?;
        if let Some(p) = self.inversion {
            write!(f, ".I{}", p.tag())?;
        }
        if let Some(p) = self.spin_flip {
            write!(f, ".K{}", p.tag())?;
        }
        Ok(())
    }
}

impl FromStr for SectorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("malformed sector descriptor {s:?}"));
        let mut parts = s.split('.');
        let momentum = parts
            .next()
            .and_then(|k| k.strip_prefix('k'))
            .and_then(|k| k.parse::<i32>().ok())
            .ok_or_else(bad)?;
        let mut spec = SectorSpec {
            momentum,
            inversion: None,
            spin_flip: None,
        };
        for part in parts {
            let parity = match part.get(1..) {
                Some("p") => Parity::Even,
                Some("m") => Parity::Odd,
                _ => return Err(bad()),
            };
            match part.chars().next() {
                Some('I') if spec.inversion.is_none() => spec.inversion = Some(parity),
                Some('K') if spec.spin_flip.is_none() => spec.spin_flip = Some(parity),
                _ => return Err(bad()),
            }
        }
        Ok(spec)
    }
}

/// The finite group generated by the sector's symmetries on `sites` sites.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SymmetryGroup {
    sites: usize,
    inversion: Option<Parity>,
    spin_flip: Option<Parity>,
}

impl SymmetryGroup {
    pub(crate) fn new(sites: usize, spec: &SectorSpec) -> Self {
        SymmetryGroup {
            sites,
            inversion: spec.inversion,
            spin_flip: spec.spin_flip,
        }
    }

    pub(crate) fn order(&self) -> usize {
        self.sites
            * if self.inversion.is_some() { 2 } else { 1 }
            * if self.spin_flip.is_some() { 2 } else { 1 }
    }

    /// Visit `(g s, χ(g))` for every group element `g`.
    #[inline]
    pub(crate) fn for_each_image(&self, s: u32, mut f: impl FnMut(u32, f64)) {
        let inv = self.inversion.map_or(1, |_| 2);
        let flip = self.spin_flip.map_or(1, |_| 2);
        for q in 0..flip {
            let sq = if q == 1 { complement(s, self.sites) } else { s };
            let cq = if q == 1 { self.spin_flip.unwrap().sign() } else { 1.0 };
            for p in 0..inv {
                let mut t = if p == 1 { reflect(sq, self.sites) } else { sq };
                let c = if p == 1 { cq * self.inversion.unwrap().sign() } else { cq };
                for _ in 0..self.sites {
                    f(t, c);
                    t = translate(t, self.sites);
                }
            }
        }
    }

    /// Smallest orbit element and `χ(g)` for a `g` carrying `s` to it.
    #[inline]
    pub(crate) fn canonical(&self, s: u32) -> (u32, f64) {
        let mut best = (s, 1.0);
        self.for_each_image(s, |t, c| {
            if t < best.0 {
                best = (t, c);
            }
        });
        best
    }

    /// Orbit size of `rep`, or `None` when the character is nontrivial on
    /// its stabiliser (the symmetrised state vanishes).
    pub(crate) fn orbit_size(&self, rep: u32) -> Option<usize> {
        let mut stabiliser = 0usize;
        let mut vanishes = false;
        self.for_each_image(rep, |t, c| {
            if t == rep {
                stabiliser += 1;
                if c < 0.0 {
                    vanishes = true;
                }
            }
        });
        (!vanishes).then(|| self.order() / stabiliser)
    }
}

/// One symmetry-adapted basis state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymOrbit {
    /// Smallest configuration of the orbit.
    pub representative: u32,
    /// Number of distinct configurations in the orbit.
    pub orbit_size: u32,
    /// Amplitude of each orbit member, `1/sqrt(orbit_size)`.
    pub normalization: f64,
}

/// Symmetry-adapted basis of one sector.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    spec: SectorSpec,
    sites: usize,
    parent: BasisKind,
    orbits: Vec<SymOrbit>,
}

impl SectorBasis {
    pub fn spec(&self) -> SectorSpec {
        self.spec
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn parent_kind(&self) -> BasisKind {
        self.parent
    }

    pub fn dim(&self) -> usize {
        self.orbits.len()
    }

    pub fn orbits(&self) -> &[SymOrbit] {
        &self.orbits
    }

    pub fn representatives(&self) -> impl Iterator<Item = u32> + '_ {
        self.orbits.iter().map(|o| o.representative)
    }

    pub fn index_of(&self, rep: u32) -> Option<usize> {
        self.orbits
            .binary_search_by_key(&rep, |o| o.representative)
            .ok()
    }

    pub(crate) fn group(&self) -> SymmetryGroup {
        SymmetryGroup::new(self.sites, &self.spec)
    }

    /// Sector index and character of the orbit containing `bits`, if the
    /// orbit is part of the sector.
    pub fn locate(&self, bits: u32) -> Option<(usize, f64)> {
        let (rep, sign) = self.group().canonical(bits);
        self.index_of(rep).map(|i| (i, sign))
    }

    /// Label used in file names and CSV columns.
    pub fn descriptor(&self) -> String {
        self.spec.to_string()
    }
}

/// Symmetry-adapted basis of `spec` built from the orbits inside `basis`.
///
/// `basis` must be closed under the symmetries of `spec`.
pub fn build_sector(basis: &Basis, spec: SectorSpec) -> Result<SectorBasis> {
    if spec.momentum != 0 {
        return Err(Error::NotImplemented(format!(
            "momentum sector k={} (only k=0 is available)",
            spec.momentum
        )));
    }
    let sites = basis.sites();
    let group = SymmetryGroup::new(sites, &spec);
    if basis.kind() != BasisKind::Full {
        let open = basis.states().par_iter().find_any(|&&s| {
            !basis.contains(translate(s, sites))
                || (spec.inversion.is_some() && !basis.contains(reflect(s, sites)))
                || (spec.spin_flip.is_some() && !basis.contains(complement(s, sites)))
        });
        if let Some(&s) = open {
            return Err(Error::SymmetryViolation(format!(
                "basis is not closed under the symmetries of sector {spec}: state {s:#b}"
            )));
        }
    }
    let orbits: Vec<SymOrbit> = basis
        .states()
        .par_iter()
        .filter_map(|&s| {
            if group.canonical(s).0 != s {
                return None;
            }
            group.orbit_size(s).map(|size| SymOrbit {
                representative: s,
                orbit_size: size as u32,
                normalization: 1.0 / (size as f64).sqrt(),
            })
        })
        .collect();
    Ok(SectorBasis {
        spec,
        sites,
        parent: basis.kind(),
        orbits,
    })
}

/// Exact check that `h` commutes with each generator of the sector group on
/// a sample of configurations.
fn check_commutation<H: Hamiltonian + ?Sized>(h: &H, sb: &SectorBasis) -> Result<()> {
    let sites = sb.sites;
    type Generator = (&'static str, Box<dyn Fn(u32) -> u32>);
    let mut generators: Vec<Generator> =
        vec![("translation", Box::new(move |s| translate(s, sites)))];
    if sb.spec.inversion.is_some() {
        generators.push(("inversion", Box::new(move |s| reflect(s, sites))));
    }
    if sb.spec.spin_flip.is_some() {
        generators.push(("spin flip", Box::new(move |s| complement(s, sites))));
    }
    let step = (sb.dim() / 256).max(1);
    let image = |s: u32| {
        let mut out = Vec::new();
        h.act(s, &mut |t, w| out.push((t, w)));
        out.sort_by_key(|a| a.0);
        out
    };
    for orbit in sb.orbits.iter().step_by(step) {
        let s = orbit.representative;
        for (name, g) in &generators {
            let mut mapped: Vec<(u32, f64)> = image(s).into_iter().map(|(t, w)| (g(t), w)).collect();
            mapped.sort_by_key(|a| a.0);
            let direct = image(g(s));
            let same = mapped.len() == direct.len()
                && mapped
                    .iter()
                    .zip(&direct)
                    .all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= 1e-12);
            if !same {
                return Err(Error::SymmetryViolation(format!(
                    "Hamiltonian does not commute with {name} (sector {}, state {s:#b})",
                    sb.spec
                )));
            }
        }
    }
    Ok(())
}

/// Matrix of `h` in the symmetry-adapted basis.
pub fn project_hamiltonian<H: Hamiltonian + ?Sized>(h: &H, sb: &SectorBasis) -> Result<SparseOperator> {
    if h.sites() != sb.sites {
        return Err(Error::Argument(format!(
            "Hamiltonian on {} sites, sector on {}",
            h.sites(),
            sb.sites
        )));
    }
    check_commutation(h, sb)?;
    let group = sb.group();
    let rows: Vec<Vec<(u32, f64)>> = sb
        .orbits
        .par_iter()
        .map(|a| {
            let mut row = Vec::new();
            h.act(a.representative, &mut |t, w| {
                let (rep, sign) = group.canonical(t);
                if let Some(b) = sb.index_of(rep) {
                    let ob = sb.orbits[b].orbit_size as f64;
                    row.push((b as u32, w * sign * (a.orbit_size as f64 / ob).sqrt()));
                }
            });
            row
        })
        .collect();
    let mut op = SparseOperator::from_rows(
        sb.dim(),
        rows,
        format!("sector {} L={}", sb.spec, sb.sites),
    );
    let asym = op.asymmetry();
    if asym > 1e-12 {
        return Err(Error::SymmetryViolation(format!(
            "projected Hamiltonian asymmetric by {asym:e} in sector {}",
            sb.spec
        )));
    }
    op.symmetrize();
    Ok(op)
}

/// Sector vector -> amplitudes on all `2^L` configurations.
pub fn expand_to_computational<T>(v: &[T], sb: &SectorBasis) -> Result<Vec<T>>
where
    T: Copy + Default + AddAssign + Mul<f64, Output = T>,
{
    if v.len() != sb.dim() {
        return Err(Error::Argument(format!(
            "sector vector has length {}, sector dimension is {}",
            v.len(),
            sb.dim()
        )));
    }
    let group = sb.group();
    let order = group.order() as f64;
    let mut out = vec![T::default(); 1usize << sb.sites];
    for (orbit, &c) in sb.orbits.iter().zip(v) {
        let scale = (orbit.orbit_size as f64).sqrt() / order;
        group.for_each_image(orbit.representative, |t, chi| {
            out[t as usize] += c * (chi * scale);
        });
    }
    Ok(out)
}

/// Expand only the orbits listed in `support` (sector indices) with
/// coefficients `v`; the rest are zero.
pub fn expand_support<T>(v: &[T], support: &[usize], sb: &SectorBasis) -> Result<Vec<T>>
where
    T: Copy + Default + AddAssign + Mul<f64, Output = T>,
{
    if v.len() != support.len() {
        return Err(Error::Argument("coefficient and support lengths differ".into()));
    }
    let group = sb.group();
    let order = group.order() as f64;
    let mut out = vec![T::default(); 1usize << sb.sites];
    for (&i, &c) in support.iter().zip(v) {
        let orbit = sb.orbits.get(i).ok_or_else(|| {
            Error::Argument(format!("sector index {i} out of range {}", sb.dim()))
        })?;
        let scale = (orbit.orbit_size as f64).sqrt() / order;
        group.for_each_image(orbit.representative, |t, chi| {
            out[t as usize] += c * (chi * scale);
        });
    }
    Ok(out)
}

/// Projection of a computational-basis vector onto the sector,
/// `v_a = ⟨ã|ψ⟩`.
pub fn project_state<T>(psi: &[T], sb: &SectorBasis) -> Result<Vec<T>>
where
    T: Copy + Default + AddAssign + Mul<f64, Output = T>,
{
    if psi.len() != 1usize << sb.sites {
        return Err(Error::Argument(format!(
            "state has length {}, expected 2^{}",
            psi.len(),
            sb.sites
        )));
    }
    let group = sb.group();
    let order = group.order() as f64;
    Ok(sb
        .orbits
        .iter()
        .map(|orbit| {
            let scale = (orbit.orbit_size as f64).sqrt() / order;
            let mut acc = T::default();
            group.for_each_image(orbit.representative, |t, chi| {
                acc += psi[t as usize] * (chi * scale);
            });
            acc
        })
        .collect())
}
