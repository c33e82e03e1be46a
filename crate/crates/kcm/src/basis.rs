//! Computational basis of a periodic spin-1/2 chain and the kinetic
//! constraint that decides which sites may flip.
//!
//! A configuration of `L` sites is stored as the low `L` bits of a `u32`:
//! site `j` (zero based) is occupied, i.e. in state `|1⟩`, iff bit `j` is set.
//! Kets are written with site 0 leftmost, so `|1100000⟩` is the integer `3`.
//!
//! The constraint looks at the four sites `i-2, i-1, i+1, i+2` (periodic).
//! A site may flip when the number of occupied sites among them is one of the
//! rule's allowed counts.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Smallest chain for which the four neighbours of a site are distinct.
pub const MIN_SITES: usize = 5;
/// Largest chain the crate will enumerate.
pub const MAX_SITES: usize = 26;

#[inline]
pub(crate) fn site_mask(sites: usize) -> u32 {
    if sites >= 32 {
        u32::MAX
    } else {
        (1u32 << sites) - 1
    }
}

/// Translation by one site, `j -> j + 1 (mod L)`.
#[inline]
pub fn translate(bits: u32, sites: usize) -> u32 {
    ((bits << 1) | (bits >> (sites - 1))) & site_mask(sites)
}

/// Cyclic shift by `by` sites to the right (`j -> j - by`).
#[inline]
fn shift_back(bits: u32, by: usize, sites: usize) -> u32 {
    ((bits >> by) | (bits << (sites - by))) & site_mask(sites)
}

/// Cyclic shift by `by` sites to the left (`j -> j + by`).
#[inline]
fn shift_forward(bits: u32, by: usize, sites: usize) -> u32 {
    ((bits << by) | (bits >> (sites - by))) & site_mask(sites)
}

/// Spatial inversion `j -> L - 1 - j`.
#[inline]
pub fn reflect(bits: u32, sites: usize) -> u32 {
    bits.reverse_bits() >> (32 - sites)
}

/// Global spin flip.
#[inline]
pub fn complement(bits: u32, sites: usize) -> u32 {
    !bits & site_mask(sites)
}

/// For every site, a mask of the sites whose neighbour population equals
/// `k`, for `k = 0..=4`. Requires `sites >= MIN_SITES`.
#[inline]
pub fn population_masks(bits: u32, sites: usize) -> [u32; 5] {
    // Bit j of `shift_back(bits, d)` is the occupation of site j + d.
    let neighbours = [
        shift_back(bits, 1, sites),
        shift_back(bits, 2, sites),
        shift_forward(bits, 1, sites),
        shift_forward(bits, 2, sites),
    ];
    let mut eq = [site_mask(sites), 0, 0, 0, 0];
    for (step, &v) in neighbours.iter().enumerate() {
        for k in (1..=step + 1).rev() {
            eq[k] = (eq[k] & !v) | (eq[k - 1] & v);
        }
        eq[0] &= !v;
    }
    eq
}

/// A single computational basis configuration.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    bits: u32,
    sites: u8,
}

impl BasisState {
    pub fn new(bits: u32, sites: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::Argument(format!(
                "chain length {sites} outside 1..={MAX_SITES}"
            )));
        }
        if bits & !site_mask(sites) != 0 {
            return Err(Error::Argument(format!(
                "bits {bits:#b} do not fit in {sites} sites"
            )));
        }
        Ok(BasisState {
            bits,
            sites: sites as u8,
        })
    }

    /// The empty configuration `|00…0⟩`.
    pub fn vacuum(sites: usize) -> Result<Self> {
        Self::new(0, sites)
    }

    /// Parse a ket written with site 0 leftmost, e.g. `"1100000"` or
    /// `"|1100000⟩"`.
    pub fn from_ket(text: &str) -> Result<Self> {
        let body = text
            .trim()
            .trim_start_matches('|')
            .trim_end_matches('⟩')
            .trim_end_matches('>');
        let mut bits = 0u32;
        let mut sites = 0usize;
        for ch in body.chars() {
            match ch {
                '0' => {}
                '1' => bits |= 1 << sites,
                other => {
                    return Err(Error::Argument(format!(
                        "unexpected character {other:?} in ket {text:?}"
                    )))
                }
            }
            sites += 1;
            if sites > MAX_SITES {
                return Err(Error::Argument(format!("ket {text:?} too long")));
            }
        }
        Self::new(bits, sites)
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn sites(self) -> usize {
        self.sites as usize
    }

    #[inline]
    pub fn occupied(self, site: usize) -> bool {
        self.bits >> site & 1 == 1
    }

    pub fn occupation(self) -> u32 {
        self.bits.count_ones()
    }

    /// The configuration with `site` toggled.
    pub fn flipped(self, site: usize) -> Self {
        BasisState {
            bits: self.bits ^ (1 << site),
            ..self
        }
    }

    pub fn translated(self) -> Self {
        BasisState {
            bits: translate(self.bits, self.sites()),
            ..self
        }
    }

    pub fn reflected(self) -> Self {
        BasisState {
            bits: reflect(self.bits, self.sites()),
            ..self
        }
    }

    pub fn complemented(self) -> Self {
        BasisState {
            bits: complement(self.bits, self.sites()),
            ..self
        }
    }

    /// Ket digits, site 0 first.
    pub fn to_ket(self) -> String {
        (0..self.sites())
            .map(|j| if self.occupied(j) { '1' } else { '0' })
            .collect()
    }

    /// Binary digits of the integer value, most significant (site `L-1`)
    /// first.
    pub fn to_binary(self) -> String {
        self.to_ket().chars().rev().collect()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}⟩", self.to_ket())
    }
}

impl fmt::Debug for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Number of occupied sites among `i-2, i-1, i+1, i+2`.
pub fn neighbor_population(state: BasisState, site: usize) -> Result<usize> {
    let sites = state.sites();
    if sites < MIN_SITES {
        return Err(Error::Argument(format!(
            "neighbour population needs at least {MIN_SITES} sites, got {sites}"
        )));
    }
    if site >= sites {
        return Err(Error::Argument(format!(
            "site {site} out of range for {sites} sites"
        )));
    }
    let count = [1, 2, sites - 1, sites - 2]
        .iter()
        .filter(|&&d| state.occupied((site + d) % sites))
        .count();
    Ok(count)
}

/// Which neighbour populations permit a flip, and with what amplitude.
///
/// `weights[k]` is the amplitude of a flip at a site whose neighbour
/// population is `k`; zero means the flip is forbidden.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConstraintRule {
    weights: [f64; 5],
}

impl ConstraintRule {
    pub fn new(weights: [f64; 5]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Argument("constraint weights must be finite".into()));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::Argument(
                "constraint rule needs at least one nonzero weight".into(),
            ));
        }
        Ok(ConstraintRule { weights })
    }

    /// Unit amplitude for each listed population.
    pub fn levels(counts: &[usize]) -> Result<Self> {
        let mut weights = [0.0; 5];
        for &k in counts {
            if k > 4 {
                return Err(Error::Argument(format!(
                    "neighbour population {k} is not in 0..=4"
                )));
            }
            weights[k] = 1.0;
        }
        Self::new(weights)
    }

    pub fn weights(&self) -> [f64; 5] {
        self.weights
    }

    #[inline]
    pub fn weight(&self, count: usize) -> f64 {
        self.weights[count]
    }

    #[inline]
    pub fn allows(&self, count: usize) -> bool {
        self.weights[count] != 0.0
    }

    pub fn allowed_counts(&self) -> impl Iterator<Item = usize> + '_ {
        (0..5).filter(move |&k| self.allows(k))
    }

    /// Mask of the sites of `bits` that may flip.
    #[inline]
    pub fn flippable_mask(&self, bits: u32, sites: usize) -> u32 {
        let eq = population_masks(bits, sites);
        let mut mask = 0;
        for (k, m) in eq.iter().enumerate() {
            if self.allows(k) {
                mask |= m;
            }
        }
        mask
    }

    /// Flip amplitudes for every flippable site of `bits`, in site order.
    #[inline]
    pub fn for_each_flip(&self, bits: u32, sites: usize, mut f: impl FnMut(usize, f64)) {
        let eq = population_masks(bits, sites);
        let mut mask = 0;
        for (k, m) in eq.iter().enumerate() {
            if self.allows(k) {
                mask |= m;
            }
        }
        while mask != 0 {
            let site = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            let bit = 1u32 << site;
            let count = eq.iter().position(|m| m & bit != 0).unwrap_or(0);
            f(site, self.weights[count]);
        }
    }

    #[inline]
    pub fn is_frozen_bits(&self, bits: u32, sites: usize) -> bool {
        self.flippable_mask(bits, sites) == 0
    }
}

/// Sites of `state` allowed to flip under `rule`, with their amplitudes.
pub fn flippable_sites(state: BasisState, rule: &ConstraintRule) -> Result<Vec<(usize, f64)>> {
    check_sites(state.sites())?;
    let mut out = Vec::new();
    rule.for_each_flip(state.bits(), state.sites(), |site, w| out.push((site, w)));
    Ok(out)
}

/// True iff no site of `state` may flip, so the Hamiltonian annihilates it.
pub fn is_frozen(state: BasisState, rule: &ConstraintRule) -> Result<bool> {
    check_sites(state.sites())?;
    Ok(rule.is_frozen_bits(state.bits(), state.sites()))
}

fn check_sites(sites: usize) -> Result<()> {
    if sites < MIN_SITES {
        return Err(Error::Argument(format!(
            "constrained models need at least {MIN_SITES} sites, got {sites}"
        )));
    }
    if sites > MAX_SITES {
        return Err(Error::Resource {
            what: "chain length",
            requested: sites,
            cap: MAX_SITES,
        });
    }
    Ok(())
}

/// Every occupied site has its two left and two right neighbours empty.
#[inline]
pub fn is_rydberg_allowed(bits: u32, sites: usize) -> bool {
    let near = shift_back(bits, 1, sites)
        | shift_back(bits, 2, sites)
        | shift_forward(bits, 1, sites)
        | shift_forward(bits, 2, sites);
    bits & near == 0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// All `2^L` configurations.
    Full,
    /// Non-frozen configurations of some rule.
    Effective,
    /// Configurations obeying the Rydberg blockade.
    Rydberg,
    Custom,
}

/// An ordered set of configurations with a reverse index.
#[derive(Clone, Debug)]
pub struct Basis {
    sites: usize,
    kind: BasisKind,
    states: Vec<u32>,
    frozen_count: usize,
}

impl Basis {
    /// Every configuration of `sites` sites.
    pub fn full(sites: usize) -> Result<Self> {
        check_sites(sites)?;
        Ok(Basis {
            sites,
            kind: BasisKind::Full,
            states: (0..1u32 << sites).collect(),
            frozen_count: 0,
        })
    }

    /// The configurations with at least one flippable site.
    pub fn effective(sites: usize, rule: &ConstraintRule) -> Result<Self> {
        check_sites(sites)?;
        let total = 1u32 << sites;
        let states: Vec<u32> = (0..total)
            .into_par_iter()
            .filter(|&s| !rule.is_frozen_bits(s, sites))
            .collect();
        let frozen_count = total as usize - states.len();
        Ok(Basis {
            sites,
            kind: BasisKind::Effective,
            states,
            frozen_count,
        })
    }

    /// A basis from an arbitrary list of configurations (sorted, deduplicated).
    pub fn from_states(sites: usize, mut states: Vec<u32>) -> Result<Self> {
        check_sites(sites)?;
        let mask = site_mask(sites);
        if let Some(bad) = states.iter().find(|&&s| s & !mask != 0) {
            return Err(Error::Argument(format!(
                "state {bad:#b} does not fit in {sites} sites"
            )));
        }
        states.sort_unstable();
        states.dedup();
        Ok(Basis {
            sites,
            kind: BasisKind::Custom,
            states,
            frozen_count: 0,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Raw configurations in ascending order.
    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn state(&self, index: usize) -> BasisState {
        BasisState {
            bits: self.states[index],
            sites: self.sites as u8,
        }
    }

    /// Number of configurations removed as frozen (effective bases only).
    pub fn frozen_count(&self) -> usize {
        self.frozen_count
    }

    #[inline]
    pub fn index_of(&self, bits: u32) -> Option<usize> {
        match self.kind {
            BasisKind::Full => ((bits as usize) < self.states.len()).then_some(bits as usize),
            _ => self.states.binary_search(&bits).ok(),
        }
    }

    pub fn contains(&self, bits: u32) -> bool {
        self.index_of(bits).is_some()
    }

    /// True iff the set is mapped onto itself by translation and inversion.
    pub fn is_translation_inversion_closed(&self) -> bool {
        self.states.iter().all(|&s| {
            self.contains(translate(s, self.sites)) && self.contains(reflect(s, self.sites))
        })
    }
}

/// Non-frozen configurations of `rule` on `sites` sites.
pub fn effective_basis(sites: usize, rule: &ConstraintRule) -> Result<Basis> {
    Basis::effective(sites, rule)
}

/// Keep only configurations satisfying the Rydberg blockade.
pub fn rydberg_filter(basis: &Basis) -> Basis {
    let sites = basis.sites;
    Basis {
        sites,
        kind: BasisKind::Rydberg,
        states: basis
            .states
            .iter()
            .copied()
            .filter(|&s| is_rydberg_allowed(s, sites))
            .collect(),
        frozen_count: 0,
    }
}

/// Write `index,bitstring,value,frozen` rows. The bitstring lists site
/// `L-1` first, matching the binary representation of `value`. The frozen
/// flag is evaluated against `rule` when given, otherwise written as 0.
pub fn write_basis_csv<W: Write>(
    basis: &Basis,
    rule: Option<&ConstraintRule>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "bitstring", "value", "frozen"])?;
    for (i, &s) in basis.states.iter().enumerate() {
        let state = basis.state(i);
        let frozen = rule.is_some_and(|r| r.is_frozen_bits(s, basis.sites));
        w.write_record([
            i.to_string(),
            state.to_binary(),
            s.to_string(),
            u8::from(frozen).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<basis csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ket(s: &str) -> BasisState {
        BasisState::from_ket(s).unwrap()
    }

    #[test]
    fn ket_round_trip_and_bit_order() {
        let s = ket("1100000");
        assert_eq!(s.bits(), 3);
        assert_eq!(s.to_ket(), "1100000");
        assert_eq!(s.to_binary(), "0000011");
        assert_eq!(format!("{s}"), "|1100000⟩");
    }

    #[test]
    fn population_examples() {
        assert_eq!(neighbor_population(ket("00000"), 0).unwrap(), 0);
        assert_eq!(neighbor_population(ket("10000"), 0).unwrap(), 0);
        assert_eq!(neighbor_population(ket("10000"), 2).unwrap(), 1);
        assert_eq!(neighbor_population(ket("11011"), 2).unwrap(), 4);
    }

    #[test]
    fn population_rejects_bad_input() {
        assert!(neighbor_population(ket("00000"), 5).is_err());
        assert!(neighbor_population(ket("0000"), 0).is_err());
    }

    #[test]
    fn masks_match_scalar_population() {
        for sites in 5..=9 {
            for bits in 0..1u32 << sites {
                let eq = population_masks(bits, sites);
                let s = BasisState::new(bits, sites).unwrap();
                for i in 0..sites {
                    let k = neighbor_population(s, i).unwrap();
                    for (kk, m) in eq.iter().enumerate() {
                        assert_eq!(m >> i & 1 == 1, kk == k);
                    }
                }
            }
        }
    }

    #[test]
    fn flippable_examples() {
        let n0 = ConstraintRule::levels(&[0]).unwrap();
        let all: Vec<_> = (0..5).map(|i| (i, 1.0)).collect();
        assert_eq!(flippable_sites(ket("00000"), &n0).unwrap(), all);
        assert_eq!(flippable_sites(ket("10000"), &n0).unwrap(), vec![(0, 1.0)]);
        let qgl = ConstraintRule::levels(&[2, 3]).unwrap();
        assert!(flippable_sites(ket("11111"), &qgl).unwrap().is_empty());
    }

    #[test]
    fn frozen_examples() {
        let n1 = ConstraintRule::levels(&[1]).unwrap();
        assert!(is_frozen(BasisState::vacuum(8).unwrap(), &n1).unwrap());
        let n0 = ConstraintRule::levels(&[0]).unwrap();
        assert!(!is_frozen(ket("00000"), &n0).unwrap());
        let n3 = ConstraintRule::levels(&[3]).unwrap();
        let active = (0..32u32).filter(|&s| !n3.is_frozen_bits(s, 5)).count();
        assert_eq!(active, 15);
    }

    #[test]
    fn effective_dimensions() {
        let n0 = ConstraintRule::levels(&[0]).unwrap();
        let b = effective_basis(5, &n0).unwrap();
        assert_eq!(b.len(), 6);
        assert_eq!(b.frozen_count(), 26);
        let qgl = ConstraintRule::levels(&[2, 3]).unwrap();
        assert_eq!(effective_basis(12, &qgl).unwrap().len(), 4064);
        let pert = ConstraintRule::new([1.0, 0.09, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(effective_basis(8, &pert).unwrap().len(), 193);
    }

    #[test]
    fn effective_index_is_inverse() {
        let rule = ConstraintRule::levels(&[1]).unwrap();
        let b = effective_basis(9, &rule).unwrap();
        assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        for (i, &s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
        }
        assert_eq!(b.index_of(0), None);
    }

    #[test]
    fn rydberg_filter_examples() {
        let full = Basis::full(7).unwrap();
        let ryd = rydberg_filter(&full);
        assert_eq!(ryd.len(), 15);
        assert!(!ryd.contains(ket("1100000").bits()));
        let five = rydberg_filter(&Basis::full(5).unwrap());
        assert!(five.contains(0));
        assert!(ryd.is_translation_inversion_closed());
    }

    #[test]
    fn rejects_short_and_long_chains() {
        assert!(matches!(Basis::full(4), Err(Error::Argument(_))));
        assert!(matches!(Basis::full(27), Err(Error::Resource { .. })));
        assert!(ConstraintRule::new([0.0; 5]).is_err());
        assert!(ConstraintRule::levels(&[5]).is_err());
    }

    #[test]
    fn symmetry_maps_are_involutions_or_cycles() {
        let sites = 7;
        for bits in 0..1u32 << sites {
            assert_eq!(reflect(reflect(bits, sites), sites), bits);
            assert_eq!(complement(complement(bits, sites), sites), bits);
            let mut t = bits;
            for _ in 0..sites {
                t = translate(t, sites);
            }
            assert_eq!(t, bits);
        }
        assert_eq!(translate(ket("1000000").bits(), 7), ket("0100000").bits());
        assert_eq!(reflect(ket("1100000").bits(), 7), ket("0000011").bits());
    }

    #[test]
    fn csv_dump_columns() {
        let rule = ConstraintRule::levels(&[0]).unwrap();
        let b = Basis::full(5).unwrap();
        let mut buf = Vec::new();
        write_basis_csv(&b, Some(&rule), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "index,bitstring,value,frozen");
        assert_eq!(lines[1], "0,00000,0,0");
        assert_eq!(lines[2], "1,00001,1,0");
        assert_eq!(lines[4], "3,00011,3,1");
    }
}
