//! Krylov fragments as connected components of the nonzero-element graph of
//! a Hamiltonian, and their scaling with chain length.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, SparseOperator};
use crate::symmetry::{build_sector, project_hamiltonian, SectorBasis, SectorSpec};

/// Disjoint-set forest with union by size and path halving.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let grand = self.parent[self.parent[x] as usize];
            self.parent[x] = grand;
            x = grand as usize;
        }
        x
    }

    /// Merge the sets of `a` and `b`; returns false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Partition of a basis into dynamically disconnected components.
///
/// Components are ordered by descending size, ties broken by smallest
/// member index; members are ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KrylovDecomposition {
    components: Vec<Vec<usize>>,
    labels: Vec<usize>,
}

impl KrylovDecomposition {
    /// `N_L`: number of components, isolated states included.
    pub fn count(&self) -> usize {
        self.components.len()
    }

    /// `d_L`: size of the largest component.
    pub fn largest(&self) -> usize {
        self.components.first().map_or(0, Vec::len)
    }

    /// `D_L`: total dimension.
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Components with more than one state.
    pub fn nontrivial_count(&self) -> usize {
        self.components.iter().take_while(|c| c.len() > 1).count()
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component(&self, id: usize) -> Option<&[usize]> {
        self.components.get(id).map(Vec::as_slice)
    }

    /// Component id of every basis index.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.components.iter().map(Vec::len).collect()
    }
}

/// Connected components of the graph with an edge wherever `H_ab != 0`.
pub fn decompose(h: &SparseOperator) -> KrylovDecomposition {
    let n = h.dim();
    let mut uf = UnionFind::new(n);
    for (r, c, v) in h.triplets() {
        if v != 0.0 && r != c {
            uf.union(r, c);
        }
    }
    let mut root_to_component = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let root = uf.find(i);
        if root_to_component[root] == usize::MAX {
            root_to_component[root] = components.len();
            components.push(Vec::new());
        }
        components[root_to_component[root]].push(i);
    }
    // Members are ascending and components were opened in order of their
    // smallest member, so a stable sort by size gives the canonical order.
    components.sort_by_key(|c| std::cmp::Reverse(c.len()));
    let mut labels = vec![0; n];
    for (id, comp) in components.iter().enumerate() {
        for &i in comp {
            labels[i] = id;
        }
    }
    KrylovDecomposition { components, labels }
}

/// Restriction of `h` to component `id`, reindexed densely in member order.
pub fn fragment_hamiltonian(
    h: &SparseOperator,
    kd: &KrylovDecomposition,
    id: usize,
) -> Result<SparseOperator> {
    let members = kd.component(id).ok_or_else(|| {
        Error::Argument(format!(
            "fragment id {id} out of range (have {})",
            kd.count()
        ))
    })?;
    Ok(h.restrict(members))
}

/// One row of a fragmentation scaling table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub sites: usize,
    /// Number of Krylov subspaces, frozen states included.
    pub count: usize,
    /// Largest subspace dimension.
    pub largest: usize,
    /// Sector dimension.
    pub dim: usize,
    pub ratio: f64,
    pub nontrivial: usize,
}

impl ScalingRecord {
    pub fn from_decomposition(sites: usize, kd: &KrylovDecomposition) -> Self {
        ScalingRecord {
            sites,
            count: kd.count(),
            largest: kd.largest(),
            dim: kd.dim(),
            ratio: kd.largest() as f64 / kd.dim() as f64,
            nontrivial: kd.nontrivial_count(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FragmentationScaling {
    pub records: Vec<ScalingRecord>,
}

impl FragmentationScaling {
    /// CSV with columns `L,N_L,d_L,D_L,ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["L", "N_L", "d_L", "D_L", "ratio"])?;
        for r in &self.records {
            w.write_record([
                r.sites.to_string(),
                r.count.to_string(),
                r.largest.to_string(),
                r.dim.to_string(),
                format!("{:.6}", r.ratio),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<scaling csv>", e))?;
        Ok(())
    }
}

/// Sector basis, projected Hamiltonian and decomposition for one chain
/// length. Sectors are built on the model's full configuration space, so
/// frozen orbits appear as isolated components.
pub struct SectorFragments {
    pub sector: SectorBasis,
    pub hamiltonian: SparseOperator,
    pub decomposition: KrylovDecomposition,
}

pub fn sector_fragments(model: &ModelSpec, spec: SectorSpec, sites: usize) -> Result<SectorFragments> {
    let basis = model.full_basis(sites)?;
    let sector = build_sector(&basis, spec)?;
    let hamiltonian = project_hamiltonian(&model.on_chain(sites), &sector)?;
    let decomposition = decompose(&hamiltonian);
    Ok(SectorFragments {
        sector,
        hamiltonian,
        decomposition,
    })
}

/// `(N_L, d_L, D_L)` for each chain length.
pub fn scaling_table(
    model: &ModelSpec,
    spec: SectorSpec,
    sites: impl IntoIterator<Item = usize>,
) -> Result<FragmentationScaling> {
    let mut records = Vec::new();
    for l in sites {
        let frag = sector_fragments(model, spec, l)?;
        records.push(ScalingRecord::from_decomposition(l, &frag.decomposition));
    }
    Ok(FragmentationScaling { records })
}

/// JSON manifest: component id, size and representative configurations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FragmentManifest {
    pub model: String,
    pub sites: usize,
    pub sector: String,
    pub fragments: Vec<FragmentEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FragmentEntry {
    pub id: usize,
    pub size: usize,
    /// Orbit representatives as kets, site 0 first.
    pub members: Vec<String>,
}

impl FragmentManifest {
    pub fn new(model: &ModelSpec, frag: &SectorFragments) -> Self {
        let sites = frag.sector.sites();
        let reps: Vec<u32> = frag.sector.representatives().collect();
        let fragments = frag
            .decomposition
            .components()
            .iter()
            .enumerate()
            .map(|(id, comp)| FragmentEntry {
                id,
                size: comp.len(),
                members: comp
                    .iter()
                    .map(|&i| {
                        crate::basis::BasisState::new(reps[i], sites)
                            .expect("representative in range")
                            .to_ket()
                    })
                    .collect(),
            })
            .collect();
        FragmentManifest {
            model: model.label.clone(),
            sites,
            sector: frag.sector.descriptor(),
            fragments,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FragmentationKind {
    Strong,
    Weak,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Growth {
    Exponential,
    Polynomial,
}

/// Least-squares line with coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LineFit {
        slope,
        intercept,
        r2,
    }
}

/// Minimum R² of the exponential fit of `N_L`.
pub const EXPONENTIAL_R2: f64 = 0.98;
/// Minimum ratio of the log-growth rate of `N_L` to that of `D_L` for the
/// growth to count as exponential.
pub const RELATIVE_RATE: f64 = 0.5;
/// Number of largest chain lengths used in the ratio trend test.
pub const TREND_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: FragmentationKind,
    pub growth: Growth,
    /// Fit of `ln N_L` against `L`.
    pub exponential_fit: LineFit,
    /// Fit of `ln N_L` against `ln L`.
    pub polynomial_fit: LineFit,
    /// Fit of `ln D_L` against `L`.
    pub dimension_fit: LineFit,
    /// `d_L / D_L` strictly decreasing over the largest chain lengths.
    pub ratio_decreasing: bool,
}

/// Strong, weak or no fragmentation, from at least five chain lengths.
///
/// * none: every length has at most one component larger than one state;
/// * strong: `d_L/D_L` strictly decreasing over the [`TREND_POINTS`] largest
///   lengths and `N_L` growing exponentially;
/// * weak: anything else.
///
/// Growth counts as exponential when the fit of `ln N_L` against `L` has
/// R² ≥ [`EXPONENTIAL_R2`], beats the power-law fit, and its slope is at
/// least [`RELATIVE_RATE`] times the slope of `ln D_L`.
pub fn classify(scaling: &FragmentationScaling) -> Result<Classification> {
    let mut recs = scaling.records.clone();
    if recs.len() < TREND_POINTS {
        return Err(Error::Argument(format!(
            "classification needs at least {TREND_POINTS} chain lengths, got {}",
            recs.len()
        )));
    }
    recs.sort_by_key(|r| r.sites);
    let l: Vec<f64> = recs.iter().map(|r| r.sites as f64).collect();
    let ln_l: Vec<f64> = l.iter().map(|x| x.ln()).collect();
    let ln_n: Vec<f64> = recs.iter().map(|r| (r.count as f64).ln()).collect();
    let ln_d: Vec<f64> = recs.iter().map(|r| (r.dim as f64).ln()).collect();
    let exponential_fit = fit_line(&l, &ln_n);
    let polynomial_fit = fit_line(&ln_l, &ln_n);
    let dimension_fit = fit_line(&l, &ln_d);
    let exponential = exponential_fit.r2 >= EXPONENTIAL_R2
        && exponential_fit.r2 >= polynomial_fit.r2
        && exponential_fit.slope > 0.0
        && exponential_fit.slope >= RELATIVE_RATE * dimension_fit.slope;
    let tail = &recs[recs.len() - TREND_POINTS..];
    let ratio_decreasing = tail.windows(2).all(|w| w[1].ratio < w[0].ratio);
    let kind = if recs.iter().all(|r| r.nontrivial <= 1) {
        FragmentationKind::None
    } else if ratio_decreasing && exponential {
        FragmentationKind::Strong
    } else {
        FragmentationKind::Weak
    };
    Ok(Classification {
        kind,
        growth: if exponential {
            Growth::Exponential
        } else {
            Growth::Polynomial
        },
        exponential_fit,
        polynomial_fit,
        dimension_fit,
        ratio_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize, cut: usize) -> SparseOperator {
        let rows = (0..n)
            .map(|i| {
                let mut r = Vec::new();
                if i > 0 && i != cut {
                    r.push(((i - 1) as u32, 1.0));
                }
                if i + 1 < n && i + 1 != cut {
                    r.push(((i + 1) as u32, 1.0));
                }
                r
            })
            .collect();
        SparseOperator::from_rows(n, rows, "path")
    }

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(6);
        assert!(uf.union(0, 1));
        assert!(uf.union(1, 2));
        assert!(!uf.union(0, 2));
        assert_eq!(uf.find(0), uf.find(2));
        assert_ne!(uf.find(0), uf.find(3));
    }

    #[test]
    fn components_are_ordered() {
        // 0-1-2 | 3-4-5-6, plus isolated 7
        let mut h = path_graph(7, 3);
        let mut rows: Vec<Vec<(u32, f64)>> = (0..7).map(|r| h.row(r).map(|(c, v)| (c as u32, v)).collect()).collect();
        rows.push(Vec::new());
        h = SparseOperator::from_rows(8, rows, "p");
        let kd = decompose(&h);
        assert_eq!(kd.sizes(), vec![4, 3, 1]);
        assert_eq!(kd.component(0).unwrap(), &[3, 4, 5, 6]);
        assert_eq!(kd.component(2).unwrap(), &[7]);
        assert_eq!(kd.count(), 3);
        assert_eq!(kd.largest(), 4);
        assert_eq!(kd.dim(), 8);
        assert_eq!(kd.nontrivial_count(), 2);
        let block = fragment_hamiltonian(&h, &kd, 2).unwrap();
        assert_eq!(block.dim(), 1);
        assert_eq!(block.nnz(), 0);
        assert!(fragment_hamiltonian(&h, &kd, 3).is_err());
    }

    #[test]
    fn ties_break_on_smallest_member() {
        let kd = decompose(&path_graph(6, 3));
        assert_eq!(kd.component(0).unwrap(), &[0, 1, 2]);
        assert_eq!(kd.component(1).unwrap(), &[3, 4, 5]);
    }

    #[test]
    fn table_two_first_column() {
        let n1 = ModelSpec::level(1).unwrap();
        let t = scaling_table(&n1, SectorSpec::symmetric(), [10]).unwrap();
        let r = t.records[0];
        assert_eq!((r.count, r.largest, r.dim), (30, 16, 78));
        let n2 = ModelSpec::level(2).unwrap();
        let t = scaling_table(&n2, SectorSpec::fully_symmetric(), [10]).unwrap();
        let r = t.records[0];
        assert_eq!((r.count, r.largest, r.dim), (8, 14, 44));
    }

    #[test]
    fn classify_needs_five_points() {
        let s = FragmentationScaling {
            records: vec![
                ScalingRecord {
                    sites: 10,
                    count: 1,
                    largest: 1,
                    dim: 1,
                    ratio: 1.0,
                    nontrivial: 0
                };
                4
            ],
        };
        assert!(matches!(classify(&s), Err(Error::Argument(_))));
    }

    #[test]
    fn line_fit_exact() {
        let f = fit_line(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let s = FragmentationScaling {
            records: vec![ScalingRecord {
                sites: 10,
                count: 30,
                largest: 16,
                dim: 78,
                ratio: 16.0 / 78.0,
                nontrivial: 3,
            }],
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "L,N_L,d_L,D_L,ratio\n10,30,16,78,0.205128\n");
    }
}
