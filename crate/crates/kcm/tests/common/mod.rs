#![allow(clippy::needless_range_loop)]

//! Oracles shared by the integration tests: literal operator algebra on
//! dense matrices and state vectors, independent of the crate's fast paths.
#![allow(dead_code)]

use kcm::observables::StateVector;
use kcm::ModelSpec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ra, ca, rb, cb) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; ca * cb]; ra * rb];
    for i in 0..ra {
        for j in 0..ca {
            if a[i][j] == 0.0 {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn identity2() -> Dense {
    vec![vec![1.0, 0.0], vec![0.0, 1.0]]
}

pub fn sigma_x() -> Dense {
    vec![vec![0.0, 1.0], vec![1.0, 0.0]]
}

/// `n = |1⟩⟨1|`.
pub fn number() -> Dense {
    vec![vec![0.0, 0.0], vec![0.0, 1.0]]
}

pub fn hole() -> Dense {
    vec![vec![1.0, 0.0], vec![0.0, 0.0]]
}

/// `⊗_j ops[j]` with site 0 as the least significant bit of the index.
pub fn site_product(ops: &[Dense]) -> Dense {
    ops.iter().rev().skip(1).fold(ops.last().unwrap().clone(), |acc, op| kron(&acc, op))
}

pub fn add_scaled(acc: &mut Dense, m: &Dense, w: f64) {
    for (ra, rm) in acc.iter_mut().zip(m) {
        for (a, x) in ra.iter_mut().zip(rm) {
            *a += w * x;
        }
    }
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let m = b[0].len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for (k, &aik) in a[i].iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// `H = Σ_i σ^x_i Σ_k w_k N_i^(k)`, each `N_i^(k)` spelled out as the sum over
/// `k`-subsets of the four neighbours of `Π n_j Π (1 − n_j)`.
pub fn projector_hamiltonian(weights: [f64; 5], sites: usize) -> Dense {
    let dim = 1usize << sites;
    let mut h = vec![vec![0.0; dim]; dim];
    for i in 0..sites {
        let neighbours = [
            (i + sites - 2) % sites,
            (i + sites - 1) % sites,
            (i + 1) % sites,
            (i + 2) % sites,
        ];
        for subset in 0u32..16 {
            let k = subset.count_ones() as usize;
            if weights[k] == 0.0 {
                continue;
            }
            let mut ops = vec![identity2(); sites];
            ops[i] = sigma_x();
            for (b, &j) in neighbours.iter().enumerate() {
                ops[j] = if subset >> b & 1 == 1 { number() } else { hole() };
            }
            add_scaled(&mut h, &site_product(&ops), weights[k]);
        }
    }
    h
}

/// Projector onto Rydberg-blockaded configurations, `Π_i (1 − n_i n_{i+1})`.
pub fn rydberg_projector(sites: usize) -> Dense {
    let dim = 1usize << sites;
    let mut p = vec![vec![0.0; dim]; dim];
    for (s, row) in p.iter_mut().enumerate() {
        let blocked = (0..sites).all(|i| !(s >> i & 1 == 1 && s >> ((i + 1) % sites) & 1 == 1));
        row[s] = if blocked { 1.0 } else { 0.0 };
    }
    p
}

/// Translation `T|s_0 … s_{L−1}⟩ = |s_{L−1} s_0 …⟩` as a permutation matrix.
pub fn translation(sites: usize) -> Dense {
    let dim = 1usize << sites;
    let mut t = vec![vec![0.0; dim]; dim];
    for s in 0..dim {
        let image = ((s << 1) | (s >> (sites - 1))) & (dim - 1);
        t[image][s] = 1.0;
    }
    t
}

pub fn complex_gaussian_state(sites: usize, rng: &mut impl Rng) -> StateVector {
    let amps: Vec<Complex64> = (0..1usize << sites)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            Complex64::new(a, b)
        })
        .collect();
    StateVector::normalized(sites, amps).unwrap()
}

pub fn real_random_state(sites: usize, rng: &mut impl Rng) -> StateVector {
    let amps: Vec<Complex64> = (0..1usize << sites)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, 0.0))
        .collect();
    StateVector::normalized(sites, amps).unwrap()
}

type Gate2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli(label: u8) -> Gate2 {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    match label {
        0 => [[o, z], [z, o]],
        1 => [[z, o], [o, z]],
        2 => [[z, -i], [i, z]],
        3 => [[o, z], [z, -o]],
        _ => unreachable!(),
    }
}

pub fn hadamard() -> Gate2 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]
}

pub fn phase_gate() -> Gate2 {
    [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]]
}

pub fn apply_one(amps: &mut [Complex64], site: usize, g: &Gate2) {
    let bit = 1usize << site;
    for s in 0..amps.len() {
        if s & bit == 0 {
            let (a0, a1) = (amps[s], amps[s | bit]);
            amps[s] = g[0][0] * a0 + g[0][1] * a1;
            amps[s | bit] = g[1][0] * a0 + g[1][1] * a1;
        }
    }
}

pub fn apply_cnot(amps: &mut [Complex64], control: usize, target: usize) {
    let (cb, tb) = (1usize << control, 1usize << target);
    for s in 0..amps.len() {
        if s & cb != 0 && s & tb == 0 {
            amps.swap(s, s | tb);
        }
    }
}

/// `depth` layers of random H, S and CNOT gates.
pub fn random_clifford(amps: &mut [Complex64], sites: usize, depth: usize, rng: &mut impl Rng) {
    for _ in 0..depth {
        for q in 0..sites {
            let kinds = if sites > 1 { 3 } else { 2 };
            match rng.random_range(0..kinds) {
                0 => apply_one(amps, q, &hadamard()),
                1 => apply_one(amps, q, &phase_gate()),
                _ => {
                    let t = (q + rng.random_range(1..sites)) % sites;
                    apply_cnot(amps, q, t);
                }
            }
        }
    }
}

/// `⟨ψ|P|ψ⟩` for the Pauli string `labels[j] ∈ {I, X, Y, Z}` on site `j`.
pub fn pauli_expectation(psi: &StateVector, labels: &[u8]) -> Complex64 {
    let mut phi = psi.amplitudes().to_vec();
    for (site, &l) in labels.iter().enumerate() {
        if l != 0 {
            apply_one(&mut phi, site, &pauli(l));
        }
    }
    psi.amplitudes().iter().zip(&phi).map(|(a, b)| a.conj() * b).sum()
}

/// `|⟨P⟩|²` for all `4^L` strings, indexed `x·2^L + z` with `Y ↔ (x, z) = (1, 1)`.
pub fn brute_pauli_spectrum(psi: &StateVector) -> Vec<f64> {
    let sites = psi.sites();
    let n = 1usize << sites;
    let mut out = vec![0.0; n * n];
    for code in 0..n * n {
        let (x, z) = (code / n, code % n);
        let labels: Vec<u8> = (0..sites)
            .map(|j| match (x >> j & 1, z >> j & 1) {
                (0, 0) => 0,
                (1, 0) => 1,
                (1, 1) => 2,
                _ => 3,
            })
            .collect();
        let e = pauli_expectation(psi, &labels);
        assert!(e.im.abs() < 1e-12, "Pauli expectation must be real");
        out[code] = e.norm_sqr();
    }
    out
}

pub fn brute_sre(psi: &StateVector) -> f64 {
    let n = (1usize << psi.sites()) as f64;
    let s: f64 = brute_pauli_spectrum(psi).iter().map(|p| p * p).sum();
    -(s / n).log2()
}

/// Symmetric dense eigenvalues via faer, ascending.
pub fn eigenvalues(m: &Dense) -> Vec<f64> {
    let n = m.len();
    let mat = faer::Mat::from_fn(n, n, |i, j| m[i][j]);
    let mut v = mat.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    v.sort_by(f64::total_cmp);
    v
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Spearman rank correlation.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut k = 0;
        while k < idx.len() {
            let mut end = k;
            while end + 1 < idx.len() && v[idx[end + 1]] == v[idx[k]] {
                end += 1;
            }
            let avg = (k + end) as f64 / 2.0;
            for &i in &idx[k..=end] {
                r[i] = avg;
            }
            k = end + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Every canonical family plus a generic weight set.
pub fn models() -> Vec<ModelSpec> {
    let mut v: Vec<ModelSpec> = (0..=4).map(|k| ModelSpec::level(k).unwrap()).collect();
    v.extend([
        ModelSpec::qgl(),
        ModelSpec::pert_ppxpp(0.09).unwrap(),
        ModelSpec::htot(),
        ModelSpec::new("mixed", [0.3, -1.0, 0.0, 2.5, 0.7], false).unwrap(),
    ]);
    v
}

pub fn dense_of(h: &kcm::SparseOperator) -> Dense {
    let m = h.to_dense();
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Eigenvalues of `H` on the zero-momentum subspace: `H + λ(1 − P₀)` with
/// the literal projector `P₀ = L⁻¹ Σ_n Tⁿ` pushes everything else above `λ`.
pub fn zero_momentum_spectrum(model: &ModelSpec, sites: usize) -> Vec<f64> {
    const SHIFT: f64 = 1000.0;
    let dim = 1usize << sites;
    let t = translation(sites);
    let mut power: Dense = (0..dim).map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut p0 = vec![vec![0.0; dim]; dim];
    for _ in 0..sites {
        add_scaled(&mut p0, &power, 1.0 / sites as f64);
        power = matmul(&t, &power);
    }
    let mut m = projector_hamiltonian(model.weights(), sites);
    for i in 0..dim {
        m[i][i] += SHIFT;
    }
    add_scaled(&mut m, &p0, -SHIFT);
    eigenvalues(&m).into_iter().filter(|&e| e < SHIFT / 2.0).collect()
}

