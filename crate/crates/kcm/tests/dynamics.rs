mod common;

use common::*;
use kcm::dynamics::{build_scar_state, evolve, quench, uniform_time_grid};
use kcm::models::build_matrix;
use kcm::observables::StateVector;
use kcm::spectral::diagonalize;
use kcm::ModelSpec;
use num_complex::Complex64;

/// Nonzero entries of a dense matrix, row by row.
fn sparse_rows(m: &Dense) -> Vec<Vec<(usize, f64)>> {
    m.iter()
        .map(|row| row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, &v)| (j, v)).collect())
        .collect()
}

fn apply(h: &[Vec<(usize, f64)>], v: &[Complex64]) -> Vec<Complex64> {
    h.iter().map(|row| row.iter().map(|&(j, x)| v[j] * x).sum()).collect()
}

/// Classical RK4 for `dψ/dt = −iHψ` on all `2^L` configurations.
fn rk4(h: &[Vec<(usize, f64)>], psi: &[Complex64], t: f64, steps: usize) -> Vec<Complex64> {
    let dt = t / steps as f64;
    let mi = Complex64::new(0.0, -1.0);
    let deriv = |v: &[Complex64]| -> Vec<Complex64> { apply(h, v).into_iter().map(|x| mi * x).collect() };
    let axpy = |a: &[Complex64], b: &[Complex64], s: f64| -> Vec<Complex64> {
        a.iter().zip(b).map(|(x, y)| x + y * s).collect()
    };
    let mut v = psi.to_vec();
    for _ in 0..steps {
        let k1 = deriv(&v);
        let k2 = deriv(&axpy(&v, &k1, dt / 2.0));
        let k3 = deriv(&axpy(&v, &k2, dt / 2.0));
        let k4 = deriv(&axpy(&v, &k3, dt));
        for i in 0..v.len() {
            v[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
    v
}

fn energy(h: &[Vec<(usize, f64)>], psi: &StateVector) -> f64 {
    let hv = apply(h, psi.amplitudes());
    psi.amplitudes().iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum()
}

fn cases() -> Vec<(ModelSpec, usize, usize)> {
    vec![
        (ModelSpec::level(0).unwrap(), 2, 5),
        (ModelSpec::level(0).unwrap(), 10, 1),
        (ModelSpec::level(0).unwrap(), 4, 2),
        (ModelSpec::pert_ppxpp(0.09).unwrap(), 4, 2),
        (ModelSpec::pert_ppxpp(0.09).unwrap(), 2, 5),
        (ModelSpec::qgl(), 6, 1),
    ]
}

#[test]
fn spectral_return_amplitude_matches_rk4() {
    for (model, k, m) in cases() {
        let l = k * m;
        let psi = build_scar_state(k, m).unwrap();
        let basis = model.effective_basis(l).unwrap();
        let sp = diagonalize(&build_matrix(&model, &basis).unwrap(), true).unwrap();
        let times = uniform_time_grid(0.0, 4.0, 9);
        let qr = quench(&sp, &basis, &psi, &times).unwrap();
        let h = sparse_rows(&projector_hamiltonian(model.weights(), l));
        for (i, &t) in times.iter().enumerate() {
            let reference = rk4(&h, psi.amplitudes(), t, 400 * (1 + t as usize));
            let overlap: Complex64 = psi.amplitudes().iter().zip(&reference).map(|(a, b)| a.conj() * b).sum();
            let (re, im) = qr.amplitude[i];
            assert!(
                (overlap - Complex64::new(re, im)).norm() < 1e-6,
                "{model} K={k} m={m} t={t}: {overlap} vs {re}+{im}i"
            );
        }
    }
}

#[test]
fn evolution_conserves_norm_and_energy() {
    for (model, k, m) in cases() {
        let l = k * m;
        let psi = build_scar_state(k, m).unwrap();
        let basis = model.effective_basis(l).unwrap();
        let sp = diagonalize(&build_matrix(&model, &basis).unwrap(), true).unwrap();
        let h = sparse_rows(&projector_hamiltonian(model.weights(), l));
        let e0 = energy(&h, &psi);
        for t in [0.0, 0.7, 3.1, 25.0, 100.0] {
            let psi_t = evolve(&sp, &basis, &psi, t).unwrap();
            assert!((psi_t.norm() - 1.0).abs() < 1e-10, "{model} t={t}");
            assert!((energy(&h, &psi_t) - e0).abs() < 1e-10, "{model} t={t}");
        }
    }
}

#[test]
fn evolved_state_matches_rk4_componentwise() {
    let model = ModelSpec::level(0).unwrap();
    let psi = build_scar_state(4, 2).unwrap();
    let basis = model.effective_basis(8).unwrap();
    let sp = diagonalize(&build_matrix(&model, &basis).unwrap(), true).unwrap();
    let h = sparse_rows(&projector_hamiltonian(model.weights(), 8));
    let exact = evolve(&sp, &basis, &psi, 2.5).unwrap();
    let reference = rk4(&h, psi.amplitudes(), 2.5, 2000);
    let worst = exact
        .amplitudes()
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn scar_states_are_normalized_products_of_cells() {
    for (k, m) in [(2, 3), (4, 2), (6, 2), (8, 1), (10, 1)] {
        let psi = build_scar_state(k, m).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let support = psi.amplitudes().iter().filter(|a| a.norm() > 0.0).count();
        assert_eq!(support, (k / 2).pow(m as u32));
        if m > 1 {
            let cell = build_scar_state(k, 1).unwrap();
            let rest = build_scar_state(k, m - 1).unwrap();
            let product = cell.tensor(&rest).unwrap();
            let diff = max_abs_diff(
                &product.amplitudes().iter().map(|a| a.re).collect::<Vec<_>>(),
                &psi.amplitudes().iter().map(|a| a.re).collect::<Vec<_>>(),
            );
            assert!(diff < 1e-14, "K={k} m={m}");
        }
    }
    assert!(build_scar_state(3, 2).is_err());
    assert!(build_scar_state(4, 0).is_err());
}
