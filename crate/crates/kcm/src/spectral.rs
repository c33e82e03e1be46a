//! Dense diagonalization and level-statistics diagnostics.

use std::f64::consts::PI;

use faer::linalg::solvers::SolveLstsqCore;
use faer::{Conj, Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::SparseOperator;

/// Largest block handed to the dense eigensolver by default.
pub const DENSE_CAP: usize = 20_000;
/// Mean ⟨r⟩ for uncorrelated (Poisson) levels, `2 ln 2 − 1`.
pub const R_POISSON: f64 = 0.3863;
/// Mean ⟨r⟩ for the Gaussian orthogonal ensemble.
pub const R_GOE: f64 = 0.5307;
/// Fit degree of the integrated density of states.
pub const UNFOLD_DEGREE: usize = 15;
/// Fewest levels a window may hold before the central fallback is used.
pub const MIN_WINDOW_LEVELS: usize = 200;
/// Relative tolerance, in units of spectral width, below which two levels
/// count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Where a spectrum came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub sites: usize,
    pub sector: String,
    pub fragment: Option<usize>,
}

/// Ascending eigenvalues with optional eigenvectors stored as columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Mat<f64>>,
    pub provenance: Provenance,
}

impl Spectrum {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Spectrum {
            eigenvalues,
            eigenvectors: None,
            provenance: Provenance::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Eigenvector `n` as an owned vector.
    pub fn vector(&self, n: usize) -> Option<Vec<f64>> {
        let v = self.eigenvectors.as_ref()?;
        (n < v.ncols()).then(|| v.col(n).iter().copied().collect())
    }

    /// Largest deviation of `VᵀV` from the identity.
    pub fn gram_deviation(&self) -> Option<f64> {
        let v = self.eigenvectors.as_ref()?;
        let g = v.transpose() * v;
        let mut worst = 0.0f64;
        for j in 0..g.ncols() {
            for i in 0..g.nrows() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        Some(worst)
    }
}

/// Full eigendecomposition of a real symmetric operator.
pub fn diagonalize(h: &SparseOperator, want_vectors: bool) -> Result<Spectrum> {
    diagonalize_capped(h, want_vectors, DENSE_CAP)
}

pub fn diagonalize_capped(h: &SparseOperator, want_vectors: bool, cap: usize) -> Result<Spectrum> {
    let n = h.dim();
    if n > cap {
        return Err(Error::Resource {
            what: "dense diagonalization dimension",
            requested: n,
            cap,
        });
    }
    if n == 0 {
        return Ok(Spectrum::from_eigenvalues(Vec::new()));
    }
    let dense = h.to_dense();
    let failed = |_| Error::Numerical("symmetric eigensolver did not converge".into());
    if !want_vectors {
        let vals = dense.self_adjoint_eigenvalues(Side::Lower).map_err(failed)?;
        return Ok(Spectrum::from_eigenvalues(vals));
    }
    let evd = dense.self_adjoint_eigen(Side::Lower).map_err(failed)?;
    let eigenvalues: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let vectors = evd.U().to_owned();
    let scale = h.norm_bound().max(1.0);
    let worst = (0..n)
        .into_par_iter()
        .map(|k| {
            let v: Vec<f64> = vectors.col(k).iter().copied().collect();
            let hv = h.matvec(&v);
            hv.iter()
                .zip(&v)
                .map(|(a, b)| (a - eigenvalues[k] * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .reduce(|| 0.0, f64::max);
    if worst > 1e-9 * scale {
        return Err(Error::Numerical(format!(
            "eigenpair residual {worst:.3e} exceeds 1e-9·‖H‖"
        )));
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: Some(vectors),
        provenance: Provenance::default(),
    })
}

/// Which eigenvalue indices enter the statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowPolicy {
    /// Indices `D/10 ..= D/2 − 500`, falling back to the central 60% when
    /// that holds fewer than [`MIN_WINDOW_LEVELS`] levels.
    #[default]
    LowerMiddle,
    /// The central `fraction` of the spectrum.
    Central { fraction: f64 },
    /// Every level.
    Full,
}

/// Half-open index range `[lo, hi)` selected by a policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: usize,
    pub hi: usize,
    /// The requested window was too small and the central 60% was used.
    pub fallback: bool,
}

impl Window {
    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

fn central(d: usize, fraction: f64) -> (usize, usize) {
    let cut = ((1.0 - fraction.clamp(0.0, 1.0)) / 2.0 * d as f64).floor() as usize;
    (cut, d - cut)
}

impl WindowPolicy {
    pub fn select(&self, d: usize) -> Window {
        match *self {
            WindowPolicy::Full => Window {
                lo: 0,
                hi: d,
                fallback: false,
            },
            WindowPolicy::Central { fraction } => {
                let (lo, hi) = central(d, fraction);
                Window {
                    lo,
                    hi,
                    fallback: false,
                }
            }
            WindowPolicy::LowerMiddle => {
                let lo = d / 10;
                let hi = (d / 2).saturating_sub(500) + 1;
                if hi > lo && hi - lo >= MIN_WINDOW_LEVELS {
                    Window {
                        lo,
                        hi,
                        fallback: false,
                    }
                } else {
                    let (lo, hi) = central(d, 0.6);
                    Window {
                        lo,
                        hi,
                        fallback: true,
                    }
                }
            }
        }
    }
}

/// Polynomial in the Chebyshev basis on `[a, b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevFit {
    pub domain: (f64, f64),
    pub coefficients: Vec<f64>,
}

impl ChebyshevFit {
    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    fn map(&self, x: f64) -> f64 {
        let (a, b) = self.domain;
        if b > a {
            (2.0 * x - a - b) / (b - a)
        } else {
            0.0
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        // Clenshaw recurrence
        let t = self.map(x);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coefficients.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        self.coefficients.first().copied().unwrap_or(0.0) + t * b1 - b2
    }

    /// Least-squares fit of `y(x)` with the given degree.
    pub fn fit(x: &[f64], y: &[f64], degree: usize) -> Result<Self> {
        let cols = degree + 1;
        if x.len() < cols {
            return Err(Error::Argument(format!(
                "{} points cannot determine a degree-{degree} fit",
                x.len()
            )));
        }
        let domain = (
            x.iter().copied().fold(f64::INFINITY, f64::min),
            x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        let probe = ChebyshevFit {
            domain,
            coefficients: Vec::new(),
        };
        let mut a = Mat::<f64>::zeros(x.len(), cols);
        for (i, &xi) in x.iter().enumerate() {
            let t = probe.map(xi);
            let (mut prev, mut cur) = (1.0, t);
            a[(i, 0)] = 1.0;
            for k in 1..cols {
                a[(i, k)] = cur;
                let next = 2.0 * t * cur - prev;
                prev = cur;
                cur = next;
            }
        }
        let mut rhs = Mat::<f64>::from_fn(y.len(), 1, |i, _| y[i]);
        a.qr().solve_lstsq_in_place_with_conj(Conj::No, rhs.as_mut());
        let coefficients: Vec<f64> = (0..cols).map(|k| rhs[(k, 0)]).collect();
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("polynomial fit produced non-finite coefficients".into()));
        }
        Ok(ChebyshevFit {
            domain,
            coefficients,
        })
    }

    /// Nondecreasing on the sorted abscissae and on their midpoints.
    fn is_monotone_on(&self, x: &[f64]) -> bool {
        let mut prev = f64::NEG_INFINITY;
        for w in x.windows(2) {
            for p in [w[0], 0.5 * (w[0] + w[1])] {
                let v = self.eval(p);
                if v < prev {
                    return false;
                }
                prev = v;
            }
        }
        x.last().is_none_or(|&l| self.eval(l) >= prev)
    }
}

/// Energies mapped through the fitted integrated density of states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnfoldedSpectrum {
    pub energies: Vec<f64>,
    pub window: Window,
    pub fit: ChebyshevFit,
    /// Degree asked for; differs from `fit.degree()` when monotonicity
    /// forced a lower degree.
    pub requested_degree: usize,
}

impl UnfoldedSpectrum {
    pub fn spacings(&self) -> Vec<f64> {
        self.energies.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn mean_spacing(&self) -> f64 {
        let n = self.energies.len();
        if n < 2 {
            return f64::NAN;
        }
        (self.energies[n - 1] - self.energies[0]) / (n - 1) as f64
    }

    pub fn degree_reduced(&self) -> bool {
        self.fit.degree() < self.requested_degree
    }
}

/// Staircase unfolding over the policy window with a degree-15 fit.
pub fn unfold(energies: &[f64], policy: WindowPolicy) -> Result<UnfoldedSpectrum> {
    unfold_with_degree(energies, policy, UNFOLD_DEGREE)
}

pub fn unfold_with_degree(energies: &[f64], policy: WindowPolicy, degree: usize) -> Result<UnfoldedSpectrum> {
    let window = policy.select(energies.len());
    let x = &energies[window.lo..window.hi];
    if x.len() < 2 {
        return Err(Error::Argument(format!(
            "unfolding window holds {} levels",
            x.len()
        )));
    }
    let staircase: Vec<f64> = (1..=x.len()).map(|i| i as f64).collect();
    let mut deg = degree.min(x.len() - 1);
    let fit = loop {
        match ChebyshevFit::fit(x, &staircase, deg) {
            Ok(fit) if deg <= 1 || fit.is_monotone_on(x) => break fit,
            Err(e) if deg <= 1 || !matches!(e, Error::Numerical(_)) => return Err(e),
            _ => deg -= 1,
        }
    };
    Ok(UnfoldedSpectrum {
        energies: x.iter().map(|&e| fit.eval(e)).collect(),
        window,
        fit,
        requested_degree: degree,
    })
}

/// ⟨r⟩ with bookkeeping of excluded degenerate spacings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RStatistic {
    pub mean: f64,
    pub count: usize,
    pub degenerate: usize,
    pub window: Window,
}

/// Mean of `min(r_n, 1/r_n)` over raw energies inside the policy window.
pub fn mean_r(energies: &[f64], policy: WindowPolicy) -> Result<RStatistic> {
    if energies.len() < 3 {
        return Err(Error::Argument(format!(
            "⟨r⟩ needs at least 3 levels, got {}",
            energies.len()
        )));
    }
    let window = policy.select(energies.len());
    let e = &energies[window.lo..window.hi];
    if e.len() < 3 {
        return Err(Error::Argument(format!("⟨r⟩ window holds {} levels", e.len())));
    }
    let width = energies[energies.len() - 1] - energies[0];
    let tol = DEGENERACY_TOL * width.abs();
    let (mut sum, mut count, mut degenerate) = (0.0, 0usize, 0usize);
    for w in e.windows(3) {
        let (a, b) = (w[1] - w[0], w[2] - w[1]);
        if a.abs() <= tol || b.abs() <= tol {
            degenerate += 1;
            continue;
        }
        sum += (a / b).min(b / a);
        count += 1;
    }
    if count == 0 {
        return Err(Error::Undefined("every spacing in the window is degenerate".into()));
    }
    Ok(RStatistic {
        mean: sum / count as f64,
        count,
        degenerate,
        window,
    })
}

/// Wigner surmise for the orthogonal ensemble.
pub fn wigner_density(s: f64) -> f64 {
    PI / 2.0 * s * (-PI * s * s / 4.0).exp()
}

pub fn wigner_cdf(s: f64) -> f64 {
    1.0 - (-PI * s * s / 4.0).exp()
}

pub fn poisson_density(s: f64) -> f64 {
    (-s).exp()
}

pub fn poisson_cdf(s: f64) -> f64 {
    1.0 - (-s).exp()
}

/// Kolmogorov–Smirnov distance between samples and a reference CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Normalized spacing histogram with reference curves at the bin centres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingHistogram {
    pub centers: Vec<f64>,
    pub density: Vec<f64>,
    pub wigner: Vec<f64>,
    pub poisson: Vec<f64>,
    pub ks_wigner: f64,
    pub ks_poisson: f64,
}

impl SpacingHistogram {
    /// Rows of `s,density,wigner_dyson,poisson`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "density", "wigner_dyson", "poisson"])?;
        for i in 0..self.centers.len() {
            w.write_record([
                format!("{:.6}", self.centers[i]),
                format!("{:.8}", self.density[i]),
                format!("{:.8}", self.wigner[i]),
                format!("{:.8}", self.poisson[i]),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<histogram csv>", e))?;
        Ok(())
    }
}

/// Histogram of consecutive unfolded spacings on `[0, s_max)`.
pub fn level_spacing_histogram(us: &UnfoldedSpectrum, bins: usize, s_max: f64) -> SpacingHistogram {
    let spacings = us.spacings();
    let width = s_max / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in &spacings {
        if s >= 0.0 && s < s_max {
            counts[((s / width) as usize).min(bins - 1)] += 1;
        }
    }
    let total = spacings.len().max(1) as f64;
    let centers: Vec<f64> = (0..bins).map(|i| (i as f64 + 0.5) * width).collect();
    SpacingHistogram {
        density: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
        wigner: centers.iter().map(|&s| wigner_density(s)).collect(),
        poisson: centers.iter().map(|&s| poisson_density(s)).collect(),
        ks_wigner: ks_distance(&spacings, wigner_cdf),
        ks_poisson: ks_distance(&spacings, poisson_cdf),
        centers,
    }
}

/// `n` logarithmically spaced points on `[t_min, t_max]`.
pub fn log_time_grid(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t_min];
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn default_time_grid() -> Vec<f64> {
    log_time_grid(1e-2, 1e4, 400)
}

/// Slope, dip, ramp and plateau of a single-spectrum form factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SffSegmentation {
    pub dip_time: f64,
    pub dip_value: f64,
    /// First time after the dip where the smoothed curve reaches
    /// [`RAMP_TOP`] of the plateau.
    pub ramp_end_time: f64,
    /// Heisenberg time `2π` for unit mean spacing.
    pub plateau_time: f64,
    pub plateau_value: f64,
    /// Log-log slope of the smoothed curve between dip and ramp end.
    pub ramp_exponent: f64,
    pub has_ramp: bool,
}

/// Half-width, in grid points, of the running mean used for segmentation.
pub const SFF_SMOOTHING: usize = 12;
/// Plateau over dip ratio required for a ramp.
pub const RAMP_DEPTH: f64 = 3.0;
/// Minimum log-log ramp slope.
pub const RAMP_MIN_EXPONENT: f64 = 0.3;
/// Fraction of the plateau that ends the ramp.
pub const RAMP_TOP: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SffCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub levels: usize,
    pub segmentation: SffSegmentation,
}

impl SffCurve {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "sff"])?;
        for (t, v) in self.times.iter().zip(&self.values) {
            w.write_record([format!("{t:.6e}"), format!("{v:.10e}")])?;
        }
        w.flush().map_err(|e| Error::io("<sff csv>", e))?;
        Ok(())
    }
}

/// `|Σ_n e^{i e_n t}|² / N²` at every time of the grid.
pub fn sff_values(energies: &[f64], times: &[f64]) -> Vec<f64> {
    let n = energies.len() as f64;
    times
        .par_iter()
        .map(|&t| {
            let (c, s) = energies
                .iter()
                .fold((0.0, 0.0), |(c, s), &e| (c + (e * t).cos(), s + (e * t).sin()));
            (c * c + s * s) / (n * n)
        })
        .collect()
}

pub fn sff(us: &UnfoldedSpectrum, times: &[f64]) -> Result<SffCurve> {
    if us.energies.is_empty() {
        return Err(Error::Argument("form factor of an empty spectrum".into()));
    }
    let values = sff_values(&us.energies, times);
    let segmentation = segment_sff(times, &values);
    Ok(SffCurve {
        times: times.to_vec(),
        values,
        levels: us.energies.len(),
        segmentation,
    })
}

fn running_mean(v: &[f64], half: usize) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Segment a form factor sampled on an ascending log grid.
///
/// The plateau is the mean beyond `4·2π`; the dip is the minimum of the
/// smoothed curve before `2π`; the ramp runs from the dip until the smoothed
/// curve first reaches [`RAMP_TOP`] of the plateau.
pub fn segment_sff(times: &[f64], values: &[f64]) -> SffSegmentation {
    let plateau_time = 2.0 * PI;
    let late: Vec<f64> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= 4.0 * plateau_time)
        .map(|(_, v)| *v)
        .collect();
    let plateau_value = if late.is_empty() {
        values.last().copied().unwrap_or(f64::NAN)
    } else {
        late.iter().sum::<f64>() / late.len() as f64
    };
    let smooth = running_mean(values, SFF_SMOOTHING);
    let (dip_idx, dip_value) = times
        .iter()
        .zip(&smooth)
        .enumerate()
        .filter(|(_, (t, _))| **t <= plateau_time)
        .map(|(i, (_, v))| (i, *v))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, f64::NAN));
    let end_idx = (dip_idx..times.len())
        .find(|&i| smooth[i] >= RAMP_TOP * plateau_value || times[i] >= 4.0 * plateau_time)
        .unwrap_or(times.len().saturating_sub(1));
    let ramp: Vec<(f64, f64)> = (dip_idx..=end_idx.min(times.len().saturating_sub(1)))
        .filter(|&i| smooth[i] > 0.0)
        .map(|i| (times[i].ln(), smooth[i].ln()))
        .collect();
    let ramp_exponent = if ramp.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = ramp.into_iter().unzip();
        crate::fragmentation::fit_line(&x, &y).slope
    } else {
        0.0
    };
    SffSegmentation {
        dip_time: times.get(dip_idx).copied().unwrap_or(f64::NAN),
        dip_value,
        ramp_end_time: times.get(end_idx).copied().unwrap_or(f64::NAN),
        plateau_time,
        plateau_value,
        ramp_exponent,
        has_ramp: dip_value * RAMP_DEPTH <= plateau_value && ramp_exponent >= RAMP_MIN_EXPONENT,
    }
}

/// Eigenvalues of a GOE matrix `(A + Aᵀ)/2` with standard normal `A`.
pub fn goe_spectrum(n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let x: f64 = StandardNormal.sample(&mut rng);
            let x = if i == j { x } else { x / 2f64.sqrt() };
            a[(i, j)] = x;
            a[(j, i)] = x;
        }
    }
    let mut vals = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::Numerical("GOE eigensolver did not converge".into()))?;
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Levels with independent unit-mean exponential spacings.
pub fn poisson_spectrum(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = 0.0;
    (0..n)
        .map(|_| {
            let s: f64 = Exp1.sample(&mut rng);
            e += s;
            e
        })
        .collect()
}
