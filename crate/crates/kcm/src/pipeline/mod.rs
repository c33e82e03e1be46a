//! Configuration-driven runs.
//!
//! A [`RunConfig`] names models, chain lengths, a sector and a list of
//! [`Analysis`] stages. [`run`] executes them in a fixed order, writes CSV and
//! JSON artifacts to the output directory, caches eigenvalue lists by content
//! hash and finally checks the computed cells against golden tables.
//!
//! ```
//! use kcm::pipeline::{run, RunConfig};
//!
//! let dir = tempfile::tempdir().unwrap();
//! let mut cfg = RunConfig::preset("appendixA").unwrap();
//! cfg.output = Some(dir.path().to_path_buf());
//! let bundle = run(&cfg).unwrap();
//! assert!(bundle.passed());
//! ```

mod cache;
mod config;
mod golden;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{rydberg_filter, Basis, BasisState};
use crate::dynamics::{build_scar_state, count_revivals, quench, revival_score, uniform_time_grid, RevivalScore};
use crate::error::{Error, Result};
use crate::fragmentation::{
    classify, decompose, fragment_hamiltonian, sector_fragments, Classification, FragmentManifest,
    FragmentationScaling, KrylovDecomposition, ScalingRecord,
};
use crate::models::{build_matrix, ModelSpec};
use crate::observables::{spectrum_scan, write_reports_csv, Block, ScanOptions};
use crate::spectral::{
    default_time_grid, diagonalize_capped, goe_spectrum, level_spacing_histogram, mean_r, poisson_spectrum, sff,
    unfold, Provenance, RStatistic, SffSegmentation, Spectrum, WindowPolicy,
};

pub use cache::{CachedSpectrum, SpectrumCache, SpectrumKey};
pub use config::{
    Analysis, BlockChoice, Caps, ModelEntry, QuenchConfig, RunConfig, SectorChoice, Sites, PRESETS,
};
pub use golden::{
    compare_golden, format_value, read_computed_csv, write_computed_csv, CellComparison, ComputedCell, GoldenCell,
    GoldenReport, GoldenTable, BUILTIN_TABLES, COMPUTED_HEADER, GOLDEN_HEADER,
};

/// Upper edge of the spacing histogram, in mean spacings.
const HISTOGRAM_MAX: f64 = 4.0;

/// A summary line per analysed object, collected into `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "analysis", rename_all = "snake_case")]
pub enum Record {
    Dimensions {
        model: String,
        sites: usize,
        dimension: usize,
        full: usize,
        frozen: usize,
    },
    Fragmentation {
        model: String,
        sector: String,
        records: Vec<ScalingRecord>,
        classification: Option<Classification>,
    },
    Spectrum {
        model: String,
        sites: usize,
        sector: String,
        block: String,
        fragment: Option<usize>,
        levels: usize,
        min: f64,
        max: f64,
    },
    Chaos {
        model: String,
        sites: usize,
        sector: String,
        block: String,
        window: WindowPolicy,
        r: RStatistic,
        unfolding_degree: usize,
        requested_degree: usize,
        ks_wigner: f64,
        ks_poisson: f64,
        sff: SffSegmentation,
    },
    Observables {
        model: String,
        sites: usize,
        sector: String,
        block: String,
        states: usize,
        sre_evaluated: bool,
    },
    Dynamics {
        model: String,
        sites: usize,
        cell: usize,
        dimension: usize,
        projection_weight: f64,
        frozen_weight: f64,
        lost_weight: f64,
        long_time_mean: f64,
        revival: RevivalScore,
        revivals: usize,
        dominant_count: usize,
    },
    Components {
        model: String,
        sites: usize,
        nontrivial: usize,
        largest: usize,
        vacuum_component: usize,
        rydberg_nontrivial: usize,
        rydberg_largest: usize,
    },
    Reference {
        ensemble: String,
        levels: usize,
        seed: u64,
        r: RStatistic,
        ks_wigner: f64,
        ks_poisson: f64,
    },
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct ReportBundle {
    pub name: String,
    pub output: PathBuf,
    /// Written files, relative to `output`, in creation order.
    pub artifacts: Vec<PathBuf>,
    pub records: Vec<Record>,
    pub cells: Vec<ComputedCell>,
    pub golden: Vec<GoldenReport>,
    /// Spectra served from the cache instead of the eigensolver.
    pub cache_hits: usize,
}

impl ReportBundle {
    /// Every golden comparison passed.
    pub fn passed(&self) -> bool {
        self.golden.iter().all(GoldenReport::passed)
    }

    pub fn mismatches(&self) -> impl Iterator<Item = &CellComparison> {
        self.golden.iter().flat_map(GoldenReport::failures)
    }
}

#[derive(Serialize)]
struct GoldenSummary<'a> {
    table: &'a str,
    compared: usize,
    failed: usize,
    unmatched: usize,
    failures: Vec<String>,
}

#[derive(Serialize)]
struct RunReport<'a> {
    name: &'a str,
    config: &'a RunConfig,
    artifacts: Vec<String>,
    records: &'a [Record],
    golden: Vec<GoldenSummary<'a>>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    cache: SpectrumCache,
    artifacts: Vec<PathBuf>,
    records: Vec<Record>,
    cells: Vec<ComputedCell>,
    cache_hits: usize,
}

impl Ctx<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(PathBuf::from(name));
        Ok(BufWriter::new(file))
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n").map_err(|e| Error::io(name, e))?;
        self.finish(w, name)
    }

    fn finish(&self, mut w: BufWriter<File>, name: &str) -> Result<()> {
        w.flush().map_err(|e| Error::io(self.out.join(name), e))
    }

    fn cell(&mut self, table: &str, row: impl Into<String>, column: impl Into<String>, value: f64) {
        self.cells.push(ComputedCell::new(table, row, column, value));
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Execute every analysis of `cfg` and compare against its golden tables.
pub fn run(cfg: &RunConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    // Sequential dense kernels keep eigenvalues bitwise reproducible.
    faer::set_global_parallelism(faer::Par::Seq);
    let out = cfg.output_dir();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let models = cfg.resolved_models()?;
    let mut ctx = Ctx {
        cfg,
        cache: SpectrumCache::new(out.join("cache")),
        out,
        artifacts: Vec::new(),
        records: Vec::new(),
        cells: Vec::new(),
        cache_hits: 0,
    };
    let mut analyses = cfg.analyses.clone();
    analyses.sort();
    analyses.dedup();
    for analysis in analyses {
        match analysis {
            Analysis::Dimensions => stage("dimensions", dimensions(&mut ctx, &models))?,
            Analysis::Fragmentation => stage("fragmentation", fragmentation(&mut ctx, &models))?,
            Analysis::Spectrum => {}
            Analysis::Chaos => {}
            Analysis::Observables => {}
            Analysis::Dynamics => stage("dynamics", dynamics(&mut ctx, &models))?,
            Analysis::Components => stage("components", components(&mut ctx, &models))?,
            Analysis::Reference => stage("reference", reference(&mut ctx))?,
        }
    }
    let spectral = [Analysis::Spectrum, Analysis::Chaos, Analysis::Observables];
    if cfg.analyses.iter().any(|a| spectral.contains(a)) {
        stage("spectral", spectral_stages(&mut ctx, &models))?;
    }

    let golden = stage("golden", check_golden(&mut ctx))?;
    let mut w = ctx.create("cells.csv")?;
    write_computed_csv(&ctx.cells, &mut w)?;
    ctx.finish(w, "cells.csv")?;

    let artifacts: Vec<String> = ctx
        .artifacts
        .iter()
        .map(|p| p.display().to_string())
        .chain(std::iter::once("report.json".to_string()))
        .collect();
    let report = RunReport {
        name: &cfg.name,
        config: cfg,
        artifacts,
        records: &ctx.records,
        golden: golden
            .iter()
            .map(|g| GoldenSummary {
                table: &g.table,
                compared: g.comparisons.len(),
                failed: g.failures().count(),
                unmatched: g.unmatched.len(),
                failures: g.failures().map(ToString::to_string).collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_vec_pretty(&report)?;
    text.push(b'\n');
    let path = ctx.out.join("report.json");
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))?;
    ctx.artifacts.push(PathBuf::from("report.json"));

    Ok(ReportBundle {
        name: cfg.name.clone(),
        output: ctx.out,
        artifacts: ctx.artifacts,
        records: ctx.records,
        cells: ctx.cells,
        golden,
        cache_hits: ctx.cache_hits,
    })
}

fn check_golden(ctx: &mut Ctx<'_>) -> Result<Vec<GoldenReport>> {
    let mut reports = Vec::new();
    for name in &ctx.cfg.golden {
        let table = GoldenTable::open(name)?;
        let report = compare_golden(&table, &ctx.cells)?;
        let file = format!("golden_{}.csv", table.name);
        let mut w = ctx.create(&file)?;
        report.write_csv(&mut w)?;
        ctx.finish(w, &file)?;
        reports.push(report);
    }
    Ok(reports)
}

fn dimensions(ctx: &mut Ctx<'_>, models: &[(ModelSpec, SectorChoice)]) -> Result<()> {
    let lengths = ctx.cfg.sites.lengths();
    let mut rows = Vec::new();
    for (model, _) in models {
        for &l in &lengths {
            let dimension = model.effective_basis(l)?.len();
            let full = model.full_basis(l)?.len();
            rows.push((model.label.clone(), l, dimension, full));
            ctx.cell("effective_dimensions", model.label.as_str(), format!("L{l}"), dimension as f64);
        }
    }
    for &l in &lengths {
        ctx.cell("effective_dimensions", "FULL", format!("L{l}"), (1u64 << l) as f64);
    }
    let mut w = csv::Writer::from_writer(ctx.create("dimensions.csv")?);
    w.write_record(["model", "L", "dimension", "full", "frozen"])?;
    for (model, l, d, full) in &rows {
        w.write_record([model.clone(), l.to_string(), d.to_string(), full.to_string(), (full - d).to_string()])?;
    }
    w.flush().map_err(|e| Error::io("dimensions.csv", e))?;
    for (model, sites, dimension, full) in rows {
        ctx.records.push(Record::Dimensions {
            model,
            sites,
            dimension,
            full,
            frozen: full - dimension,
        });
    }
    Ok(())
}

/// Decomposition of the model in the chosen sector (or the plain basis).
fn decomposition(model: &ModelSpec, sector: SectorChoice, sites: usize) -> Result<KrylovDecomposition> {
    match sector {
        SectorChoice::None => {
            let basis = model.full_basis(sites)?;
            Ok(decompose(&build_matrix(model, &basis)?))
        }
        SectorChoice::Sector(spec) => Ok(sector_fragments(model, spec, sites)?.decomposition),
    }
}

fn fragmentation(ctx: &mut Ctx<'_>, models: &[(ModelSpec, SectorChoice)]) -> Result<()> {
    let lengths = ctx.cfg.sites.lengths();
    let manifests = ctx.cfg.manifests;
    for (model, sector) in models {
        let desc = sector.descriptor();
        let jobs: Vec<(ScalingRecord, Option<FragmentManifest>)> = lengths
            .par_iter()
            .map(|&l| match *sector {
                SectorChoice::Sector(spec) if manifests => {
                    let frags = sector_fragments(model, spec, l)?;
                    let rec = ScalingRecord::from_decomposition(l, &frags.decomposition);
                    Ok((rec, Some(FragmentManifest::new(model, &frags))))
                }
                _ => Ok((ScalingRecord::from_decomposition(l, &decomposition(model, *sector, l)?), None)),
            })
            .collect::<Result<_>>()?;
        let mut records = Vec::new();
        for (rec, manifest) in jobs {
            let l = rec.sites;
            if let Some(m) = manifest {
                ctx.write_json(&format!("fragments_{}_{desc}_L{l}.json", model.label), &m)?;
            }
            let row = |q: &str| format!("{} {desc} {q}", model.label);
            let col = format!("L{l}");
            ctx.cell("fragmentation", row("N_L"), col.clone(), rec.count as f64);
            ctx.cell("fragmentation", row("d_L"), col.clone(), rec.largest as f64);
            ctx.cell("fragmentation", row("D_L"), col, rec.dim as f64);
            records.push(rec);
        }
        let scaling = FragmentationScaling { records };
        let file = format!("fragmentation_{}_{desc}.csv", model.label);
        let w = ctx.create(&file)?;
        scaling.write_csv(w)?;
        let classification = if scaling.records.len() >= crate::fragmentation::TREND_POINTS {
            let c = classify(&scaling)?;
            ctx.write_json(&format!("classification_{}_{desc}.json", model.label), &c)?;
            Some(c)
        } else {
            None
        };
        ctx.records.push(Record::Fragmentation {
            model: model.label.clone(),
            sector: desc,
            records: scaling.records,
            classification,
        });
    }
    Ok(())
}

/// Eigenpairs of the configured block, from the cache when vectors are not
/// needed.
fn block_spectrum(
    ctx: &mut Ctx<'_>,
    model: &ModelSpec,
    sites: usize,
    frags: &crate::fragmentation::SectorFragments,
    want_vectors: bool,
) -> Result<Spectrum> {
    let block = ctx.cfg.block;
    let desc = frags.sector.descriptor();
    let fragment = match block {
        BlockChoice::Largest => Some(0),
        BlockChoice::Sector => None,
    };
    let provenance = Provenance {
        model: model.label.clone(),
        sites,
        sector: desc.clone(),
        fragment,
    };
    let key = SpectrumKey::new(model, sites, &desc, block.name());
    if !want_vectors {
        if let Some(hit) = ctx.cache.get(&key)? {
            ctx.cache_hits += 1;
            return Ok(Spectrum::from_eigenvalues(hit.eigenvalues).with_provenance(provenance));
        }
    }
    let h = match block {
        BlockChoice::Largest => fragment_hamiltonian(&frags.hamiltonian, &frags.decomposition, 0)?,
        BlockChoice::Sector => frags.hamiltonian.clone(),
    };
    let sp = diagonalize_capped(&h, want_vectors, ctx.cfg.caps.dense)?.with_provenance(provenance);
    ctx.cache.put(&CachedSpectrum {
        key,
        fragment,
        eigenvalues: sp.eigenvalues.clone(),
    })?;
    Ok(sp)
}

fn spectral_stages(ctx: &mut Ctx<'_>, models: &[(ModelSpec, SectorChoice)]) -> Result<()> {
    let want = |a| ctx.cfg.analyses.contains(&a);
    let (do_spectrum, do_chaos, do_obs) = (want(Analysis::Spectrum), want(Analysis::Chaos), want(Analysis::Observables));
    let block = ctx.cfg.block;
    for (model, sector) in models {
        let SectorChoice::Sector(spec) = *sector else {
            continue;
        };
        for l in ctx.cfg.sites.lengths() {
            let frags = sector_fragments(model, spec, l)?;
            let desc = frags.sector.descriptor();
            let sp = block_spectrum(ctx, model, l, &frags, do_obs)?;
            let tag = format!("{}_{desc}_{}_L{l}", model.label, block.name());
            if do_spectrum {
                stage("spectrum", write_spectrum(ctx, &tag, &sp))?;
            }
            if do_chaos {
                stage("chaos", chaos(ctx, &tag, &sp))?;
            }
            if do_obs {
                let scan_block = match block {
                    BlockChoice::Largest => Block::Fragment {
                        id: 0,
                        members: frags.decomposition.component(0).unwrap_or(&[]),
                    },
                    BlockChoice::Sector => Block::Sector(Some(&frags.decomposition)),
                };
                let opts = ScanOptions {
                    sre_max_sites: ctx.cfg.caps.sre_sites,
                    ..ScanOptions::default()
                };
                let reports = stage("observables", spectrum_scan(&sp, &frags.sector, scan_block, opts))?;
                let file = format!("eigenstates_{tag}.csv");
                write_reports_csv(&reports, ctx.create(&file)?)?;
                ctx.records.push(Record::Observables {
                    model: model.label.clone(),
                    sites: l,
                    sector: desc.clone(),
                    block: block.name().into(),
                    states: reports.len(),
                    sre_evaluated: l <= ctx.cfg.caps.sre_sites,
                });
            }
        }
    }
    Ok(())
}

fn write_spectrum(ctx: &mut Ctx<'_>, tag: &str, sp: &Spectrum) -> Result<()> {
    let file = format!("spectrum_{tag}.csv");
    let mut w = csv::Writer::from_writer(ctx.create(&file)?);
    w.write_record(["n", "E"])?;
    for (n, e) in sp.eigenvalues.iter().enumerate() {
        w.write_record([n.to_string(), e.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&file, e))?;
    let p = &sp.provenance;
    ctx.records.push(Record::Spectrum {
        model: p.model.clone(),
        sites: p.sites,
        sector: p.sector.clone(),
        block: ctx.cfg.block.name().into(),
        fragment: p.fragment,
        levels: sp.len(),
        min: sp.eigenvalues.first().copied().unwrap_or(f64::NAN),
        max: sp.eigenvalues.last().copied().unwrap_or(f64::NAN),
    });
    Ok(())
}

fn chaos(ctx: &mut Ctx<'_>, tag: &str, sp: &Spectrum) -> Result<()> {
    let policy = ctx.cfg.window;
    let r = mean_r(&sp.eigenvalues, policy)?;
    let us = unfold(&sp.eigenvalues, policy)?;
    let hist = level_spacing_histogram(&us, ctx.cfg.bins, HISTOGRAM_MAX);
    let curve = sff(&us, &default_time_grid())?;
    hist.write_csv(ctx.create(&format!("spacings_{tag}.csv"))?)?;
    curve.write_csv(ctx.create(&format!("sff_{tag}.csv"))?)?;
    let p = &sp.provenance;
    let block = ctx.cfg.block.name();
    ctx.cell(
        "level_statistics",
        format!("{} {} {block} L{}", p.model, p.sector, p.sites),
        "r",
        r.mean,
    );
    ctx.records.push(Record::Chaos {
        model: p.model.clone(),
        sites: p.sites,
        sector: p.sector.clone(),
        block: block.into(),
        window: policy,
        r,
        unfolding_degree: us.fit.degree(),
        requested_degree: us.requested_degree,
        ks_wigner: hist.ks_wigner,
        ks_poisson: hist.ks_poisson,
        sff: curve.segmentation,
    });
    Ok(())
}

fn dynamics(ctx: &mut Ctx<'_>, models: &[(ModelSpec, SectorChoice)]) -> Result<()> {
    let q = ctx.cfg.quench;
    let times = uniform_time_grid(0.0, q.t_max, q.points);
    for (model, _) in models {
        for l in ctx.cfg.sites.lengths() {
            let basis = model.effective_basis(l)?;
            let h = build_matrix(model, &basis)?;
            let sp = diagonalize_capped(&h, true, ctx.cfg.caps.dense)?;
            let psi0 = build_scar_state(q.cell, l / q.cell)?;
            let qr = quench(&sp, &basis, &psi0, &times)?;
            let tag = format!("{}_L{l}", model.label);
            qr.write_return_csv(ctx.create(&format!("return_{tag}.csv"))?)?;
            qr.write_overlaps_csv(ctx.create(&format!("overlaps_{tag}.csv"))?)?;
            ctx.records.push(Record::Dynamics {
                model: model.label.clone(),
                sites: l,
                cell: q.cell,
                dimension: basis.len(),
                projection_weight: qr.projection_weight,
                frozen_weight: qr.frozen_weight,
                lost_weight: qr.lost_weight,
                long_time_mean: qr.long_time_mean,
                revival: revival_score(&qr),
                revivals: count_revivals(&qr, q.revival_factor * qr.long_time_mean),
                dominant_count: qr.dominant_count(q.dominant_fraction),
            });
        }
    }
    Ok(())
}

/// Kets of the component of `basis` containing `bits`.
fn component_of(kd: &KrylovDecomposition, basis: &Basis, bits: u32) -> Vec<BasisState> {
    let Some(i) = basis.index_of(bits) else {
        return Vec::new();
    };
    let id = kd.labels()[i];
    kd.component(id)
        .unwrap_or(&[])
        .iter()
        .map(|&j| basis.state(j))
        .collect()
}

#[derive(Serialize)]
struct ComponentListing {
    model: String,
    sites: usize,
    basis: &'static str,
    components: Vec<Vec<String>>,
}

fn components(ctx: &mut Ctx<'_>, models: &[(ModelSpec, SectorChoice)]) -> Result<()> {
    for (model, _) in models {
        for l in ctx.cfg.sites.lengths() {
            let full = model.full_basis(l)?;
            let kd = decompose(&build_matrix(model, &full)?);
            let rydberg = rydberg_filter(&full);
            let rkd = decompose(&build_matrix(model, &rydberg)?);

            let vacuum = component_of(&kd, &full, 0);
            let pair = component_of(&kd, &full, 0b11);
            let table = "ppxpp_components";
            for s in &vacuum {
                ctx.cell(table, s.to_ket(), "vacuum_component", 1.0);
            }
            ctx.cell(table, "size", "vacuum_component", vacuum.len() as f64);
            for s in &pair {
                ctx.cell(table, s.to_ket(), "pair_component", 1.0);
            }
            ctx.cell(table, "size", "pair_component", pair.len() as f64);
            ctx.cell(table, "rydberg", "component_count", rkd.nontrivial_count() as f64);
            ctx.cell(table, "rydberg", "size", rkd.largest() as f64);

            for (kind, decomposition, basis) in [("full", &kd, &full), ("rydberg", &rkd, &rydberg)] {
                let listing = ComponentListing {
                    model: model.label.clone(),
                    sites: l,
                    basis: kind,
                    components: decomposition
                        .components()
                        .iter()
                        .filter(|c| c.len() > 1)
                        .map(|c| c.iter().map(|&j| basis.state(j).to_ket()).collect())
                        .collect(),
                };
                ctx.write_json(&format!("components_{}_{kind}_L{l}.json", model.label), &listing)?;
            }
            ctx.records.push(Record::Components {
                model: model.label.clone(),
                sites: l,
                nontrivial: kd.nontrivial_count(),
                largest: kd.largest(),
                vacuum_component: vacuum.len(),
                rydberg_nontrivial: rkd.nontrivial_count(),
                rydberg_largest: rkd.largest(),
            });
        }
    }
    Ok(())
}

/// Synthetic calibration spectra, analysed on their central 60%.
fn reference(ctx: &mut Ctx<'_>) -> Result<()> {
    let n = ctx.cfg.reference_levels;
    let seed = ctx.cfg.seed;
    let policy = WindowPolicy::Central { fraction: 0.6 };
    for (name, levels) in [("goe", goe_spectrum(n, seed)?), ("poisson", poisson_spectrum(n, seed))] {
        let r = mean_r(&levels, policy)?;
        let us = unfold(&levels, policy)?;
        let hist = level_spacing_histogram(&us, ctx.cfg.bins, HISTOGRAM_MAX);
        hist.write_csv(ctx.create(&format!("spacings_{name}_reference.csv"))?)?;
        ctx.cell("level_statistics", format!("{name} synthetic"), "r", r.mean);
        ctx.records.push(Record::Reference {
            ensemble: name.into(),
            levels: n,
            seed,
            r,
            ks_wigner: hist.ks_wigner,
            ks_poisson: hist.ks_poisson,
        });
    }
    Ok(())
}

/// Check a stored `cells.csv` against a golden table.
pub fn check_cells_file(cells_path: &Path, golden: &str) -> Result<GoldenReport> {
    let file = File::open(cells_path).map_err(|e| Error::io(cells_path, e))?;
    let cells = read_computed_csv(file)?;
    compare_golden(&GoldenTable::open(golden)?, &cells)
}
