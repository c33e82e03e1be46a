use std::path::Path;

use kcm::pipeline::{run, Analysis, BlockChoice, ModelEntry, RunConfig, Sites, SpectrumKey, PRESETS};
use kcm::ModelSpec;

fn configs_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

#[test]
fn shipped_configs_equal_their_presets() {
    for name in PRESETS {
        let path = configs_dir().join(format!("{name}.toml"));
        let mut file = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let mut preset = RunConfig::preset(name).unwrap();
        file.output = None;
        preset.output = None;
        assert_eq!(file, preset, "{name}");
    }
    let shipped = std::fs::read_dir(configs_dir()).unwrap().count();
    assert_eq!(shipped, PRESETS.len());
}

fn small_spectrum_run(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::preset("smoke").unwrap();
    cfg.name = "cache".into();
    cfg.output = Some(out.to_path_buf());
    cfg.analyses = vec![Analysis::Spectrum];
    cfg.golden.clear();
    cfg.sites = Sites::One(12);
    cfg.models = vec![ModelEntry::label("PERT_PPXPP")];
    cfg
}

#[test]
fn cache_is_invalidated_by_upstream_changes() {
    let dir = tempfile::tempdir().unwrap();
    let base = small_spectrum_run(dir.path());
    assert_eq!(run(&base).unwrap().cache_hits, 0);
    assert_eq!(run(&base).unwrap().cache_hits, 1);

    let mut delta = base.clone();
    delta.delta = 0.1;
    let mut sites = base.clone();
    sites.sites = Sites::One(13);
    let mut sector = base.clone();
    sector.sector = "k0.Im".into();
    let mut block = base.clone();
    block.block = BlockChoice::Sector;
    let mut weights = base.clone();
    weights.models = vec![ModelEntry {
        weights: Some([0.0, 1.0, 0.2, 0.0, 0.0]),
        ..ModelEntry::label("PERT_PPXPP")
    }];
    for (what, cfg) in [("delta", &delta), ("sites", &sites), ("sector", &sector), ("block", &block), ("weights", &weights)] {
        assert_eq!(run(cfg).unwrap().cache_hits, 0, "{what}");
        assert_eq!(run(cfg).unwrap().cache_hits, 1, "{what}");
    }
}

#[test]
fn spectrum_keys_hash_every_field() {
    let model = ModelSpec::level(1).unwrap();
    let base = SpectrumKey::new(&model, 14, "k0.Ip", "largest");
    let variants = [
        SpectrumKey::new(&ModelSpec::level(2).unwrap(), 14, "k0.Ip", "largest"),
        SpectrumKey::new(&ModelSpec::pert_ppxpp(0.09).unwrap(), 14, "k0.Ip", "largest"),
        SpectrumKey::new(&ModelSpec::pert_ppxpp(0.1).unwrap(), 14, "k0.Ip", "largest"),
        SpectrumKey::new(&model, 15, "k0.Ip", "largest"),
        SpectrumKey::new(&model, 14, "k0.Im", "largest"),
        SpectrumKey::new(&model, 14, "k0.Ip", "sector"),
    ];
    let mut digests: Vec<String> = variants.iter().map(SpectrumKey::digest).collect();
    digests.push(base.digest());
    assert_eq!(base.digest(), SpectrumKey::new(&model, 14, "k0.Ip", "largest").digest());
    let n = digests.len();
    digests.sort();
    digests.dedup();
    assert_eq!(digests.len(), n);
}

#[test]
fn table2_rows_reproduce_through_sixteen_sites() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::preset("table2").unwrap();
    cfg.output = Some(dir.path().to_path_buf());
    cfg.sites = Sites::Range { from: 10, to: 16 };
    let bundle = run(&cfg).unwrap();
    let report = &bundle.golden[0];
    assert_eq!(report.comparisons.len(), 2 * 3 * 7);
    assert!(bundle.passed(), "{:?}", bundle.mismatches().collect::<Vec<_>>());
}
