use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::basis::{MAX_SITES, MIN_SITES};
use crate::error::{Error, Result};
use crate::models::{ModelSpec, DEFAULT_DELTA};
use crate::observables::{PAULI_STREAM_MAX_SITES, SRE_MAX_SITES};
use crate::spectral::{WindowPolicy, DENSE_CAP};
use crate::symmetry::SectorSpec;

use super::golden::BUILTIN_TABLES;

/// One analysis stage of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    /// Effective-basis dimensions.
    Dimensions,
    /// Krylov counts and the strong/weak classification.
    Fragmentation,
    /// Eigenvalues of the selected block.
    Spectrum,
    /// `⟨r⟩`, spacing histogram and spectral form factor.
    Chaos,
    /// Entanglement, SRE and participation ratio per eigenstate.
    Observables,
    /// Scar-state quench on the effective basis.
    Dynamics,
    /// Symmetry-free Krylov components with member lists.
    Components,
    /// Synthetic GOE and Poisson calibration spectra.
    Reference,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Dimensions => "dimensions",
            Analysis::Fragmentation => "fragmentation",
            Analysis::Spectrum => "spectrum",
            Analysis::Chaos => "chaos",
            Analysis::Observables => "observables",
            Analysis::Dynamics => "dynamics",
            Analysis::Components => "components",
            Analysis::Reference => "reference",
        }
    }

    fn needs_sector(self) -> bool {
        matches!(self, Analysis::Spectrum | Analysis::Chaos | Analysis::Observables)
    }
}

/// Which Hamiltonian block the spectral stages diagonalize.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockChoice {
    /// The largest Krylov fragment of the sector.
    #[default]
    Largest,
    /// The whole symmetry sector.
    Sector,
}

impl BlockChoice {
    pub fn name(self) -> &'static str {
        match self {
            BlockChoice::Largest => "largest",
            BlockChoice::Sector => "sector",
        }
    }
}

/// Chain lengths: a single value, a list, or an inclusive range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sites {
    One(usize),
    List(Vec<usize>),
    Range { from: usize, to: usize },
}

impl Sites {
    pub fn lengths(&self) -> Vec<usize> {
        match self {
            Sites::One(l) => vec![*l],
            Sites::List(v) => v.clone(),
            Sites::Range { from, to } => (*from..=*to).collect(),
        }
    }
}

/// A model in a run: a canonical label, optionally with explicit weights
/// and a per-model sector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelEntryRepr", into = "ModelEntryRepr")]
pub struct ModelEntry {
    pub label: String,
    pub weights: Option<[f64; 5]>,
    pub rydberg: Option<bool>,
    pub delta: Option<f64>,
    pub sector: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ModelEntryRepr {
    Label(String),
    Table {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<[f64; 5]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rydberg: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sector: Option<String>,
    },
}

impl From<ModelEntryRepr> for ModelEntry {
    fn from(r: ModelEntryRepr) -> Self {
        match r {
            ModelEntryRepr::Label(label) => ModelEntry::label(label),
            ModelEntryRepr::Table {
                label,
                weights,
                rydberg,
                delta,
                sector,
            } => ModelEntry {
                label,
                weights,
                rydberg,
                delta,
                sector,
            },
        }
    }
}

impl From<ModelEntry> for ModelEntryRepr {
    fn from(m: ModelEntry) -> Self {
        if m.weights.is_none() && m.rydberg.is_none() && m.delta.is_none() && m.sector.is_none() {
            ModelEntryRepr::Label(m.label)
        } else {
            ModelEntryRepr::Table {
                label: m.label,
                weights: m.weights,
                rydberg: m.rydberg,
                delta: m.delta,
                sector: m.sector,
            }
        }
    }
}

impl ModelEntry {
    pub fn label(label: impl Into<String>) -> Self {
        ModelEntry {
            label: label.into(),
            weights: None,
            rydberg: None,
            delta: None,
            sector: None,
        }
    }

    pub fn with_sector(mut self, sector: impl Into<String>) -> Self {
        self.sector = Some(sector.into());
        self
    }

    /// The model with explicit weights taking precedence over the label.
    pub fn resolve(&self, default_delta: f64) -> Result<ModelSpec> {
        let mut spec = match self.weights {
            Some(w) => ModelSpec::new(self.label.clone(), w, false)
                .map_err(|e| Error::Config(format!("model {:?}: {e}", self.label)))?,
            None => ModelSpec::from_label(&self.label, self.delta.unwrap_or(default_delta))
                .map_err(|e| match e {
                    Error::Config(_) => e,
                    other => Error::Config(format!("model {:?}: {other}", self.label)),
                })?,
        };
        if let Some(r) = self.rydberg {
            spec.rydberg = r;
        }
        Ok(spec)
    }
}

/// Symmetry sector of a run, or `none` for the plain computational basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectorChoice {
    None,
    Sector(SectorSpec),
}

impl SectorChoice {
    pub fn parse(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("none") {
            Ok(SectorChoice::None)
        } else {
            SectorSpec::from_str(s).map(SectorChoice::Sector)
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            SectorChoice::None => "none".into(),
            SectorChoice::Sector(s) => s.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    /// Largest block handed to the dense eigensolver.
    pub dense: usize,
    /// Largest chain for which the SRE is evaluated.
    pub sre_sites: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            dense: DENSE_CAP,
            sre_sites: SRE_MAX_SITES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuenchConfig {
    /// Unit-cell length `K` of the scar state; `L` must be a multiple.
    pub cell: usize,
    pub t_max: f64,
    pub points: usize,
    /// Revival threshold in units of the long-time mean.
    pub revival_factor: f64,
    /// Overlap weight that the dominant eigenstates must cover.
    pub dominant_fraction: f64,
}

impl Default for QuenchConfig {
    fn default() -> Self {
        QuenchConfig {
            cell: 6,
            t_max: 100.0,
            points: 2000,
            revival_factor: 5.0,
            dominant_fraction: 0.5,
        }
    }
}

fn default_sector() -> String {
    "k0.Ip".into()
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_seed() -> u64 {
    7
}

fn default_reference_levels() -> usize {
    2000
}

fn default_bins() -> usize {
    60
}

/// A complete run description, normally read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    pub sites: Sites,
    #[serde(default = "default_sector")]
    pub sector: String,
    pub analyses: Vec<Analysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub block: BlockChoice,
    #[serde(default)]
    pub window: WindowPolicy,
    #[serde(default)]
    pub quench: QuenchConfig,
    /// Golden tables checked after the run; built-in names or CSV paths.
    #[serde(default)]
    pub golden: Vec<String>,
    /// Write per-fragment member lists next to the counts.
    #[serde(default)]
    pub manifests: bool,
    /// Level count of each synthetic calibration spectrum.
    #[serde(default = "default_reference_levels")]
    pub reference_levels: usize,
    /// Bins of the level-spacing histogram on `[0, 4]`.
    #[serde(default = "default_bins")]
    pub bins: usize,
}

/// Names accepted by [`RunConfig::preset`].
pub const PRESETS: [&str; 9] = [
    "table1",
    "table2",
    "table3",
    "fig5a",
    "appendixA",
    "appendixC",
    "scar",
    "reference",
    "smoke",
];

impl RunConfig {
    /// A minimal configuration with defaults for everything optional.
    pub fn new(name: impl Into<String>, models: Vec<ModelEntry>, sites: Sites, analyses: Vec<Analysis>) -> Self {
        RunConfig {
            name: name.into(),
            models,
            sites,
            sector: default_sector(),
            analyses,
            output: None,
            delta: DEFAULT_DELTA,
            caps: Caps::default(),
            seed: default_seed(),
            block: BlockChoice::default(),
            window: WindowPolicy::default(),
            quench: QuenchConfig::default(),
            golden: Vec::new(),
            manifests: false,
            reference_levels: default_reference_levels(),
            bins: default_bins(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Named configurations reproducing the reference tables and figures.
    pub fn preset(name: &str) -> Result<Self> {
        use Analysis::*;
        let cfg = match name {
            "table1" => {
                let mut c = RunConfig::new(
                    "table1",
                    ["N0", "N1", "N2", "N3", "PERT_PPXPP", "QGL"].map(ModelEntry::label).to_vec(),
                    Sites::Range { from: 5, to: 12 },
                    vec![Dimensions],
                );
                c.sector = "none".into();
                c.golden = vec!["effective_dimensions".into()];
                c
            }
            "table2" => {
                let mut c = RunConfig::new(
                    "table2",
                    vec![
                        ModelEntry::label("N1"),
                        ModelEntry::label("N2").with_sector("k0.Ip.Kp"),
                    ],
                    Sites::Range { from: 10, to: 22 },
                    vec![Fragmentation],
                );
                c.golden = vec!["fragmentation".into()];
                c
            }
            "table3" => {
                let mut c = RunConfig::new(
                    "table3",
                    vec![ModelEntry::label("PERT_PPXPP")],
                    Sites::Range { from: 10, to: 22 },
                    vec![Fragmentation],
                );
                c.golden = vec!["fragmentation".into()];
                c
            }
            "fig5a" => RunConfig::new("fig5a", vec![ModelEntry::label("QGL")], Sites::One(16), vec![Spectrum, Chaos]),
            "appendixA" => {
                let mut c = RunConfig::new("appendixA", vec![ModelEntry::label("N0")], Sites::One(7), vec![Components]);
                c.sector = "none".into();
                c.golden = vec!["ppxpp_components".into()];
                c
            }
            "appendixC" => {
                let mut c = RunConfig::new("appendixC", vec![ModelEntry::label("N2")], Sites::One(18), vec![Spectrum, Chaos]);
                c.block = BlockChoice::Sector;
                c
            }
            "scar" => {
                let mut c = RunConfig::new(
                    "scar",
                    vec![ModelEntry::label("N0"), ModelEntry::label("PERT_PPXPP")],
                    Sites::One(12),
                    vec![Dynamics],
                );
                c.sector = "none".into();
                c
            }
            "reference" => {
                let mut c = RunConfig::new("reference", Vec::new(), Sites::One(MIN_SITES), vec![Reference]);
                c.golden = vec!["level_statistics".into()];
                c
            }
            "smoke" => {
                let mut c = RunConfig::new(
                    "smoke",
                    vec![ModelEntry::label("N1")],
                    Sites::Range { from: 10, to: 14 },
                    vec![Fragmentation, Spectrum, Chaos, Observables],
                );
                c.golden = vec!["fragmentation".into()];
                c
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?}; expected one of {PRESETS:?}"
                )))
            }
        };
        Ok(cfg)
    }

    pub fn sector_choice(&self) -> Result<SectorChoice> {
        SectorChoice::parse(&self.sector)
    }

    /// The resolved model and sector of every entry.
    pub fn resolved_models(&self) -> Result<Vec<(ModelSpec, SectorChoice)>> {
        self.models
            .iter()
            .map(|m| {
                let spec = m.resolve(self.delta)?;
                let sector = match &m.sector {
                    Some(s) => SectorChoice::parse(s)?,
                    None => self.sector_choice()?,
                };
                Ok((spec, sector))
            })
            .collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.name))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return bad(format!("run name {:?} must be nonempty [A-Za-z0-9_-]", self.name));
        }
        if self.analyses.is_empty() {
            return bad("no analyses requested".into());
        }
        let model_free = self.analyses.iter().all(|a| *a == Analysis::Reference);
        if self.models.is_empty() && !model_free {
            return bad("no models given".into());
        }
        let lengths = self.sites.lengths();
        if lengths.is_empty() {
            return bad("empty list of chain lengths".into());
        }
        if let Some(&l) = lengths.iter().find(|&&l| !(MIN_SITES..=MAX_SITES).contains(&l)) {
            return bad(format!("chain length {l} outside {MIN_SITES}..={MAX_SITES}"));
        }
        if !self.delta.is_finite() {
            return bad(format!("delta must be finite, got {}", self.delta));
        }
        for (spec, sector) in self.resolved_models()? {
            if sector == SectorChoice::None {
                if let Some(a) = self.analyses.iter().find(|a| a.needs_sector()) {
                    return bad(format!(
                        "analysis `{}` for {} needs a symmetry sector, not `none`",
                        a.name(),
                        spec.label
                    ));
                }
            }
            if let SectorChoice::Sector(s) = sector {
                if s.momentum != 0 {
                    return bad(format!("sector {s}: only zero momentum is supported"));
                }
                if s.spin_flip.is_some() && !spec.is_spin_flip_symmetric() {
                    return bad(format!("{} is not spin-flip symmetric; sector {s} is invalid", spec.label));
                }
                if s.spin_flip.is_some() && spec.rydberg {
                    return bad(format!("the Rydberg space of {} is not spin-flip closed", spec.label));
                }
            }
        }
        if self.caps.dense == 0 {
            return bad("caps.dense must be positive".into());
        }
        if self.caps.sre_sites > PAULI_STREAM_MAX_SITES {
            return bad(format!(
                "caps.sre_sites = {} exceeds the streaming limit {PAULI_STREAM_MAX_SITES}",
                self.caps.sre_sites
            ));
        }
        if let WindowPolicy::Central { fraction } = self.window {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return bad(format!("window fraction {fraction} not in (0, 1]"));
            }
        }
        if self.analyses.contains(&Analysis::Dynamics) {
            let q = &self.quench;
            if q.cell < 2 || q.cell % 2 != 0 {
                return bad(format!("quench.cell = {} must be even and at least 2", q.cell));
            }
            if let Some(l) = lengths.iter().find(|&&l| l % q.cell != 0) {
                return bad(format!("chain length {l} is not a multiple of quench.cell = {}", q.cell));
            }
            if !(q.t_max.is_finite() && q.t_max > 0.0) || q.points < 2 {
                return bad("quench needs t_max > 0 and at least 2 points".into());
            }
            if !(q.dominant_fraction > 0.0 && q.dominant_fraction <= 1.0) || !(q.revival_factor.is_finite() && q.revival_factor > 0.0) {
                return bad("quench.dominant_fraction must be in (0, 1] and revival_factor positive".into());
            }
        }
        if self.analyses.contains(&Analysis::Reference) && self.reference_levels < 10 {
            return bad("reference_levels must be at least 10".into());
        }
        if self.bins == 0 {
            return bad("bins must be positive".into());
        }
        for g in &self.golden {
            if !BUILTIN_TABLES.contains(&g.as_str()) && !g.ends_with(".csv") {
                return bad(format!(
                    "golden table {g:?} is neither built in ({BUILTIN_TABLES:?}) nor a .csv path"
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for name in PRESETS {
            let cfg = RunConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            let text = cfg.to_toml_string().unwrap();
            assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg, "{name}");
        }
    }

    #[test]
    fn models_accept_labels_and_tables() {
        let cfg = RunConfig::from_toml_str(
            r#"
            name = "mix"
            sites = { from = 10, to = 12 }
            analyses = ["fragmentation"]
            models = ["N1", { label = "N2", sector = "k0.Ip.Kp" }, { label = "mine", weights = [0, 1, 1, 0, 0] }]
            "#,
        )
        .unwrap();
        let resolved = cfg.resolved_models().unwrap();
        assert_eq!(resolved.len(), 3);
        assert_eq!(resolved[1].1, SectorChoice::Sector("k0.Ip.Kp".parse().unwrap()));
        assert_eq!(resolved[2].0.weights(), [0.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(cfg.sites.lengths(), vec![10, 11, 12]);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let cases = [
            "name = 'x'\nsites = 10\nanalyses = ['fragmentation']\nmodels = ['N9']",
            "name = 'x'\nsites = 4\nanalyses = ['fragmentation']\nmodels = ['N1']",
            "name = 'x'\nsites = 10\nanalyses = ['chaos']\nmodels = ['N1']\nsector = 'none'",
            "name = 'x'\nsites = 10\nanalyses = ['fragmentation']\nmodels = ['QGL']\nsector = 'k0.Ip.Kp'",
            "name = 'x'\nsites = 10\nanalyses = ['dynamics']\nmodels = ['N0']\nsector = 'none'",
            "name = 'x'\nsites = 10\nanalyses = ['bogus']\nmodels = ['N1']",
            "name = 'x'\nsites = 10\nanalyses = ['observables']\nmodels = ['N1']\ncaps = { sre_sites = 20 }",
            "name = 'x'\nsites = 10\nanalyses = ['fragmentation']\nmodels = ['N1']\ngolden = ['nope']",
            "name = 'x'\nsites = 10\nanalyses = ['fragmentation']\nmodels = ['N1']\nunknown_key = 1",
        ];
        for text in cases {
            let err = RunConfig::from_toml_str(text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(matches!(RunConfig::preset("table9"), Err(Error::Config(_))));
    }
}
