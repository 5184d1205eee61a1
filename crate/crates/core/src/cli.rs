//! Config-driven experiment runner behind the `dampspec` binary.
//!
//! Subcommands: `simulate`, `recover`, `compare`, `probe-split` and `full`.
//! Exit codes: 0 equal (or success), 1 different, 3 inconclusive, 2 error.
//!
//! A config is TOML with the sections `[experiment]`, `[manifold]`,
//! `[region]`, `[probes]`, `[grid]` and `[recovery]`:
//!
//! ```toml
//! [experiment]
//! map = "source"        # or "boundary"
//!
//! [manifold]
//! kind = "circle"       # circle | torus | interval | rectangle
//! cells = 128
//! modes = 13            # mode budget of the simulation
//!
//! [region]
//! w = "arc"             # arc | all; boundary maps use s_in / s_out
//! start = 0
//! len = 64
//!
//! [probes]
//! mode = "battery"      # or "train"
//! count = 8
//!
//! [grid]
//! dt = 0.02
//! horizon = 60.0
//! ```

use crate::compare::{compare_boundary_spectral_data, compare_spectral_data, ComparisonReport, Tolerances};
use crate::error::{Error, Result};
use crate::forward::{
    solve_dtn_terms, solve_source_terms, ChannelRole, ForwardOptions, SourceKind, SourceSpec,
    TimeGrid, TimeSignal,
};
use crate::io::{file_sha256, load_signal, save_signal, Bundle};
use crate::manifold::{
    build_manifold, eigendecompose, recombine_within_groups, ConformalFactor, DiscreteManifold,
    ManifoldKind, ManifoldSpec, RegionMask, RegionRole, SpectralDecomposition,
};
use crate::probe::{indicator_basis, make_bump, nodal_basis, split_measurement, Bump, PacketResponse, ProbePlan};
use crate::recover::{
    assemble_boundary_spectral_data, assemble_source_spectral_data, BoundarySpectralData,
    GroupDiagnostic, RecoveryOptions, RecoveryPath, Responses, SpectralData,
};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "dampspec", version, about = "Damped-wave spectral experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for random orthogonal recombination of degenerate eigenvectors.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Mode budget, overriding `[manifold] modes`.
    #[arg(long, global = true)]
    pub modes: Option<usize>,
    /// Relative eigenvalue tolerance for comparisons.
    #[arg(long, global = true)]
    pub tol_lambda: Option<f64>,
    /// Absolute matrix tolerance for comparisons.
    #[arg(long, global = true)]
    pub tol_matrix: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate measurements and write signal CSVs with a manifest.
    Simulate,
    /// Recover a spectral data bundle from a measurement directory.
    Recover { measurements: PathBuf },
    /// Compare two spectral data bundles.
    Compare { a: PathBuf, b: PathBuf },
    /// Split a packet-train measurement into per-packet responses.
    ProbeSplit { measurements: PathBuf },
    /// Simulate, recover and compare against directly computed data.
    Full,
}

/// Parses `args` and runs; errors are printed and mapped to exit code 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Simulate => {
            let cfg = LoadedConfig::from_path(require(&cli.config, "--config")?)?;
            run_simulate(&cfg, require(&cli.out, "--out")?, &Overrides::from(cli))?;
            Ok(0)
        }
        Command::Recover { measurements } => {
            let cfg = match &cli.config {
                Some(p) => Some(LoadedConfig::from_path(p)?),
                None => None,
            };
            run_recover(measurements, cfg.as_ref(), require(&cli.out, "--out")?)?;
            Ok(0)
        }
        Command::Compare { a, b } => {
            let report = run_compare(a, b, tolerances(cli, Tolerances::RECOVERED), cli.out.as_deref())?;
            print!("{report}");
            Ok(report.verdict.exit_code())
        }
        Command::ProbeSplit { measurements } => {
            let cfg = match &cli.config {
                Some(p) => Some(LoadedConfig::from_path(p)?),
                None => None,
            };
            run_probe_split(measurements, cfg.as_ref(), require(&cli.out, "--out")?)?;
            Ok(0)
        }
        Command::Full => {
            let cfg = LoadedConfig::from_path(require(&cli.config, "--config")?)?;
            let report = run_full(
                &cfg,
                require(&cli.out, "--out")?,
                &Overrides::from(cli),
                tolerances(cli, Tolerances::RECOVERED),
            )?;
            print!("{report}");
            Ok(report.verdict.exit_code())
        }
    }
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("{flag} is required for this subcommand")))
}

fn tolerances(cli: &Cli, base: Tolerances) -> Tolerances {
    Tolerances {
        lambda_rtol: cli.tol_lambda.unwrap_or(base.lambda_rtol),
        matrix_atol: cli.tol_matrix.unwrap_or(base.matrix_atol),
    }
}

/// Command-line values that take precedence over the config.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub modes: Option<usize>,
}

impl From<&Cli> for Overrides {
    fn from(cli: &Cli) -> Self {
        Self {
            seed: cli.seed,
            modes: cli.modes,
        }
    }
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Source,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    Battery,
    Train,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub manifold: ManifoldSection,
    pub region: Option<RegionSection>,
    pub probes: ProbeSection,
    pub grid: GridSection,
    #[serde(default)]
    pub recovery: RecoverySection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub map: MapKind,
    pub name: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSection {
    pub kind: String,
    pub cells: usize,
    pub cells_y: Option<usize>,
    pub length: Option<f64>,
    pub length_y: Option<f64>,
    /// Constant conformal factor.
    #[serde(default = "one")]
    pub conformal: f64,
    pub modes: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub w: Option<String>,
    #[serde(default)]
    pub start: usize,
    pub len: Option<usize>,
    pub s_in: Option<Vec<String>>,
    pub s_out: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub mode: ProbeMode,
    /// Number of indicator probes on W (source maps).
    pub count: Option<usize>,
    #[serde(default = "default_lead")]
    pub start: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_power")]
    pub power: u32,
    /// Breakpoint spacing of a packet train.
    pub spacing: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dt: f64,
    pub horizon: Option<f64>,
    #[serde(default = "default_substep")]
    pub max_substep: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverySection {
    #[serde(default = "default_path")]
    pub path: String,
    #[serde(default = "default_order")]
    pub model_order: usize,
    pub groups: Option<usize>,
    #[serde(default = "default_cluster")]
    pub cluster_rtol: f64,
    #[serde(default = "default_lambda_rtol")]
    pub lambda_rtol: f64,
    /// Also run the other recovery path and report the disagreement.
    #[serde(default = "yes")]
    pub cross_check: bool,
}

impl Default for RecoverySection {
    fn default() -> Self {
        Self {
            path: default_path(),
            model_order: default_order(),
            groups: None,
            cluster_rtol: default_cluster(),
            lambda_rtol: default_lambda_rtol(),
            cross_check: true,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_lead() -> f64 {
    0.5
}
fn default_width() -> f64 {
    2.0
}
fn default_power() -> u32 {
    4
}
fn default_substep() -> f64 {
    ForwardOptions::default().max_substep
}
fn default_path() -> String {
    "pencil".into()
}
fn default_order() -> usize {
    RecoveryOptions::default().model_order
}
fn default_cluster() -> f64 {
    RecoveryOptions::default().cluster_rtol
}
fn default_lambda_rtol() -> f64 {
    RecoveryOptions::default().lambda_rtol
}

/// A parsed config together with its source text, for line-anchored errors.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub text: String,
    pub origin: String,
    pub config: ExperimentConfig,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1));
            match line {
                Some(l) => Error::Config(format!("{origin}:{l}: {}", e.message())),
                None => Error::Config(format!("{origin}: {}", e.message())),
            }
        })?;
        Ok(Self {
            text: text.to_string(),
            origin: origin.to_string(),
            config,
        })
    }

    /// `origin:line: msg`, anchored at the first line assigning `key`.
    fn error(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        let line = self.text.lines().position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
                || l == format!("[{key}]")
        });
        match line {
            Some(n) => Error::Config(format!("{}:{}: {msg}", self.origin, n + 1)),
            None => Error::Config(format!("{}: {msg}", self.origin)),
        }
    }
}

// ----------------------------------------------------------------- setup

/// Everything a run needs, built from a config.
pub struct Setup {
    pub map: MapKind,
    pub manifold: DiscreteManifold,
    pub decomp: SpectralDecomposition,
    pub w: Option<RegionMask>,
    pub s_in: Option<RegionMask>,
    pub s_out: Option<RegionMask>,
    pub probes: Vec<Vec<f64>>,
    pub bump: Bump,
    pub plan: Option<ProbePlan>,
    pub grid: TimeGrid,
    pub forward: ForwardOptions,
    pub recovery: RecoveryOptions,
}

impl Setup {
    pub fn build(cfg: &LoadedConfig, ov: &Overrides) -> Result<Self> {
        let c = &cfg.config;
        let ms = &c.manifold;
        let kind = match ms.kind.as_str() {
            "circle" => ManifoldKind::Circle,
            "torus" => ManifoldKind::Torus,
            "interval" => ManifoldKind::Interval,
            "rectangle" => ManifoldKind::Rectangle,
            other => return Err(cfg.error("kind", format!("unknown manifold kind `{other}`"))),
        };
        if !(ms.conformal > 0.0) {
            return Err(cfg.error("conformal", "conformal factor must be positive"));
        }
        let ny = ms.cells_y.unwrap_or(ms.cells);
        let spec = match kind {
            ManifoldKind::Circle => ManifoldSpec::circle(ms.cells),
            ManifoldKind::Torus => ManifoldSpec::torus(ms.cells, ny),
            ManifoldKind::Interval => {
                ManifoldSpec::interval(ms.cells, ms.length.unwrap_or(std::f64::consts::PI))
            }
            ManifoldKind::Rectangle => {
                let lx = ms.length.unwrap_or(std::f64::consts::PI);
                ManifoldSpec::rectangle(ms.cells, ny, lx, ms.length_y.unwrap_or(lx))
            }
        }
        .with_conformal(ConformalFactor::Constant(ms.conformal));
        let (manifold, op) =
            build_manifold(&spec).map_err(|e| cfg.error("cells", e))?;
        let full = eigendecompose(&manifold, &op, op.dim())?;
        let mut decomp = full.trusted(&manifold, ov.modes.or(ms.modes));
        if let Some(seed) = ov.seed.or(c.experiment.seed) {
            decomp = recombine_within_groups(&decomp, &mut ChaCha8Rng::seed_from_u64(seed));
        }

        let region = c.region.as_ref();
        let (mut w, mut s_in, mut s_out) = (None, None, None);
        let p = &c.probes;
        let bump = make_bump(p.start, p.start + p.width, p.power)
            .map_err(|e| cfg.error("width", e))?;
        let probes = match c.experiment.map {
            MapKind::Source => {
                if !manifold.is_closed() {
                    return Err(cfg.error("map", "source maps need a closed manifold"));
                }
                let r = region
                    .and_then(|r| r.w.as_ref().map(|w| (r, w)))
                    .ok_or_else(|| cfg.error("region", "region `w` is not defined"))?;
                let mask = match r.1.as_str() {
                    "all" => RegionMask::everything(&manifold),
                    "arc" => {
                        let len = r.0.len.ok_or_else(|| cfg.error("w", "arc region `w` needs `len`"))?;
                        RegionMask::arc(&manifold, r.0.start, len).map_err(|e| cfg.error("len", e))?
                    }
                    other => return Err(cfg.error("w", format!("region `{other}` does not exist"))),
                };
                let count = p
                    .count
                    .ok_or_else(|| cfg.error("probes", "source probes need `count`"))?;
                let probes = indicator_basis(&manifold, &mask, count).map_err(|e| cfg.error("count", e))?;
                w = Some(mask);
                probes
            }
            MapKind::Boundary => {
                if manifold.is_closed() {
                    return Err(cfg.error("map", "boundary maps need a manifold with boundary"));
                }
                let sides = |key: &str, names: Option<&Vec<String>>, role| -> Result<RegionMask> {
                    let names = names.ok_or_else(|| cfg.error("region", format!("region `{key}` is not defined")))?;
                    let mut nodes = Vec::new();
                    for n in names {
                        let side = manifold.boundary_side(n).ok_or_else(|| {
                            cfg.error(key, format!("region `{n}` does not exist on this {:?}", kind))
                        })?;
                        nodes.extend(side);
                    }
                    RegionMask::boundary(&manifold, role, nodes).map_err(|e| cfg.error(key, e))
                };
                let a = sides("s_in", region.and_then(|r| r.s_in.as_ref()), RegionRole::SIn)?;
                let b = sides("s_out", region.and_then(|r| r.s_out.as_ref()), RegionRole::SOut)?;
                let probes = nodal_basis(&manifold, &a);
                s_in = Some(a);
                s_out = Some(b);
                probes
            }
        };
        let source_kind = match c.experiment.map {
            MapKind::Source => SourceKind::Interior,
            MapKind::Boundary => SourceKind::Boundary,
        };

        let (plan, horizon) = match p.mode {
            ProbeMode::Battery => {
                let h = c.grid.horizon.ok_or_else(|| cfg.error("grid", "battery runs need `horizon`"))?;
                if h <= p.start + p.width {
                    return Err(cfg.error("horizon", "time horizon must exceed the probe support"));
                }
                (None, h)
            }
            ProbeMode::Train => {
                let spacing = p
                    .spacing
                    .ok_or_else(|| cfg.error("probes", "packet trains need `spacing`"))?;
                let plan = ProbePlan::evenly_spaced(probes.clone(), source_kind, spacing, p.start, p.width, p.power)
                    .map_err(|e| cfg.error("spacing", e))?;
                let h = c.grid.horizon.unwrap_or(plan.listening_end());
                if h <= plan.horizon() {
                    return Err(cfg.error("horizon", "time horizon must exceed the probe support"));
                }
                (Some(plan), h)
            }
        };
        let grid = TimeGrid::covering(c.grid.dt, horizon).map_err(|e| cfg.error("dt", e))?;

        let rs = &c.recovery;
        let path = match rs.path.as_str() {
            "pencil" => RecoveryPath::Pencil,
            "rational" => RecoveryPath::Rational,
            other => return Err(cfg.error("path", format!("unknown recovery path `{other}`"))),
        };
        let recovery = RecoveryOptions {
            path,
            model_order: rs.model_order,
            max_groups: rs.groups,
            cluster_rtol: rs.cluster_rtol,
            lambda_rtol: rs.lambda_rtol,
            ..Default::default()
        };
        Ok(Self {
            map: c.experiment.map,
            manifold,
            decomp,
            w,
            s_in,
            s_out,
            probes,
            bump,
            plan,
            grid,
            forward: ForwardOptions {
                max_substep: c.grid.max_substep,
            },
            recovery,
        })
    }

    fn role(&self) -> ChannelRole {
        match self.map {
            MapKind::Source => ChannelRole::Interior,
            MapKind::Boundary => ChannelRole::BoundaryOut,
        }
    }

    fn solve(&self, sources: &[SourceSpec]) -> Result<TimeSignal> {
        match self.map {
            MapKind::Source => solve_source_terms(
                &self.manifold,
                &self.decomp,
                sources,
                &self.grid,
                self.w.as_ref().expect("source setup has W"),
                &self.forward,
            ),
            MapKind::Boundary => solve_dtn_terms(
                &self.manifold,
                &self.decomp,
                sources,
                &self.grid,
                self.s_in.as_ref().expect("boundary setup has S_in"),
                self.s_out.as_ref().expect("boundary setup has S_out"),
                &self.forward,
            ),
        }
    }

    /// Named measurements: one per probe for a battery, one for a train.
    pub fn simulate(&self) -> Result<Vec<(String, TimeSignal)>> {
        match &self.plan {
            Some(plan) => Ok(vec![("train.csv".into(), self.solve(&plan.sources())?)]),
            None => {
                let kind = match self.map {
                    MapKind::Source => SourceKind::Interior,
                    MapKind::Boundary => SourceKind::Boundary,
                };
                self.probes
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let src = SourceSpec {
                            temporal: self.bump,
                            spatial: p.clone(),
                            kind,
                        };
                        Ok((format!("probe_{i:03}.csv"), self.solve(&[src])?))
                    })
                    .collect()
            }
        }
    }

    /// Spectral data computed directly from the simulation's eigendecomposition.
    pub fn direct(&self, groups: usize) -> Result<Bundle> {
        Ok(match self.map {
            MapKind::Source => Bundle::Source(SpectralData::direct(
                &self.manifold,
                &self.decomp,
                self.w.as_ref().expect("source setup has W"),
                groups,
                Some(&self.probes),
            )?),
            MapKind::Boundary => Bundle::Boundary(BoundarySpectralData::direct(
                &self.manifold,
                &self.decomp,
                self.s_in.as_ref().expect("boundary setup has S_in"),
                self.s_out.as_ref().expect("boundary setup has S_out"),
                groups,
            )?),
        })
    }

    fn assemble(&self, responses: &Responses, opts: &RecoveryOptions) -> Result<(Bundle, Vec<GroupDiagnostic>)> {
        Ok(match self.map {
            MapKind::Source => {
                let r = assemble_source_spectral_data(
                    &self.manifold,
                    self.w.as_ref().expect("source setup has W"),
                    &self.probes,
                    responses,
                    opts,
                )?;
                (Bundle::Source(r.data), r.diagnostics)
            }
            MapKind::Boundary => {
                let r = assemble_boundary_spectral_data(
                    &self.manifold,
                    self.s_in.as_ref().expect("boundary setup has S_in"),
                    self.s_out.as_ref().expect("boundary setup has S_out"),
                    &self.probes,
                    responses,
                    opts,
                )?;
                (Bundle::Boundary(r.data), r.diagnostics)
            }
        })
    }
}

// -------------------------------------------------------------- manifest

pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub overrides: Overrides,
    /// SHA-256 of every measurement file.
    pub files: BTreeMap<String, String>,
    /// Verbatim config the measurements were simulated from.
    pub config: String,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.is_dir() || fs::read_dir(dir)?.next().is_none() {
            return Err(Error::InvalidInput(format!(
                "measurement directory {} is missing or empty",
                dir.display()
            )));
        }
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| {
            Error::InvalidInput(format!("{}: no manifest ({e})", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fails on the first file whose checksum differs from the manifest.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (name, expected) in &self.files {
            let found = file_sha256(&dir.join(name))?;
            if &found != expected {
                return Err(Error::Checksum {
                    file: name.clone(),
                    expected: expected.clone(),
                    found,
                });
            }
        }
        Ok(())
    }
}

// ------------------------------------------------------------ operations

pub fn run_simulate(cfg: &LoadedConfig, out: &Path, ov: &Overrides) -> Result<Vec<PathBuf>> {
    let setup = Setup::build(cfg, ov)?;
    fs::create_dir_all(out)?;
    let mut files = BTreeMap::new();
    let mut written = Vec::new();
    for (name, signal) in setup.simulate()? {
        let path = out.join(&name);
        save_signal(&signal, &path)?;
        files.insert(name, file_sha256(&path)?);
        written.push(path);
    }
    let manifest = Manifest {
        overrides: *ov,
        files,
        config: cfg.text.clone(),
    };
    fs::write(
        out.join(MANIFEST),
        toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?,
    )?;
    Ok(written)
}

fn measurement_setup(dir: &Path, cfg: Option<&LoadedConfig>) -> Result<(Manifest, Setup)> {
    let manifest = Manifest::load(dir)?;
    manifest.verify(dir)?;
    let owned;
    let cfg = match cfg {
        Some(c) => c,
        None => {
            owned = LoadedConfig::parse(&manifest.config, &format!("{}", dir.join(MANIFEST).display()))?;
            &owned
        }
    };
    let setup = Setup::build(cfg, &manifest.overrides)?;
    Ok((manifest, setup))
}

fn load_measurements(dir: &Path, manifest: &Manifest, setup: &Setup) -> Result<Vec<TimeSignal>> {
    let names: Vec<&String> = manifest.files.keys().collect();
    let expected = if setup.plan.is_some() { 1 } else { setup.probes.len() };
    if names.len() != expected {
        return Err(Error::InvalidInput(format!(
            "manifest lists {} measurements, config needs {expected}",
            names.len()
        )));
    }
    names
        .into_iter()
        .map(|n| load_signal(&dir.join(n), setup.role()))
        .collect()
}

fn split(setup: &Setup, train: &TimeSignal) -> Result<Vec<PacketResponse>> {
    let plan = setup
        .plan
        .as_ref()
        .ok_or_else(|| Error::Config("probe splitting needs a packet-train config".into()))?;
    split_measurement(train, plan, setup.recovery.model_order)
}

#[derive(Serialize)]
struct DiagnosticRow {
    group: usize,
    lambda: f64,
    residual: f64,
    condition: f64,
    pair_consistency: f64,
    probe_spread: f64,
    margin: f64,
    flagged: bool,
    cross_check_lambda: Option<f64>,
    two_path_gap: Option<f64>,
}

/// Writes the bundle and `diagnostics.csv` under `out`; returns the bundle.
pub fn run_recover(dir: &Path, cfg: Option<&LoadedConfig>, out: &Path) -> Result<Bundle> {
    let (manifest, setup) = measurement_setup(dir, cfg)?;
    let signals = load_measurements(dir, &manifest, &setup)?;
    let packets;
    let responses = match &setup.plan {
        Some(_) => {
            packets = split(&setup, &signals[0])?;
            Responses::Packets(&packets)
        }
        None => Responses::Battery {
            signals: &signals,
            bump: &setup.bump,
        },
    };
    fs::create_dir_all(out)?;
    let (bundle, diagnostics) = match setup.assemble(&responses, &setup.recovery) {
        Ok(r) => r,
        Err(e) => {
            let empty = match setup.map {
                MapKind::Source => Bundle::Source(SpectralData::empty(setup.w.as_ref().unwrap(), &setup.manifold)),
                MapKind::Boundary => Bundle::Boundary(BoundarySpectralData::empty(
                    setup.s_in.as_ref().unwrap(),
                    setup.s_out.as_ref().unwrap(),
                )),
            };
            empty.save(out)?;
            fs::write(out.join("error.txt"), format!("{e}\n"))?;
            return Err(e);
        }
    };

    let cross = if cross_check_enabled(cfg, &manifest)? && setup.plan.is_none() {
        let other = RecoveryOptions {
            path: match setup.recovery.path {
                RecoveryPath::Pencil => RecoveryPath::Rational,
                RecoveryPath::Rational => RecoveryPath::Pencil,
            },
            ..setup.recovery.clone()
        };
        setup.assemble(&responses, &other).ok().map(|(b, _)| b)
    } else {
        None
    };

    bundle.save(out)?;
    let mut w = csv::Writer::from_path(out.join("diagnostics.csv"))?;
    for (k, (g, d)) in bundle.groups().iter().zip(&diagnostics).enumerate() {
        let nearest = cross.as_ref().and_then(|c| {
            c.groups()
                .iter()
                .map(|h| h.lambda)
                .min_by(|a, b| (a - g.lambda).abs().total_cmp(&(b - g.lambda).abs()))
        });
        w.serialize(DiagnosticRow {
            group: k,
            lambda: g.lambda,
            residual: d.residual,
            condition: d.condition,
            pair_consistency: d.pair_consistency,
            probe_spread: d.probe_spread,
            margin: d.margin,
            flagged: g.flagged,
            cross_check_lambda: nearest,
            two_path_gap: nearest.map(|l| crate::compare::relative_gap(l, g.lambda)),
        })?;
    }
    w.flush()?;
    Ok(bundle)
}

fn cross_check_enabled(cfg: Option<&LoadedConfig>, manifest: &Manifest) -> Result<bool> {
    Ok(match cfg {
        Some(c) => c.config.recovery.cross_check,
        None => LoadedConfig::parse(&manifest.config, MANIFEST)?.config.recovery.cross_check,
    })
}

/// Compares two bundles; with `out`, writes `report.txt` and `report.csv`.
pub fn run_compare(a: &Path, b: &Path, tol: Tolerances, out: Option<&Path>) -> Result<ComparisonReport> {
    let report = match (Bundle::load(a)?, Bundle::load(b)?) {
        (Bundle::Source(x), Bundle::Source(y)) => compare_spectral_data(&x, &y, tol)?,
        (Bundle::Boundary(x), Bundle::Boundary(y)) => compare_boundary_spectral_data(&x, &y, tol)?,
        _ => {
            return Err(Error::ChannelMismatch(
                "cannot compare a source bundle with a boundary bundle".into(),
            ))
        }
    };
    if let Some(out) = out {
        write_report(&report, out)?;
    }
    Ok(report)
}

fn write_report(report: &ComparisonReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("report.txt"), report.to_string())?;
    report.write_csv(fs::File::create(out.join("report.csv"))?)
}

#[derive(Serialize)]
struct PacketRow {
    packet: usize,
    support_start: f64,
    support_end: f64,
    window_start: f64,
    window_end: f64,
    terms: usize,
    residual: f64,
    flagged: bool,
    file: String,
}

/// Writes one reconstructed response per packet plus `packets.csv`.
pub fn run_probe_split(dir: &Path, cfg: Option<&LoadedConfig>, out: &Path) -> Result<Vec<PacketResponse>> {
    let (manifest, setup) = measurement_setup(dir, cfg)?;
    let signals = load_measurements(dir, &manifest, &setup)?;
    let packets = split(&setup, &signals[0])?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("packets.csv"))?;
    for p in &packets {
        let file = format!("packet_{:03}.csv", p.index);
        save_signal(&p.reconstruct()?, &out.join(&file))?;
        let (t0, t1) = p.bump.support();
        w.serialize(PacketRow {
            packet: p.index,
            support_start: t0,
            support_end: t1,
            window_start: p.window.0,
            window_end: p.window.1,
            terms: p.model.components.len(),
            residual: p.model.residual,
            flagged: p.flagged,
            file,
        })?;
    }
    w.flush()?;
    Ok(packets)
}

/// Simulate into `out/measurements`, recover into `out/recovered`, write the
/// direct data to `out/direct` and compare the two into `out/report`.
pub fn run_full(cfg: &LoadedConfig, out: &Path, ov: &Overrides, tol: Tolerances) -> Result<ComparisonReport> {
    let meas = out.join("measurements");
    run_simulate(cfg, &meas, ov)?;
    run_recover(&meas, Some(cfg), &out.join("recovered"))?;
    let setup = Setup::build(cfg, ov)?;
    let groups = cfg.config.recovery.groups.unwrap_or(setup.decomp.groups().len());
    setup.direct(groups)?.save(&out.join("direct"))?;
    run_compare(&out.join("recovered"), &out.join("direct"), tol, Some(&out.join("report")))
}
