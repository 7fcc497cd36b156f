//! Input bundles, reports, plots and run manifests.

mod manifest;
mod report;
mod svg;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manifest::{hash_file, RunManifest, MANIFEST_FILE};
pub use report::{
    write_scenario_plots, write_solution_reports, write_sweep_reports, write_voi_reports, ReportError,
};
pub use svg::{k1_coverage_svg, pareto_svg, scenario_svg};

use crate::model::{
    build_instance, ModelConfig, ModelError, ProblemInstance, Provenance, ResourceKind, ResourceType, Scenario,
    SpillEvent, Station, Weights,
};
use crate::scenario::{fit_exponential, generate_scenarios, SamplingConfig, ScenarioError, ScenarioSet};
use crate::solve::{BranchRule, SolverOptions};

pub const STATIONS_FILE: &str = "stations.csv";
pub const SPILLS_FILE: &str = "spills.csv";
pub const RESOURCES_FILE: &str = "resources.csv";
pub const SCENARIOS_FILE: &str = "scenarios.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{file}:{line}: column `{column}`: {message}")]
    ParseError {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{file}: {message}")]
    SchemaError { file: String, message: String },
    #[error("{file}: {message}")]
    CrossRefError { file: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("data check failed: {0}")]
    Model(#[from] ModelError),
    #[error("scenario generation failed: {0}")]
    Scenario(#[from] ScenarioError),
}

impl InputError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        InputError::Io { path: path.display().to_string(), source }
    }
}

/// Paths of the files that make up one problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputBundle {
    pub stations: PathBuf,
    pub spills: PathBuf,
    pub resources: PathBuf,
    pub scenarios: PathBuf,
    pub config: PathBuf,
}

impl InputBundle {
    pub fn from_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        InputBundle {
            stations: d.join(STATIONS_FILE),
            spills: d.join(SPILLS_FILE),
            resources: d.join(RESOURCES_FILE),
            scenarios: d.join(SCENARIOS_FILE),
            config: d.join(CONFIG_FILE),
        }
    }

    /// Files present on disk, in a fixed order.
    pub fn existing_files(&self) -> Vec<&Path> {
        [&self.stations, &self.spills, &self.resources, &self.scenarios, &self.config]
            .into_iter()
            .map(PathBuf::as_path)
            .filter(|p| p.exists())
            .collect()
    }
}

fn default_time_limit() -> Option<f64> {
    None
}

/// Solver settings as stored in `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub rel_gap_tol: f64,
    pub int_tol: f64,
    pub feas_tol: f64,
    pub node_limit: usize,
    #[serde(default = "default_time_limit")]
    pub time_limit_secs: Option<f64>,
    #[serde(default)]
    pub branch_rule: BranchRule,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverSettings {
            rel_gap_tol: d.rel_gap_tol,
            int_tol: d.int_tol,
            feas_tol: d.feas_tol,
            node_limit: d.node_limit,
            time_limit_secs: None,
            branch_rule: d.branch_rule,
            seed: d.seed,
        }
    }
}

impl SolverSettings {
    pub fn to_options(&self) -> SolverOptions {
        SolverOptions {
            rel_gap_tol: self.rel_gap_tol,
            int_tol: self.int_tol,
            feas_tol: self.feas_tol,
            node_limit: self.node_limit,
            time_limit: self.time_limit_secs.map(Duration::from_secs_f64),
            branch_rule: self.branch_rule,
            seed: self.seed,
            trace: false,
        }
    }
}

/// Contents of `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub model: ModelConfig,
    pub weights: Weights,
    #[serde(default)]
    pub sampling: SamplingConfig,
    /// Scenario probabilities, deterministic scenario first.
    pub probabilities: Vec<f64>,
    #[serde(default)]
    pub solver: SolverSettings,
}

/// A parsed bundle.
#[derive(Debug, Clone)]
pub struct ParsedInputs {
    pub instance: ProblemInstance,
    pub config: BundleConfig,
    /// True when `scenarios.json` was absent and scenarios were sampled.
    pub generated_scenarios: bool,
}

struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Table, InputError> {
        let file = path.file_name().map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned());
        let text = fs::read_to_string(path).map_err(|e| InputError::io(path, e))?;
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers: Vec<String> = rd
            .headers()
            .map_err(|e| csv_error(&file, &e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| csv_error(&file, &e))?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Table { file, headers, rows })
    }

    fn require(&self, columns: &[&str]) -> Result<(), InputError> {
        let missing: Vec<&str> = columns.iter().copied().filter(|c| !self.headers.iter().any(|h| h == c)).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(InputError::SchemaError {
                file: self.file.clone(),
                message: format!("missing column{} {}", if missing.len() > 1 { "s" } else { "" }, missing.iter().map(|c| format!("`{c}`")).collect::<Vec<_>>().join(", ")),
            })
        }
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn text(&self, row: usize, name: &str) -> String {
        let (_, rec) = &self.rows[row];
        self.col(name).and_then(|c| rec.get(c)).unwrap_or("").to_string()
    }

    fn parse_err(&self, row: usize, name: &str, message: String) -> InputError {
        InputError::ParseError {
            file: self.file.clone(),
            line: self.rows[row].0,
            column: name.to_string(),
            message,
        }
    }

    fn f64(&self, row: usize, name: &str) -> Result<f64, InputError> {
        let s = self.text(row, name);
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.parse_err(row, name, format!("`{s}` is not a finite number"))),
        }
    }

    fn f64_or(&self, row: usize, name: &str, default: f64) -> Result<f64, InputError> {
        if self.col(name).is_none() || self.text(row, name).is_empty() {
            Ok(default)
        } else {
            self.f64(row, name)
        }
    }

    fn id(&self, row: usize, name: &str) -> Result<usize, InputError> {
        let s = self.text(row, name);
        s.parse::<usize>()
            .map_err(|_| self.parse_err(row, name, format!("`{s}` is not a nonnegative integer id")))
    }

    fn unique_ids(&self) -> Result<Vec<usize>, InputError> {
        let mut seen = HashSet::new();
        let mut ids = Vec::with_capacity(self.rows.len());
        for row in 0..self.rows.len() {
            let id = self.id(row, "id")?;
            if !seen.insert(id) {
                return Err(InputError::SchemaError {
                    file: self.file.clone(),
                    message: format!("duplicate id {id} on line {}", self.rows[row].0),
                });
            }
            ids.push(id);
        }
        Ok(ids)
    }
}

fn csv_error(file: &str, e: &csv::Error) -> InputError {
    let line = e.position().map_or(0, |p| p.line());
    InputError::ParseError {
        file: file.to_string(),
        line,
        column: String::new(),
        message: e.to_string(),
    }
}

pub const RESOURCE_COLUMNS: [&str; 7] = [
    "id",
    "name",
    "kind",
    "setup_time_per_unit",
    "unit_cost",
    "capacity_per_unit",
    "setup_unit_size",
];
pub const STATION_COLUMNS: [&str; 6] = ["id", "name", "lat", "lon", "opening_cost", "base_delay"];
pub const SPILL_COLUMNS: [&str; 5] = ["id", "lat", "lon", "base_volume", "base_esi"];

pub fn read_resources(path: &Path) -> Result<Vec<ResourceType>, InputError> {
    let t = Table::read(path)?;
    t.require(&RESOURCE_COLUMNS[..4])?;
    let ids = t.unique_ids()?;
    let mut out = Vec::new();
    for (row, id) in ids.into_iter().enumerate() {
        let kind_text = t.text(row, "kind");
        let kind = ResourceKind::parse(&kind_text).ok_or_else(|| {
            t.parse_err(row, "kind", format!("`{kind_text}` is not one of boom, skimmer, dispersant"))
        })?;
        out.push(ResourceType {
            id,
            name: t.text(row, "name"),
            kind,
            setup_time_per_unit: t.f64(row, "setup_time_per_unit")?,
            unit_cost: t.f64_or(row, "unit_cost", 0.0)?,
            capacity_per_unit: t.f64_or(row, "capacity_per_unit", 0.0)?,
            setup_unit_size: t.f64_or(row, "setup_unit_size", 1.0)?,
        });
    }
    let mut names = HashSet::new();
    for r in &out {
        if r.name.is_empty() || !names.insert(r.name.clone()) {
            return Err(InputError::SchemaError {
                file: t.file.clone(),
                message: format!("resource names must be unique and nonempty (`{}`)", r.name),
            });
        }
    }
    Ok(out)
}

/// Stations carry one inventory column per resource, named after it.
pub fn read_stations(path: &Path, resources: &[ResourceType]) -> Result<Vec<Station>, InputError> {
    let t = Table::read(path)?;
    let mut required: Vec<&str> = STATION_COLUMNS[..5].to_vec();
    required.extend(resources.iter().map(|r| r.name.as_str()));
    t.require(&required)?;
    let ids = t.unique_ids()?;
    let mut out = Vec::new();
    for (row, id) in ids.into_iter().enumerate() {
        out.push(Station {
            id,
            name: t.text(row, "name"),
            lat: t.f64(row, "lat")?,
            lon: t.f64(row, "lon")?,
            opening_cost: t.f64(row, "opening_cost")?,
            inventory: resources.iter().map(|r| t.f64(row, &r.name)).collect::<Result<_, _>>()?,
            base_delay: t.f64_or(row, "base_delay", 15.0)?,
        });
    }
    Ok(out)
}

pub fn read_spills(path: &Path) -> Result<Vec<SpillEvent>, InputError> {
    let t = Table::read(path)?;
    t.require(&SPILL_COLUMNS)?;
    let ids = t.unique_ids()?;
    ids.into_iter()
        .enumerate()
        .map(|(row, id)| {
            Ok(SpillEvent {
                id,
                lat: t.f64(row, "lat")?,
                lon: t.f64(row, "lon")?,
                base_volume: t.f64(row, "base_volume")?,
                base_esi: t.f64(row, "base_esi")?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SpillRecord {
    spill: usize,
    volume: f64,
    esi: f64,
    demand: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScenarioRecord {
    id: usize,
    probability: f64,
    provenance: Provenance,
    spills: Vec<SpillRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScenarioFile {
    scenarios: Vec<ScenarioRecord>,
}

/// Resolves spill ids and resource names in a scenario file.
pub fn read_scenarios(
    path: &Path,
    spills: &[SpillEvent],
    resources: &[ResourceType],
) -> Result<Vec<Scenario>, InputError> {
    let file = SCENARIOS_FILE.to_string();
    let text = fs::read_to_string(path).map_err(|e| InputError::io(path, e))?;
    let parsed: ScenarioFile = serde_json::from_str(&text).map_err(|e| InputError::ParseError {
        file: file.clone(),
        line: e.line() as u64,
        column: e.column().to_string(),
        message: e.to_string(),
    })?;
    let spill_index: HashMap<usize, usize> = spills.iter().enumerate().map(|(k, s)| (s.id, k)).collect();
    let res_index: HashMap<&str, usize> = resources.iter().enumerate().map(|(k, r)| (r.name.as_str(), k)).collect();
    let no = spills.len();
    let nr = resources.len();
    let mut out = Vec::new();
    for rec in parsed.scenarios {
        let mut volume = vec![f64::NAN; no];
        let mut esi = vec![f64::NAN; no];
        let mut demand = vec![vec![f64::NAN; nr]; no];
        for s in &rec.spills {
            let o = *spill_index.get(&s.spill).ok_or_else(|| InputError::CrossRefError {
                file: file.clone(),
                message: format!("scenario {} references unknown spill id {}", rec.id, s.spill),
            })?;
            if !volume[o].is_nan() {
                return Err(InputError::SchemaError {
                    file: file.clone(),
                    message: format!("scenario {} lists spill {} twice", rec.id, s.spill),
                });
            }
            volume[o] = s.volume;
            esi[o] = s.esi;
            for (name, &q) in &s.demand {
                let r = *res_index.get(name.as_str()).ok_or_else(|| InputError::CrossRefError {
                    file: file.clone(),
                    message: format!("scenario {} spill {} references unknown resource `{name}`", rec.id, s.spill),
                })?;
                demand[o][r] = q;
            }
        }
        for o in 0..no {
            if volume[o].is_nan() {
                return Err(InputError::SchemaError {
                    file: file.clone(),
                    message: format!("scenario {} is missing spill {}", rec.id, spills[o].id),
                });
            }
            if let Some(r) = demand[o].iter().position(|d| d.is_nan()) {
                return Err(InputError::SchemaError {
                    file: file.clone(),
                    message: format!(
                        "scenario {} spill {} is missing demand for `{}`",
                        rec.id, spills[o].id, resources[r].name
                    ),
                });
            }
        }
        out.push(Scenario {
            id: rec.id,
            probability: rec.probability,
            provenance: rec.provenance,
            spill_volume: volume,
            spill_esi: esi,
            demand,
        });
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BundleConfig, InputError> {
    let text = fs::read_to_string(path).map_err(|e| InputError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        let message = e.to_string();
        if e.is_data() {
            InputError::SchemaError { file: CONFIG_FILE.into(), message }
        } else {
            InputError::ParseError {
                file: CONFIG_FILE.into(),
                line: e.line() as u64,
                column: e.column().to_string(),
                message,
            }
        }
    })
}

/// Scenarios sampled from the historical spills per the bundle config.
pub fn sample_scenarios(
    spills: &[SpillEvent],
    resources: &[ResourceType],
    config: &BundleConfig,
) -> Result<ScenarioSet, InputError> {
    let volumes: Vec<f64> = spills.iter().map(|s| s.base_volume).collect();
    let fitted = fit_exponential(&volumes)?;
    Ok(generate_scenarios(
        spills,
        &fitted,
        &config.sampling,
        &config.probabilities,
        resources,
        &config.model,
    )?)
}

/// Reads and validates a bundle. A missing scenario file is replaced by
/// freshly sampled scenarios.
pub fn parse_inputs(bundle: &InputBundle) -> Result<ParsedInputs, InputError> {
    let config = read_config(&bundle.config)?;
    let resources = read_resources(&bundle.resources)?;
    let stations = read_stations(&bundle.stations, &resources)?;
    let spills = read_spills(&bundle.spills)?;
    let (scenarios, generated) = if bundle.scenarios.exists() {
        (read_scenarios(&bundle.scenarios, &spills, &resources)?, false)
    } else {
        (sample_scenarios(&spills, &resources, &config)?.scenarios, true)
    };
    let instance = build_instance(
        stations,
        spills,
        resources,
        scenarios,
        config.weights,
        config.model.clone(),
    )?;
    instance.check_prep_times()?;
    Ok(ParsedInputs {
        instance,
        config,
        generated_scenarios: generated,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), InputError> {
    fs::write(path, bytes).map_err(|e| InputError::io(path, e))
}

fn csv_bytes(header: Vec<String>, rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    // Writing to memory cannot fail.
    wr.write_record(&header).expect("in-memory csv");
    for r in rows {
        wr.write_record(&r).expect("in-memory csv");
    }
    wr.into_inner().expect("in-memory csv")
}

pub fn scenarios_json(scenarios: &[Scenario], spills: &[SpillEvent], resources: &[ResourceType]) -> String {
    let file = ScenarioFile {
        scenarios: scenarios
            .iter()
            .map(|s| ScenarioRecord {
                id: s.id,
                probability: s.probability,
                provenance: s.provenance,
                spills: spills
                    .iter()
                    .enumerate()
                    .map(|(o, sp)| SpillRecord {
                        spill: sp.id,
                        volume: s.spill_volume[o],
                        esi: s.spill_esi[o],
                        demand: resources.iter().enumerate().map(|(r, res)| (res.name.clone(), s.demand[o][r])).collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("scenario records serialize");
    out.push('\n');
    out
}

pub fn write_scenarios(
    path: &Path,
    scenarios: &[Scenario],
    spills: &[SpillEvent],
    resources: &[ResourceType],
) -> Result<(), InputError> {
    write_file(path, scenarios_json(scenarios, spills, resources).as_bytes())
}

/// Writes all five bundle files for `instance` into `dir`.
pub fn write_bundle(dir: &Path, instance: &ProblemInstance, config: &BundleConfig) -> Result<(), InputError> {
    fs::create_dir_all(dir).map_err(|e| InputError::io(dir, e))?;
    let b = InputBundle::from_dir(dir);
    let res = &instance.resources;
    write_file(
        &b.resources,
        &csv_bytes(
            RESOURCE_COLUMNS.iter().map(|s| s.to_string()).collect(),
            res.iter()
                .map(|r| {
                    vec![
                        r.id.to_string(),
                        r.name.clone(),
                        r.kind.as_str().to_string(),
                        r.setup_time_per_unit.to_string(),
                        r.unit_cost.to_string(),
                        r.capacity_per_unit.to_string(),
                        r.setup_unit_size.to_string(),
                    ]
                })
                .collect(),
        ),
    )?;
    let mut header: Vec<String> = STATION_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(res.iter().map(|r| r.name.clone()));
    write_file(
        &b.stations,
        &csv_bytes(
            header,
            instance
                .stations
                .iter()
                .map(|s| {
                    let mut row = vec![
                        s.id.to_string(),
                        s.name.clone(),
                        s.lat.to_string(),
                        s.lon.to_string(),
                        s.opening_cost.to_string(),
                        s.base_delay.to_string(),
                    ];
                    row.extend(s.inventory.iter().map(f64::to_string));
                    row
                })
                .collect(),
        ),
    )?;
    write_file(
        &b.spills,
        &csv_bytes(
            SPILL_COLUMNS.iter().map(|s| s.to_string()).collect(),
            instance
                .spills
                .iter()
                .map(|s| {
                    vec![
                        s.id.to_string(),
                        s.lat.to_string(),
                        s.lon.to_string(),
                        s.base_volume.to_string(),
                        s.base_esi.to_string(),
                    ]
                })
                .collect(),
        ),
    )?;
    write_scenarios(&b.scenarios, &instance.scenarios, &instance.spills, res)?;
    let mut cfg = config.clone();
    cfg.model = instance.config.clone();
    cfg.weights = instance.weights;
    let mut text = serde_json::to_string_pretty(&cfg).expect("config serializes");
    text.push('\n');
    write_file(&b.config, text.as_bytes())
}
