//! On-disk formats: pretty JSON for reports, CSV for curves and traces,
//! little-endian f64 blobs with a JSON header for fields, and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use abplab_core::fields::{GridField, GridSpec, RadialProfile};
use abplab_core::flow::FlowState;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{RunError, RunResult};

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> RunResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| RunError::Config(format!("serialization: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> RunResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| RunError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| RunError::io(path, e))
}

fn read_bytes(path: &Path) -> RunResult<Vec<u8>> {
    fs::read(path).map_err(|e| RunError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> RunResult<()> {
    write_bytes(path, &json_bytes(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> RunResult<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

/// 17 significant digits, `.` decimal point, no locale.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Numeric CSV table with a fixed header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> RunResult<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| RunError::Config("empty CSV".into()))?;
        let header: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| RunError::Config(format!("CSV line {}: {e}", i + 2))))
                .collect::<RunResult<Vec<f64>>>()?;
            if row.len() != header.len() {
                return Err(RunError::Config(format!("CSV line {} has {} cells, header has {}", i + 2, row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn write_csv(path: &Path, table: &Table) -> RunResult<()> {
    write_bytes(path, table.to_csv().as_bytes())
}

pub fn read_csv(path: &Path) -> RunResult<Table> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    Table::parse(&text)
}

/// How the flat value array of a field maps to space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldLayout {
    /// Cell-centred grid on `[-half_width, half_width]^{2n}`, row-major in `(x1, y1, x2, y2)`.
    Grid { n: usize, resolution: usize, half_width: f64 },
    /// Radial profile on uniform nodes of `[0, 1]`.
    Radial { nodes: usize },
    /// Periodic grid on `[0, 1)^{2n}`.
    Torus { n: usize, resolution: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format: String,
    pub layout: FieldLayout,
    pub len: usize,
    pub data: String,
}

pub const FIELD_FORMAT: &str = "f64-le";

/// Writes `<stem>.bin` and `<stem>.json`; returns both file names.
pub fn write_field(dir: &Path, stem: &str, layout: FieldLayout, values: &[f64]) -> RunResult<[String; 2]> {
    let bin = format!("{stem}.bin");
    let head = format!("{stem}.json");
    let mut bytes = Vec::with_capacity(8 * values.len());
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes(&dir.join(&bin), &bytes)?;
    let file_name = Path::new(&bin).file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let header = FieldHeader { format: FIELD_FORMAT.into(), layout, len: values.len(), data: file_name };
    write_json(&dir.join(&head), &header)?;
    Ok([head, bin])
}

pub fn read_field(dir: &Path, stem: &str) -> RunResult<(FieldHeader, Vec<f64>)> {
    let head_path = dir.join(format!("{stem}.json"));
    let header: FieldHeader = read_json(&head_path)?;
    if header.format != FIELD_FORMAT {
        return Err(RunError::Config(format!("{}: unsupported format {}", head_path.display(), header.format)));
    }
    let bin_path = head_path.with_file_name(&header.data);
    let bytes = read_bytes(&bin_path)?;
    if bytes.len() != 8 * header.len {
        return Err(RunError::Config(format!("{}: expected {} values, found {} bytes", bin_path.display(), header.len, bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    Ok((header, values))
}

pub fn write_grid_field(dir: &Path, stem: &str, u: &GridField) -> RunResult<[String; 2]> {
    let s = u.spec();
    let layout = FieldLayout::Grid { n: s.dim(), resolution: s.resolution(), half_width: s.half_width() };
    write_field(dir, stem, layout, u.values())
}

pub fn read_grid_field(dir: &Path, stem: &str) -> RunResult<GridField> {
    match read_field(dir, stem)? {
        (FieldHeader { layout: FieldLayout::Grid { n, resolution, half_width }, .. }, values) => {
            Ok(GridField::from_values(GridSpec::with_half_width(n, resolution, half_width)?, values)?)
        }
        (h, _) => Err(RunError::Config(format!("{stem}: expected a grid field, found {:?}", h.layout))),
    }
}

pub fn write_profile(dir: &Path, stem: &str, p: &RadialProfile) -> RunResult<[String; 2]> {
    write_field(dir, stem, FieldLayout::Radial { nodes: p.len() }, p.samples())
}

pub fn read_profile(dir: &Path, stem: &str) -> RunResult<RadialProfile> {
    match read_field(dir, stem)? {
        (FieldHeader { layout: FieldLayout::Radial { .. }, .. }, values) => Ok(RadialProfile::new(values)?),
        (h, _) => Err(RunError::Config(format!("{stem}: expected a radial profile, found {:?}", h.layout))),
    }
}

pub const TRACE_HEADER: [&str; 6] = ["t", "min_neg_ut", "max_neg_ut", "max_grad", "energy", "rhs_energy"];

pub fn flow_trace(state: &FlowState) -> Table {
    let mut t = Table::new(&TRACE_HEADER);
    for r in &state.records {
        t.push(vec![r.t, r.min_neg_ut, r.max_neg_ut, r.max_grad, r.energy, r.rhs_energy]);
    }
    t
}

/// `state.json` of a flow directory: everything but the slice arrays,
/// which live in their own field files.
#[derive(Serialize, Deserialize)]
struct FlowIndex {
    config: abplab_core::flow::FlowConfig,
    barrier_scale: f64,
    slice_times: Vec<f64>,
    slices: Vec<String>,
    violations: Vec<String>,
    records: Vec<abplab_core::flow::FlowRecord>,
}

fn slice_layout(state: &FlowState, len: usize) -> RunResult<FieldLayout> {
    Ok(match state.config.geometry {
        abplab_core::flow::Geometry::Radial => FieldLayout::Radial { nodes: len },
        abplab_core::flow::Geometry::Disc => {
            let s = state.grid_spec()?;
            FieldLayout::Grid { n: 1, resolution: s.resolution(), half_width: s.half_width() }
        }
    })
}

/// Writes a flow directory and returns the file names relative to `dir`.
pub fn write_flow_state(dir: &Path, state: &FlowState) -> RunResult<Vec<String>> {
    let mut files = Vec::new();
    let mut stems = Vec::new();
    for (k, slice) in state.slices.iter().enumerate() {
        let stem = format!("slice_{k:04}");
        files.extend(write_field(dir, &stem, slice_layout(state, slice.len())?, slice)?);
        stems.push(stem);
    }
    let index = FlowIndex {
        config: state.config.clone(),
        barrier_scale: state.barrier_scale,
        slice_times: state.slice_times.clone(),
        slices: stems,
        violations: state.violations.clone(),
        records: state.records.clone(),
    };
    write_json(&dir.join("state.json"), &index)?;
    write_csv(&dir.join("trace.csv"), &flow_trace(state))?;
    files.push("state.json".into());
    files.push("trace.csv".into());
    Ok(files)
}

pub fn read_flow_state(dir: &Path) -> RunResult<FlowState> {
    let index: FlowIndex = read_json(&dir.join("state.json"))?;
    let mut slices = Vec::with_capacity(index.slices.len());
    for stem in &index.slices {
        slices.push(read_field(dir, stem)?.1);
    }
    Ok(FlowState {
        config: index.config,
        barrier_scale: index.barrier_scale,
        records: index.records,
        slice_times: index.slice_times,
        slices,
        violations: index.violations,
    })
}

/// SHA-256 of the canonical JSON form (object keys sorted), so the hash
/// does not depend on the key order of the source file.
pub fn config_hash<T: Serialize>(config: &T) -> RunResult<String> {
    let value = serde_json::to_value(config).map_err(|e| RunError::Config(format!("config: {e}")))?;
    let bytes = serde_json::to_vec(&value).map_err(|e| RunError::Config(format!("config: {e}")))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment_id: String,
    pub module: String,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub tolerances: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, bool>,
    pub passed: bool,
}

impl RunManifest {
    /// Output files that are listed but missing under `root`.
    pub fn missing_outputs(&self, root: &Path) -> Vec<String> {
        self.outputs.iter().filter(|f| !root.join(f).is_file()).cloned().collect()
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Collects outputs, tolerances and verdicts of one run under a root directory.
#[derive(Debug)]
pub struct Emitter {
    root: PathBuf,
    outputs: Vec<String>,
    tolerances: BTreeMap<String, f64>,
    verdicts: BTreeMap<String, bool>,
}

impl Emitter {
    pub fn new(root: &Path) -> RunResult<Self> {
        fs::create_dir_all(root).map_err(|e| RunError::io(root, e))?;
        Ok(Emitter { root: root.to_path_buf(), outputs: Vec::new(), tolerances: BTreeMap::new(), verdicts: BTreeMap::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> RunResult<()> {
        write_json(&self.root.join(rel), value)?;
        self.outputs.push(rel.into());
        Ok(())
    }

    pub fn csv(&mut self, rel: &str, table: &Table) -> RunResult<()> {
        write_csv(&self.root.join(rel), table)?;
        self.outputs.push(rel.into());
        Ok(())
    }

    pub fn profile(&mut self, stem: &str, p: &RadialProfile) -> RunResult<()> {
        let files = write_profile(&self.root, stem, p)?;
        self.outputs.extend(files);
        Ok(())
    }

    pub fn flow_state(&mut self, rel_dir: &str, state: &FlowState) -> RunResult<()> {
        let files = write_flow_state(&self.root.join(rel_dir), state)?;
        self.outputs.extend(files.into_iter().map(|f| format!("{rel_dir}/{f}")));
        Ok(())
    }

    pub fn tolerance(&mut self, name: &str, value: f64) {
        self.tolerances.insert(name.into(), value);
    }

    pub fn verdict(&mut self, name: &str, pass: bool) {
        self.verdicts.insert(name.into(), pass);
    }

    pub fn verdicts(&self) -> &BTreeMap<String, bool> {
        &self.verdicts
    }

    /// Writes `manifest.json` after checking that every listed output exists.
    pub fn finish(mut self, experiment_id: &str, module: &str, config_hash: String, inputs: BTreeMap<String, String>) -> RunResult<RunManifest> {
        self.outputs.sort();
        self.outputs.dedup();
        let manifest = RunManifest {
            experiment_id: experiment_id.into(),
            module: module.into(),
            config_hash,
            inputs,
            outputs: self.outputs,
            passed: self.verdicts.values().all(|&v| v),
            tolerances: self.tolerances,
            verdicts: self.verdicts,
        };
        let missing = manifest.missing_outputs(&self.root);
        if !missing.is_empty() {
            return Err(RunError::io(self.root.join(&missing[0]), std::io::Error::new(std::io::ErrorKind::NotFound, "listed output missing")));
        }
        write_json(&self.root.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }
}
