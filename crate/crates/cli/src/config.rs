//! Parameter file loading.
//!
//! The file is parsed into a small owned tree that remembers the line of
//! every key. Resolution walks the tree once, collecting every problem it
//! finds as a [`Diagnostic`], and only returns a [`Config`] when there were
//! none. The tree is kept so the tuner can substitute values by key path and
//! resolve again.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use spikeforge_core::calibration::{calibrate_from_frequency, PulseDrive};
use spikeforge_core::encoding::{Encoder, PolarityMode, RateMap};
use spikeforge_core::engine::{
    ConnType, InitWeights, LayerModels, LayerSpec, Network, NetworkSpec, SimConfig,
};
use spikeforge_core::expr::Expression;
use spikeforge_core::grid::num_steps;
use spikeforge_core::interp::PiecewiseLinear;
use spikeforge_core::neuron::{NeuronError, NeuronModel, NeuronParams, RestLevels, SpikeWaveforms};
use spikeforge_core::synapse::{
    CircuitError, CircuitModel, CircuitParams, DeviceKind, DeviceModel, FamilyAxis, IdenticalPulse,
    PresenceSet, PulseFamily, SpikePresence,
};
use spikeforge_core::tuner::{GaConfig, ParamKind, ParamRange, Scale};
use spikeforge_core::vocab;
use spikeforge_core::waveform::Waveform;
use toml::de::{DeTable, DeValue};

use crate::io::{self, DatasetFormat};

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub section: String,
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        write!(f, "[{}]", self.section)?;
        if let Some(key) = &self.key {
            write!(f, " {key}")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Every problem found in one parameter file.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub file: PathBuf,
    pub items: Vec<Diagnostic>,
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.items.len();
        write!(
            f,
            "{}: {n} configuration error{}",
            self.file.display(),
            if n == 1 { "" } else { "s" }
        )?;
        for d in &self.items {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Array(Vec<Item>),
    Table(Table),
    Datetime,
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Str(_) => "a string",
            Value::Int(_) => "an integer",
            Value::Float(_) => "a float",
            Value::Bool(_) => "a boolean",
            Value::Array(_) => "an array",
            Value::Table(_) => "a table",
            Value::Datetime => "a datetime",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub value: Value,
    pub line: usize,
}

pub type Table = BTreeMap<String, Item>;

/// Parsed parameter file.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    root: Table,
}

struct Lines(Vec<usize>);

impl Lines {
    fn new(text: &str) -> Self {
        Self(
            std::iter::once(0)
                .chain(text.match_indices('\n').map(|(i, _)| i + 1))
                .collect(),
        )
    }

    fn of(&self, offset: usize) -> usize {
        self.0.partition_point(|&s| s <= offset)
    }
}

fn convert(value: &DeValue<'_>, line: usize, lines: &Lines) -> Result<Value, String> {
    Ok(match value {
        DeValue::String(s) => Value::Str(s.to_string()),
        DeValue::Integer(i) => Value::Int(
            i64::from_str_radix(i.as_str(), i.radix())
                .map_err(|_| format!("line {line}: integer {i} out of range"))?,
        ),
        DeValue::Float(f) => Value::Float(
            f.as_str()
                .parse()
                .map_err(|_| format!("line {line}: bad float {f}"))?,
        ),
        DeValue::Boolean(b) => Value::Bool(*b),
        DeValue::Datetime(_) => Value::Datetime,
        DeValue::Array(items) => Value::Array(
            items
                .iter()
                .map(|v| {
                    let line = v.span().start;
                    let line = lines.of(line);
                    Ok(Item {
                        value: convert(v.get_ref(), line, lines)?,
                        line,
                    })
                })
                .collect::<Result<_, String>>()?,
        ),
        DeValue::Table(t) => Value::Table(convert_table(t, lines)?),
    })
}

fn convert_table(table: &DeTable<'_>, lines: &Lines) -> Result<Table, String> {
    table
        .iter()
        .map(|(k, v)| {
            let line = lines.of(k.span().start);
            Ok((
                k.get_ref().to_string(),
                Item {
                    value: convert(v.get_ref(), line, lines)?,
                    line,
                },
            ))
        })
        .collect()
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, Diagnostic> {
        let lines = Lines::new(text);
        let fail = |line: Option<usize>, message: String| Diagnostic {
            section: "file".into(),
            key: None,
            line,
            message,
        };
        let table = DeTable::parse(text).map_err(|e| {
            fail(
                e.span().map(|s| lines.of(s.start)),
                e.message().trim().to_string(),
            )
        })?;
        let root = convert_table(table.get_ref(), &lines).map_err(|m| fail(None, m))?;
        Ok(Self { root })
    }

    /// Sets the numeric key at a dotted path such as `neuron.lif.tau`. The
    /// enclosing section must exist; the key may be new.
    pub fn set(&mut self, path: &str, value: f64, integer: bool) -> Result<(), String> {
        let parts: Vec<&str> = path.split('.').collect();
        let (key, sections) = parts
            .split_last()
            .filter(|(_, s)| !s.is_empty())
            .ok_or_else(|| {
                format!("`{path}` must name a key inside a section, like `neuron.lif.tau`")
            })?;
        let mut table = &mut self.root;
        for (depth, part) in sections.iter().enumerate() {
            table = match table.get_mut(*part).map(|i| &mut i.value) {
                Some(Value::Table(t)) => t,
                _ => return Err(format!("no section [{}]", sections[..=depth].join("."))),
            };
        }
        let line = match table.get(*key) {
            Some(Item {
                value: Value::Int(_) | Value::Float(_),
                line,
            }) => *line,
            Some(other) => {
                return Err(format!(
                    "`{path}` holds {}, not a number",
                    other.value.kind()
                ))
            }
            None => 0,
        };
        let value = if integer {
            Value::Int(value as i64)
        } else {
            Value::Float(value)
        };
        table.insert((*key).to_string(), Item { value, line });
        Ok(())
    }
}

type Diags = RefCell<Vec<Diagnostic>>;

/// Reads one section, remembering which keys were asked for so that
/// anything else can be reported as unknown.
struct Sec<'a> {
    diags: &'a Diags,
    name: String,
    table: Option<&'a Table>,
    line: Option<usize>,
    known: RefCell<Vec<&'static str>>,
}

fn to_num(it: &Item) -> Result<f64, String> {
    match it.value {
        Value::Int(i) => Ok(i as f64),
        Value::Float(f) if f.is_finite() => Ok(f),
        Value::Float(_) => Err("must be finite".into()),
        ref v => Err(format!("expected a number, found {}", v.kind())),
    }
}

fn to_uint(it: &Item) -> Result<u64, String> {
    match it.value {
        Value::Int(i) if i >= 0 => Ok(i as u64),
        Value::Int(_) => Err("must not be negative".into()),
        ref v => Err(format!("expected an integer, found {}", v.kind())),
    }
}

fn to_bool(it: &Item) -> Result<bool, String> {
    match it.value {
        Value::Bool(b) => Ok(b),
        ref v => Err(format!("expected true or false, found {}", v.kind())),
    }
}

fn to_str(it: &Item) -> Result<&str, String> {
    match &it.value {
        Value::Str(s) => Ok(s),
        v => Err(format!("expected a string, found {}", v.kind())),
    }
}

fn to_array(it: &Item) -> Result<&[Item], String> {
    match &it.value {
        Value::Array(a) => Ok(a),
        v => Err(format!("expected an array, found {}", v.kind())),
    }
}

fn to_nums(it: &Item) -> Result<Vec<f64>, String> {
    to_array(it)?
        .iter()
        .enumerate()
        .map(|(i, x)| to_num(x).map_err(|m| format!("element {i}: {m}")))
        .collect()
}

fn one_of<'s>(s: &'s str, options: &[&str]) -> Result<&'s str, String> {
    if options.contains(&s) {
        Ok(s)
    } else {
        Err(format!("`{s}` is not one of: {}", options.join(", ")))
    }
}

impl<'a> Sec<'a> {
    fn new(diags: &'a Diags, name: impl Into<String>, item: Option<&'a Item>) -> Self {
        let name = name.into();
        let table = match item.map(|i| &i.value) {
            Some(Value::Table(t)) => Some(t),
            Some(v) => {
                diags.borrow_mut().push(Diagnostic {
                    section: name.clone(),
                    key: None,
                    line: item.map(|i| i.line),
                    message: format!("expected a table, found {}", v.kind()),
                });
                None
            }
            None => None,
        };
        Self {
            diags,
            name,
            table,
            line: item.map(|i| i.line),
            known: RefCell::default(),
        }
    }

    fn report(&self, key: Option<&str>, line: Option<usize>, message: impl Into<String>) {
        self.diags.borrow_mut().push(Diagnostic {
            section: self.name.clone(),
            key: key.map(str::to_string),
            line,
            message: message.into(),
        });
    }

    fn fail(&self, message: impl Into<String>) {
        self.report(None, self.line, message);
    }

    fn item(&self, key: &'static str) -> Option<&'a Item> {
        self.known.borrow_mut().push(key);
        self.table?.get(key)
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.table
            .and_then(|t| t.get(key))
            .map(|i| i.line)
            .or(self.line)
    }

    fn key_error(&self, key: &str, message: impl Into<String>) {
        self.report(Some(key), self.line_of(key), message);
    }

    fn has(&self, key: &'static str) -> bool {
        self.item(key).is_some()
    }

    fn read<T>(
        &self,
        key: &'static str,
        required: bool,
        conv: impl FnOnce(&'a Item) -> Result<T, String>,
    ) -> Option<T> {
        match self.item(key) {
            None => {
                if required {
                    self.report(Some(key), self.line, "missing required key");
                }
                None
            }
            Some(it) => conv(it)
                .map_err(|m| self.report(Some(key), Some(it.line), m))
                .ok(),
        }
    }

    fn num(&self, key: &'static str) -> Option<f64> {
        self.read(key, false, to_num)
    }

    fn num_req(&self, key: &'static str) -> Option<f64> {
        self.read(key, true, to_num)
    }

    fn num_or(&self, key: &'static str, default: f64) -> f64 {
        self.num(key).unwrap_or(default)
    }

    fn uint(&self, key: &'static str) -> Option<u64> {
        self.read(key, false, to_uint)
    }

    fn flag(&self, key: &'static str, default: bool) -> bool {
        self.read(key, false, to_bool).unwrap_or(default)
    }

    fn choice(
        &self,
        key: &'static str,
        options: &[&'static str],
        default: &'static str,
    ) -> Option<&'a str> {
        match self.item(key) {
            None => Some(default),
            Some(it) => to_str(it)
                .and_then(|s| one_of(s, options))
                .map_err(|m| self.report(Some(key), Some(it.line), m))
                .ok(),
        }
    }

    fn nums(&self, key: &'static str, required: bool) -> Option<Vec<f64>> {
        self.read(key, required, to_nums)
    }

    fn expr(&self, key: &'static str, required: bool) -> Option<Expression> {
        self.read(key, required, |it| {
            Expression::parse(to_str(it)?).map_err(|e| format!("cannot parse expression: {e}"))
        })
    }

    fn path(&self, key: &'static str, base: &Path) -> Option<PathBuf> {
        self.read(key, false, |it| {
            let path = base.join(to_str(it)?);
            if path.exists() {
                Ok(path)
            } else {
                Err(format!("file not found: {}", path.display()))
            }
        })
    }

    /// Reports keys that were never asked for.
    fn finish(&self) {
        let Some(table) = self.table else { return };
        let known = self.known.borrow().clone();
        for (key, item) in table {
            if !known.contains(&key.as_str()) {
                let mut expected = known.clone();
                expected.sort_unstable();
                expected.dedup();
                self.diags.borrow_mut().push(Diagnostic {
                    section: self.name.clone(),
                    key: Some(key.clone()),
                    line: Some(item.line),
                    message: format!("unknown key; expected one of: {}", expected.join(", ")),
                });
            }
        }
    }
}

/// Named subsections such as `[device.<name>]`, in name order.
fn subsections<'a>(diags: &'a Diags, root: &'a Table, kind: &str) -> Vec<(String, Sec<'a>)> {
    match root.get(kind).map(|i| (&i.value, i.line)) {
        None => Vec::new(),
        Some((Value::Table(t), _)) => t
            .iter()
            .map(|(name, item)| {
                (
                    name.clone(),
                    Sec::new(diags, format!("{kind}.{name}"), Some(item)),
                )
            })
            .collect(),
        Some((v, line)) => {
            diags.borrow_mut().push(Diagnostic {
                section: kind.into(),
                key: None,
                line: Some(line),
                message: format!(
                    "expected named subsections like [{kind}.<name>], found {}",
                    v.kind()
                ),
            });
            Vec::new()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StdpSettings {
    /// Layer whose models are paired.
    pub layer: usize,
    pub initial_g: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneSettings {
    pub space: Vec<ParamRange>,
    pub ga: GaConfig,
    /// GA seed; follows the simulation seed when unset.
    pub seed: Option<u64>,
    /// Fraction of the training set held out to score candidates.
    pub validation_split: f64,
}

/// A fully validated parameter file.
#[derive(Debug, Clone)]
pub struct Config {
    pub path: PathBuf,
    pub sim: SimConfig,
    pub encoder: Encoder,
    pub dataset_format: DatasetFormat,
    pub network: NetworkSpec,
    /// Weights file loaded into the network after building it.
    pub init_path: Option<PathBuf>,
    pub data: DataPaths,
    pub stdp: StdpSettings,
    pub tune: Option<TuneSettings>,
    document: Document,
}

const SECTIONS: [&str; 11] = [
    "constants",
    "data",
    "device",
    "circuit",
    "encoding",
    "layers",
    "network",
    "neuron",
    "sim",
    "stdp",
    "tune",
];

impl Config {
    pub fn load(path: &Path) -> Result<Self, crate::error::CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| crate::error::CliError::io(path, e))?;
        Ok(Self::from_str(&text, path)?)
    }

    /// Resolves `text` as if it had been read from `path`; relative file
    /// names are taken from the directory of `path`.
    pub fn from_str(text: &str, path: &Path) -> Result<Self, Diagnostics> {
        let document = Document::parse(text).map_err(|d| Diagnostics {
            file: path.to_path_buf(),
            items: vec![d],
        })?;
        Self::resolve(document, path, true)
    }

    pub fn document(&self) -> &Document {
        &self.document
    }

    /// Seeds both network construction and the simulation.
    pub fn set_seed(&mut self, seed: u64) {
        self.sim.seed = seed;
        self.network.seed = seed;
    }

    /// Builds the network and applies the initial weights file, if any.
    pub fn build_network(&self) -> Result<Network, crate::error::CliError> {
        let mut net = Network::build(self.network.clone()).map_err(|e| {
            crate::error::CliError::Config(Diagnostics {
                file: self.path.clone(),
                items: vec![Diagnostic {
                    section: "network".into(),
                    key: None,
                    line: None,
                    message: e.to_string(),
                }],
            })
        })?;
        if let Some(path) = &self.init_path {
            let text =
                std::fs::read_to_string(path).map_err(|e| crate::error::CliError::io(path, e))?;
            net.apply_weights_text(&text)
                .map_err(|source| crate::error::CliError::Weights {
                    path: path.clone(),
                    source,
                })?;
        }
        Ok(net)
    }

    /// Resolves a document whose values may have been substituted.
    pub fn resolve(document: Document, path: &Path, check_tune: bool) -> Result<Self, Diagnostics> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let diags = Diags::default();
        let resolved = resolve(&document, &base, &diags);
        let mut items = diags.into_inner();
        items.sort_by_key(|d| d.line.unwrap_or(usize::MAX));
        let fail = |items| Diagnostics {
            file: path.to_path_buf(),
            items,
        };
        let Some(parts) = resolved.filter(|_| items.is_empty()) else {
            if items.is_empty() {
                items.push(Diagnostic {
                    section: "file".into(),
                    key: None,
                    line: None,
                    message: "incomplete configuration".into(),
                });
            }
            return Err(fail(items));
        };
        let config = Config {
            path: path.to_path_buf(),
            document,
            ..parts
        };
        if let Err(e) = Network::build(config.network.clone()) {
            return Err(fail(vec![Diagnostic {
                section: "layers".into(),
                key: None,
                line: None,
                message: e.to_string(),
            }]));
        }
        if check_tune {
            let items = config.check_tune_targets();
            if !items.is_empty() {
                return Err(fail(items));
            }
        }
        Ok(config)
    }

    /// Substitutes `values` (one per tuning parameter) into the document.
    pub fn with_params(&self, values: &[f64]) -> Result<Self, Diagnostics> {
        let Some(tune) = &self.tune else {
            return Ok(self.clone());
        };
        let mut doc = self.document.clone();
        for (range, &v) in tune.space.iter().zip(values) {
            doc.set(&range.name, v, range.kind == ParamKind::Integer)
                .map_err(|message| Diagnostics {
                    file: self.path.clone(),
                    items: vec![Diagnostic {
                        section: "tune".into(),
                        key: Some(range.name.clone()),
                        line: None,
                        message,
                    }],
                })?;
        }
        let mut out = Self::resolve(doc, &self.path, false)?;
        out.set_seed(self.sim.seed);
        Ok(out)
    }

    fn check_tune_targets(&self) -> Vec<Diagnostic> {
        let Some(tune) = &self.tune else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for range in &tune.space {
            let (lo, hi) = range.gene_bounds();
            let mid = range.decode_gene(0.5 * (lo + hi));
            let report = |message: String| Diagnostic {
                section: "tune".into(),
                key: Some("params".into()),
                line: None,
                message: format!("parameter `{}`: {message}", range.name),
            };
            if range.name.starts_with("tune.") || range.name.starts_with("data.") {
                out.push(report("sections [tune] and [data] cannot be tuned".into()));
                continue;
            }
            let mut doc = self.document.clone();
            if let Err(m) = doc.set(&range.name, mid, range.kind == ParamKind::Integer) {
                out.push(report(m));
                continue;
            }
            if let Err(d) = Self::resolve(doc, &self.path, false) {
                let first = d.items.first().map(|d| d.to_string()).unwrap_or_default();
                out.push(report(format!(
                    "value {mid} gives an invalid configuration: {first}"
                )));
            }
        }
        out
    }
}

/// Declared models by name; `None` marks one that failed validation.
type Named<T> = BTreeMap<String, Option<Arc<T>>>;

struct Models {
    devices: Named<DeviceModel>,
    circuits: Named<CircuitModel>,
    neurons: Named<NeuronModel>,
}

/// Everything but the path and document; `None` if any section failed.
fn resolve(doc: &Document, base: &Path, diags: &Diags) -> Option<Config> {
    let root = &doc.root;
    for (name, item) in root {
        if !SECTIONS.contains(&name.as_str()) {
            diags.borrow_mut().push(Diagnostic {
                section: name.clone(),
                key: None,
                line: Some(item.line),
                message: format!("unknown section; expected one of: {}", SECTIONS.join(", ")),
            });
        }
    }

    let constants = read_constants(diags, root);
    let models = Models {
        devices: read_named(diags, root, "device", |sec| read_device(sec, base)),
        circuits: read_named(diags, root, "circuit", |sec| read_circuit(sec, &constants)),
        neurons: read_named(diags, root, "neuron", |sec| {
            read_neuron(sec, base, &constants)
        }),
    };
    let layers = read_layers(diags, root, &models);
    let sim = read_sim(diags, root);
    let (network_parts, init_path) = read_network(diags, root, base);
    let (encoder, dataset_format) = read_encoding(diags, root, base, layers.as_deref());
    let data = read_data(diags, root, base);
    let stdp = read_stdp(diags, root, layers.as_deref());
    let tune = read_tune(diags, root);

    let (inh_conn, inh_g, init_weights) = network_parts?;
    let sim = sim?;
    let network = NetworkSpec {
        layers: layers?,
        inh_conn,
        inh_g,
        seed: sim.seed,
        init_weights,
    };
    Some(Config {
        path: PathBuf::new(),
        sim,
        encoder: encoder?,
        dataset_format: dataset_format?,
        network,
        init_path,
        data,
        stdp: stdp?,
        tune: tune?,
        document: Document { root: Table::new() },
    })
}

fn read_constants(diags: &Diags, root: &Table) -> BTreeMap<String, f64> {
    let sec = Sec::new(diags, "constants", root.get("constants"));
    let mut out = BTreeMap::new();
    for (name, item) in sec.table.into_iter().flatten() {
        if vocab::NAMES.contains(&name.as_str()) {
            sec.report(Some(name), Some(item.line), "shadows a built-in variable");
            continue;
        }
        match to_num(item) {
            Ok(v) => {
                out.insert(name.clone(), v);
            }
            Err(m) => sec.report(Some(name), Some(item.line), m),
        }
    }
    out
}

fn read_named<T>(
    diags: &Diags,
    root: &Table,
    kind: &str,
    mut read: impl FnMut(&Sec<'_>) -> Option<T>,
) -> Named<T> {
    let mut out = BTreeMap::new();
    for (name, sec) in subsections(diags, root, kind) {
        out.insert(name, read(&sec).map(Arc::new));
        sec.finish();
    }
    out
}

fn read_device(sec: &Sec<'_>, base: &Path) -> Option<DeviceModel> {
    let kind = sec.choice("kind", &["identical", "family"], "identical");
    let g_min = sec.num_req("g_min");
    let g_max = sec.num_req("g_max");
    let levels = |inline: &'static str, file: &'static str| {
        let values = sec.nums(inline, false);
        let path = sec.path(file, base);
        match (values, path) {
            (Some(v), None) => Some(v),
            (None, Some(p)) => io::read_levels(&p)
                .map_err(|e| sec.key_error(file, e.to_string()))
                .ok(),
            (Some(_), Some(_)) => {
                sec.key_error(inline, format!("give either {inline} or {file}, not both"));
                None
            }
            (None, None) => None,
        }
    };
    let ltp = levels("levels_ltp", "levels_ltp_path");
    let ltd = levels("levels_ltd", "levels_ltd_path");
    let table = |key: &'static str| {
        sec.path(key, base).and_then(|p| {
            io::read_family(&p)
                .map_err(|e| sec.key_error(key, e.to_string()))
                .ok()
        })
    };
    let ltp_table = table("ltp_table_path");
    let ltd_table = table("ltd_table_path");
    let axis = sec.choice("family_axis", &["amplitude", "width"], "amplitude");

    let device_kind = match kind? {
        "identical" => {
            for (key, alt, given) in [
                ("levels_ltp", "levels_ltp_path", ltp.is_some()),
                ("levels_ltd", "levels_ltd_path", ltd.is_some()),
            ] {
                if !given && !sec.has(key) && !sec.has(alt) {
                    sec.report(
                        Some(key),
                        sec.line,
                        format!("identical devices need {key} or {alt}"),
                    );
                }
            }
            if sec.has("ltp_table_path") || sec.has("ltd_table_path") || sec.has("family_axis") {
                sec.fail("pulse-family keys are only valid with kind = \"family\"");
            }
            DeviceKind::IdenticalPulse(IdenticalPulse {
                levels_ltp: ltp?,
                levels_ltd: ltd?,
            })
        }
        _ => {
            for key in ["ltp_table_path", "ltd_table_path"] {
                if !sec.has(key) {
                    sec.report(Some(key), sec.line, "family devices need this table");
                }
            }
            if ltp.is_some() || ltd.is_some() {
                sec.fail("level arrays are only valid with kind = \"identical\"");
            }
            let axis = if axis? == "width" {
                FamilyAxis::Width
            } else {
                FamilyAxis::Amplitude
            };
            DeviceKind::PulseFamily(PulseFamily {
                potentiation: ltp_table?,
                depression: ltd_table?,
                axis,
            })
        }
    };
    DeviceModel::new(device_kind, g_min?, g_max?)
        .map_err(|e| sec.fail(e.to_string()))
        .ok()
}

fn presence_set(
    sec: &Sec<'_>,
    key: &'static str,
    default: &[SpikePresence],
) -> Option<PresenceSet> {
    let Some(item) = sec.item(key) else {
        return Some(PresenceSet::of(default));
    };
    let names: Vec<&str> = SpikePresence::ALL.iter().map(|p| p.name()).collect();
    let parsed = to_array(item).and_then(|a| {
        a.iter()
            .map(|x| {
                let s = to_str(x)?;
                SpikePresence::from_name(s)
                    .ok_or_else(|| format!("`{s}` is not one of: {}", names.join(", ")))
            })
            .collect::<Result<Vec<_>, String>>()
    });
    parsed
        .map(|v| PresenceSet::of(&v))
        .map_err(|m| sec.report(Some(key), Some(item.line), m))
        .ok()
}

fn read_circuit(sec: &Sec<'_>, constants: &BTreeMap<String, f64>) -> Option<CircuitModel> {
    let v_app = sec.expr("v_app", true);
    let ex_eqs = sec.expr("ex_eqs", false);
    let v_th_pos = sec.num_req("v_th_pos");
    let v_th_neg = sec.num_req("v_th_neg");
    let plasticity_policy = presence_set(sec, "plasticity_policy", &[SpikePresence::Both]);
    let transmit_policy = presence_set(
        sec,
        "transmit_policy",
        &[SpikePresence::PreOnly, SpikePresence::Both],
    );
    let conduct_during_plasticity = sec.flag("conduct_during_plasticity", true);
    let v_node = sec.num_or("v_node", 0.0);
    let params = CircuitParams {
        v_app: v_app?,
        ex_eqs: if sec.has("ex_eqs") {
            Some(ex_eqs?)
        } else {
            None
        },
        v_th_pos: v_th_pos?,
        v_th_neg: v_th_neg?,
        plasticity_policy: plasticity_policy?,
        transmit_policy: transmit_policy?,
        conduct_during_plasticity,
        v_node,
    };
    CircuitModel::new(params, constants)
        .map_err(|e| match e {
            CircuitError::Expr { slot, source } => sec.key_error(slot, source.to_string()),
            CircuitError::SelfReference => sec.key_error("v_app", e.to_string()),
            e => sec.fail(e.to_string()),
        })
        .ok()
}

fn waveform(sec: &Sec<'_>, key: &'static str, required: bool) -> Option<Arc<Waveform>> {
    let values = sec.nums(key, required)?;
    Waveform::from_flat(&values)
        .map(Arc::new)
        .map_err(|e| sec.key_error(key, format!("invalid waveform: {e}")))
        .ok()
}

fn read_neuron(
    sec: &Sec<'_>,
    base: &Path,
    constants: &BTreeMap<String, f64>,
) -> Option<NeuronModel> {
    let tau = sec.num("tau");
    let thres = sec.num("thres");
    let v_reset = sec.num_or("v_reset", 0.0);
    let t_refrac = sec.num_or("t_refrac", 0.0);
    let r_mem = sec.num_or("r_mem", 1.0);
    let state_eqs = sec.expr("state_eqs", false);
    let power_expr = sec.expr("power_expr", false);
    let pre = waveform(sec, "pre_volt", true);
    let post1 = waveform(sec, "post1_volt", true);
    let post2 = waveform(sec, "post2_volt", true);
    let inhib = if sec.has("inhib_volt") {
        Some(waveform(sec, "inhib_volt", true)?)
    } else {
        None
    };
    let rest = RestLevels {
        pre: sec.num_or("rest_pre", 0.0),
        post1: sec.num_or("rest_post1", 0.0),
        post2: sec.num_or("rest_post2", 0.0),
    };
    let pulse_convert = sec.path("pulse_convert_path", base).and_then(|p| {
        io::read_pairs(&p)
            .map_err(|e| e.to_string())
            .and_then(|knots| PiecewiseLinear::new(knots).map_err(|e| e.to_string()))
            .map_err(|m| sec.key_error("pulse_convert_path", m))
            .ok()
    });
    let amplitude = sec.num("calib_amplitude");
    let rate = sec.num("calib_rate");
    let calib_path = sec.path("calib_path", base);

    let (mut tau, mut thres) = (tau, thres);
    if let Some(path) = calib_path {
        let (Some(amplitude), Some(rate)) = (amplitude, rate) else {
            sec.key_error(
                "calib_path",
                "calibration needs calib_amplitude and calib_rate",
            );
            return None;
        };
        let data = io::read_pairs(&path)
            .map_err(|e| sec.key_error("calib_path", e.to_string()))
            .ok()?;
        let fit = calibrate_from_frequency(&data, PulseDrive { amplitude, rate })
            .map_err(|e| sec.key_error("calib_path", format!("calibration failed: {e}")))
            .ok()?;
        log::info!(
            "[{}] calibrated thres {} tau {:?} (rms residual {} Hz)",
            sec.name,
            fit.thres,
            fit.tau,
            fit.residual
        );
        thres = thres.or(Some(fit.thres));
        tau = tau.or(fit.tau);
    } else if sec.has("calib_amplitude") || sec.has("calib_rate") {
        sec.fail("calib_amplitude and calib_rate need calib_path");
    }
    if tau.is_none() && !sec.has("tau") {
        sec.report(
            Some("tau"),
            sec.line,
            "missing required key (calibration data did not determine it)",
        );
    }
    if thres.is_none() && !sec.has("thres") {
        sec.report(Some("thres"), sec.line, "missing required key");
    }
    if sec.has("pulse_convert_path") && pulse_convert.is_none() {
        return None;
    }

    let params = NeuronParams {
        tau: tau?,
        thres: thres?,
        v_reset,
        t_refrac,
        r_mem,
        state_eqs: if sec.has("state_eqs") {
            Some(state_eqs?)
        } else {
            None
        },
        power_expr: if sec.has("power_expr") {
            Some(power_expr?)
        } else {
            None
        },
        waveforms: SpikeWaveforms {
            pre: pre?,
            post1: post1?,
            post2: post2?,
            inhib,
        },
        rest,
        pulse_convert,
    };
    NeuronModel::new(params, constants)
        .map_err(|e| match e {
            NeuronError::Expr { slot, source } => sec.key_error(slot, source.to_string()),
            NeuronError::Parameter { name, .. } => sec.key_error(name, e.to_string()),
            e => sec.fail(e.to_string()),
        })
        .ok()
}

fn lookup<T>(sec: &Sec<'_>, key: &'static str, map: &Named<T>, kind: &str) -> Option<Arc<T>> {
    let name = sec.read(key, true, to_str)?;
    match map.get(name) {
        Some(model) => model.clone(),
        None => {
            let defined: Vec<&str> = map.keys().map(String::as_str).collect();
            let defined = if defined.is_empty() {
                "none".to_string()
            } else {
                defined.join(", ")
            };
            sec.key_error(key, format!("unknown {kind} `{name}`; defined: {defined}"));
            None
        }
    }
}

fn read_layers(diags: &Diags, root: &Table, models: &Models) -> Option<Vec<LayerSpec>> {
    let subs = subsections(diags, root, "layers");
    let report = |message: String| {
        diags.borrow_mut().push(Diagnostic {
            section: "layers".into(),
            key: None,
            line: root.get("layers").map(|i| i.line),
            message,
        })
    };
    if subs.is_empty() {
        report("define at least [layers.0] (input) and [layers.1]".into());
        return None;
    }
    let mut indexed = Vec::new();
    for (name, sec) in subs {
        match name.parse::<usize>() {
            Ok(k) => indexed.push((k, sec)),
            Err(_) => {
                sec.fail("layer names must be indices 0, 1, 2, ...");
                sec.finish();
            }
        }
    }
    indexed.sort_by_key(|(k, _)| *k);
    let mut ok = true;
    for (pos, (k, _)) in indexed.iter().enumerate() {
        if *k != pos {
            report(format!(
                "layer indices must be contiguous from 0; missing layer {pos}"
            ));
            ok = false;
            break;
        }
    }

    let mut out = Vec::new();
    for (k, sec) in indexed {
        let neurons = sec.uint("neurons");
        if neurons.is_none() && !sec.has("neurons") {
            sec.report(Some("neurons"), sec.line, "missing required key");
        }
        let spec = if k == 0 {
            neurons.map(|n| LayerSpec::input(n as usize))
        } else {
            let plastic = sec.flag("plastic", true);
            let label = sec.flag("label", false);
            let conn = sec.choice(
                "conn_type",
                &["all_to_all", "one_to_one", "sparse"],
                "all_to_all",
            );
            let sparse_p = sec.num("sparse_p");
            let conn = match conn {
                Some("sparse") => match sparse_p {
                    Some(p) => Some(ConnType::Sparse(p)),
                    None => {
                        if !sec.has("sparse_p") {
                            sec.report(
                                Some("sparse_p"),
                                sec.line,
                                "missing required key for conn_type = \"sparse\"",
                            );
                        }
                        None
                    }
                },
                Some(other) => {
                    if sec.has("sparse_p") {
                        sec.key_error("sparse_p", "only valid with conn_type = \"sparse\"");
                    }
                    Some(if other == "one_to_one" {
                        ConnType::OneToOne
                    } else {
                        ConnType::AllToAll
                    })
                }
                None => None,
            };
            let device = lookup(&sec, "device", &models.devices, "device");
            let circuit = lookup(&sec, "circuit", &models.circuits, "circuit");
            let neuron = lookup(&sec, "neuron", &models.neurons, "neuron");
            match (neurons, conn, device, circuit, neuron) {
                (Some(n), Some(conn), Some(device), Some(circuit), Some(neuron)) => {
                    Some(LayerSpec {
                        neurons: n as usize,
                        plastic,
                        label,
                        conn,
                        models: Some(LayerModels {
                            neuron,
                            circuit,
                            device,
                        }),
                    })
                }
                _ => None,
            }
        };
        sec.finish();
        match spec {
            Some(s) => out.push(s),
            None => ok = false,
        }
    }
    if out.len() < 2 && ok {
        report("define at least [layers.0] (input) and [layers.1]".into());
        ok = false;
    }
    ok.then_some(out)
}

fn read_sim(diags: &Diags, root: &Table) -> Option<SimConfig> {
    let sec = Sec::new(diags, "sim", root.get("sim"));
    if sec.table.is_none() && sec.line.is_none() {
        sec.fail("missing section");
    }
    let duration = sec.num_req("T");
    let dt = sec.num_req("dt");
    let sample_window = sec.num_or("T_sample", 0.1);
    let seed = sec.uint("seed").unwrap_or(0);
    let reset_between_samples = sec.flag("reset_between_samples", true);
    let shuffle = sec.flag("shuffle", true);
    let interval = sec.num("checkpoint_interval");
    sec.finish();
    let (duration, dt) = (duration?, dt?);
    let mut cfg = SimConfig {
        duration,
        dt,
        sample_window,
        reset_between_samples,
        shuffle,
        seed,
        checkpoint_steps: None,
    };
    match cfg.steps() {
        Ok((0, _)) => {
            sec.key_error("T", "must be at least one time step");
            return None;
        }
        Ok(_) => {}
        Err(e) => {
            sec.fail(e.to_string());
            return None;
        }
    }
    if let Some(interval) = interval {
        match num_steps(interval, dt) {
            Ok(n) if n > 0 => cfg.checkpoint_steps = Some(n),
            Ok(_) => sec.key_error("checkpoint_interval", "must be at least one time step"),
            Err(e) => sec.key_error("checkpoint_interval", e.to_string()),
        }
    }
    Some(cfg)
}

type NetworkParts = (Vec<(usize, usize)>, f64, InitWeights);

fn read_network(
    diags: &Diags,
    root: &Table,
    base: &Path,
) -> (Option<NetworkParts>, Option<PathBuf>) {
    let sec = Sec::new(diags, "network", root.get("network"));
    let inh_conn = sec
        .read("inh_conn", false, |it| {
            to_array(it)?
                .iter()
                .map(|pair| match to_array(pair)? {
                    [a, b] => Ok((to_uint(a)? as usize, to_uint(b)? as usize)),
                    _ => Err("each entry must be a [start, end] pair".to_string()),
                })
                .collect::<Result<Vec<_>, String>>()
        })
        .or_else(|| (!sec.has("inh_conn")).then(Vec::new));
    let inh_g = sec.num("inh_g");
    let kind = sec.choice(
        "init_weights",
        &["mid_range", "uniform", "constant", "file"],
        "mid_range",
    );
    let lo = sec.num("init_lo");
    let hi = sec.num("init_hi");
    let g = sec.num("init_g");
    let path = sec.path("init_path", base);
    let mut init_path = None;
    let init = match kind {
        Some("uniform") => match (lo, hi) {
            (Some(lo), Some(hi)) => Some(InitWeights::Uniform { lo, hi }),
            _ => {
                sec.key_error(
                    "init_weights",
                    "uniform initialisation needs init_lo and init_hi",
                );
                None
            }
        },
        Some("constant") => match g {
            Some(g) => Some(InitWeights::Constant(g)),
            None => {
                sec.key_error("init_weights", "constant initialisation needs init_g");
                None
            }
        },
        Some("file") => match path {
            Some(p) => {
                init_path = Some(p);
                Some(InitWeights::MidRange)
            }
            None => {
                if !sec.has("init_path") {
                    sec.key_error("init_weights", "file initialisation needs init_path");
                }
                None
            }
        },
        Some(_) => Some(InitWeights::MidRange),
        None => None,
    };
    let inh_g = match (&inh_conn, inh_g) {
        (Some(c), None) if !c.is_empty() && !sec.has("inh_g") => {
            sec.report(
                Some("inh_g"),
                sec.line,
                "inhibitory connections need inh_g (siemens)",
            );
            None
        }
        (_, g) => Some(g.unwrap_or(0.0)),
    };
    sec.finish();
    let parts = match (inh_conn, inh_g, init) {
        (Some(c), Some(g), Some(i)) => Some((c, g, i)),
        _ => None,
    };
    (parts, init_path)
}

fn read_encoding(
    diags: &Diags,
    root: &Table,
    base: &Path,
    layers: Option<&[LayerSpec]>,
) -> (Option<Encoder>, Option<DatasetFormat>) {
    let sec = Sec::new(diags, "encoding", root.get("encoding"));
    let kind = sec.choice("type", &["poisson", "fixed", "aer"], "poisson");
    let r_min = sec.num_or("r_min", 0.0);
    let r_max = sec.num("r_max");
    let mode = sec.choice("aer_polarity_mode", &["separate", "signed"], "separate");
    let aer_dir = sec.read("aer_path", false, |it| {
        let dir = base.join(to_str(it)?);
        if dir.is_dir() {
            Ok(dir)
        } else {
            Err(format!("directory not found: {}", dir.display()))
        }
    });
    let out = match kind {
        Some("aer") => {
            for key in ["r_min", "r_max"] {
                if sec.table.is_some_and(|t| t.contains_key(key)) {
                    sec.key_error(key, "rates do not apply to AER input");
                }
            }
            let mode = match mode {
                Some("signed") => Some(PolarityMode::Signed),
                Some(_) => Some(PolarityMode::SeparateChannels),
                None => None,
            };
            if let (Some(PolarityMode::SeparateChannels), Some(layers)) = (mode, layers) {
                if layers[0].neurons % 2 != 0 {
                    sec.key_error(
                        "aer_polarity_mode",
                        "separate polarity channels need an even number of input neurons",
                    );
                }
            }
            let dir = aer_dir.or_else(|| (!sec.has("aer_path")).then(|| base.to_path_buf()));
            match (mode, dir) {
                (Some(m), Some(dir)) => {
                    (Some(Encoder::Aer(m)), Some(DatasetFormat::Events { dir }))
                }
                _ => (None, None),
            }
        }
        Some(kind) => {
            if sec.has("aer_path")
                || sec
                    .table
                    .is_some_and(|t| t.contains_key("aer_polarity_mode"))
            {
                sec.fail("aer_path and aer_polarity_mode only apply to type = \"aer\"");
            }
            let Some(r_max) = r_max else {
                if !sec.has("r_max") {
                    sec.report(Some("r_max"), sec.line, "missing required key");
                }
                return (None, None);
            };
            match RateMap::new(r_min, r_max) {
                Ok(map) => {
                    let enc = if kind == "fixed" {
                        Encoder::FixedRate(map)
                    } else {
                        Encoder::Poisson(map)
                    };
                    (Some(enc), Some(DatasetFormat::Features))
                }
                Err(e) => {
                    sec.key_error("r_max", e.to_string());
                    (None, None)
                }
            }
        }
        None => (None, None),
    };
    sec.finish();
    out
}

fn read_data(diags: &Diags, root: &Table, base: &Path) -> DataPaths {
    let sec = Sec::new(diags, "data", root.get("data"));
    let out = DataPaths {
        train: sec.path("train_path", base),
        test: sec.path("test_path", base),
    };
    sec.finish();
    out
}

fn read_stdp(diags: &Diags, root: &Table, layers: Option<&[LayerSpec]>) -> Option<StdpSettings> {
    let sec = Sec::new(diags, "stdp", root.get("stdp"));
    let layer = sec.uint("layer").unwrap_or(1) as usize;
    let initial = sec.nums("initial_g", false);
    sec.finish();
    let layers = layers?;
    let Some(models) = layers.get(layer).and_then(|l| l.models.as_ref()) else {
        sec.key_error("layer", format!("layer {layer} has no incoming synapses"));
        return None;
    };
    let (g_min, g_max) = (models.device.g_min(), models.device.g_max());
    let initial_g = match initial {
        Some(v) => {
            if let Some(g) = v.iter().find(|g| !(**g >= g_min && **g <= g_max)) {
                sec.key_error("initial_g", format!("{g} lies outside [{g_min}, {g_max}]"));
                return None;
            }
            v
        }
        None if sec.has("initial_g") => return None,
        None => [0.25, 0.5, 0.75]
            .iter()
            .map(|f| g_min + f * (g_max - g_min))
            .collect(),
    };
    Some(StdpSettings { layer, initial_g })
}

fn read_tune(diags: &Diags, root: &Table) -> Option<Option<TuneSettings>> {
    let item = root.get("tune");
    let sec = Sec::new(diags, "tune", item);
    if item.is_none() {
        return Some(None);
    }
    let defaults = GaConfig::default();
    let count = |key, default: usize| sec.uint(key).map_or(default, |v| v as usize);
    let ga = GaConfig {
        population: count("population", defaults.population),
        generations: count("generations", defaults.generations),
        crossover_rate: sec.num_or("crossover_rate", defaults.crossover_rate),
        mutation_rate: sec.num_or("mutation_rate", defaults.mutation_rate),
        mutation_sigma: sec.num_or("mutation_sigma", defaults.mutation_sigma),
        elitism: count("elitism", defaults.elitism),
        tournament_size: count("tournament_size", defaults.tournament_size),
        seed: 0,
    };
    let seed = sec.uint("seed");
    let validation_split = sec.num_or("validation_split", 0.2);
    let space = sec.read("params", true, |it| {
        let mut out = Vec::new();
        for (i, p) in to_array(it)?.iter().enumerate() {
            let Value::Table(t) = &p.value else {
                return Err(format!("element {i}: expected a table like {{ name = \"neuron.a.tau\", lo = 0.001, hi = 0.1 }}"));
            };
            let ctx = |m: String| format!("element {i}: {m}");
            for key in t.keys() {
                if !["name", "lo", "hi", "scale", "kind"].contains(&key.as_str()) {
                    return Err(ctx(format!("unknown key `{key}`; expected name, lo, hi, scale, kind")));
                }
            }
            let field = |k: &str| t.get(k).ok_or_else(|| ctx(format!("missing `{k}`")));
            let name = to_str(field("name")?).map_err(ctx)?.to_string();
            let lo = to_num(field("lo")?).map_err(ctx)?;
            let hi = to_num(field("hi")?).map_err(ctx)?;
            let scale = match t.get("scale").map(to_str).transpose().map_err(ctx)? {
                None | Some("linear") => Scale::Linear,
                Some("log") => Scale::Log,
                Some(s) => return Err(ctx(format!("scale `{s}` is not one of: linear, log"))),
            };
            let kind = match t.get("kind").map(to_str).transpose().map_err(ctx)? {
                None | Some("real") => ParamKind::Real,
                Some("integer") => ParamKind::Integer,
                Some(s) => return Err(ctx(format!("kind `{s}` is not one of: real, integer"))),
            };
            let range = ParamRange { name, lo, hi, scale, kind };
            range.validate().map_err(|e| ctx(e.to_string()))?;
            out.push(range);
        }
        if out.is_empty() {
            return Err("list at least one parameter".into());
        }
        Ok(out)
    });
    if let Err(e) = ga.validate() {
        sec.fail(e.to_string());
    }
    if !(validation_split > 0.0 && validation_split < 1.0) {
        sec.key_error("validation_split", "must lie strictly between 0 and 1");
    }
    sec.finish();
    Some(Some(TuneSettings {
        space: space?,
        ga,
        seed,
        validation_split,
    }))
}
