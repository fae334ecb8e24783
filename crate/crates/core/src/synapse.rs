//! Nanodevice synapses: the four-mode state machine, spike-presence
//! classification, transmit current and conductance programming.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{ExprError, Expression, Program};
use crate::vocab::{self, Slots};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SynapseMode {
    Idle,
    Transmit,
    Potentiate,
    Depress,
}

impl SynapseMode {
    pub fn direction(self) -> Option<Direction> {
        match self {
            Self::Potentiate => Some(Direction::Potentiate),
            Self::Depress => Some(Direction::Depress),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpikePresence {
    None,
    PreOnly,
    PostOnly,
    Both,
}

impl SpikePresence {
    pub const ALL: [SpikePresence; 4] = [Self::None, Self::PreOnly, Self::PostOnly, Self::Both];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::PreOnly => "pre_only",
            Self::PostOnly => "post_only",
            Self::Both => "both",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

pub fn classify_presence(pre_active: bool, post_active: bool) -> SpikePresence {
    match (pre_active, post_active) {
        (false, false) => SpikePresence::None,
        (true, false) => SpikePresence::PreOnly,
        (false, true) => SpikePresence::PostOnly,
        (true, true) => SpikePresence::Both,
    }
}

/// A set of [`SpikePresence`] values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PresenceSet(u8);

impl PresenceSet {
    pub fn of(items: &[SpikePresence]) -> Self {
        Self(items.iter().fold(0, |acc, p| acc | p.bit()))
    }

    pub fn contains(self, p: SpikePresence) -> bool {
        self.0 & p.bit() != 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Potentiate,
    Depress,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeviceError {
    Bounds { g_min: f64, g_max: f64 },
    EmptyLevels(&'static str),
    NotMonotone { table: &'static str, index: usize },
    OutOfBounds { table: &'static str, value: f64 },
    RowCount { keys: usize, rows: usize },
    BadKeys(&'static str),
}

impl fmt::Display for DeviceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bounds { g_min, g_max } => {
                write!(
                    f,
                    "need 0 <= g_min < g_max, got g_min={g_min}, g_max={g_max}"
                )
            }
            Self::EmptyLevels(t) => write!(f, "{t} table is empty"),
            Self::NotMonotone { table, index } => {
                write!(f, "{table} table breaks monotonicity at entry {index}")
            }
            Self::OutOfBounds { table, value } => {
                write!(f, "{table} conductance {value} lies outside [g_min, g_max]")
            }
            Self::RowCount { keys, rows } => {
                write!(
                    f,
                    "pulse-family table has {keys} pulse values but {rows} rows"
                )
            }
            Self::BadKeys(t) => write!(
                f,
                "{t} pulse values must be finite, positive and strictly ascending"
            ),
        }
    }
}

impl core::error::Error for DeviceError {}

/// Result of one programming pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub g: f64,
    /// The device was already at the end of its table.
    pub saturated: bool,
}

fn nearest_index(values: &[f64], target: f64) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if libm::fabs(v - target) < libm::fabs(values[best] - target) {
            best = i;
        }
    }
    best
}

/// Snaps `g` to the nearest level and moves one level along `levels`.
/// The result never moves against `direction`.
pub fn step_levels(levels: &[f64], g: f64, direction: Direction) -> StepOutcome {
    let idx = nearest_index(levels, g);
    let saturated = idx + 1 >= levels.len();
    let candidate = levels[(idx + 1).min(levels.len() - 1)];
    let g = match direction {
        Direction::Potentiate => candidate.max(g),
        Direction::Depress => candidate.min(g),
    };
    StepOutcome { g, saturated }
}

fn check_monotone(
    values: &[f64],
    ascending: bool,
    strict: bool,
    table: &'static str,
) -> Result<(), DeviceError> {
    if values.is_empty() {
        return Err(DeviceError::EmptyLevels(table));
    }
    for (i, w) in values.windows(2).enumerate() {
        let ok = match (ascending, strict) {
            (true, true) => w[1] > w[0],
            (true, false) => w[1] >= w[0],
            (false, true) => w[1] < w[0],
            (false, false) => w[1] <= w[0],
        };
        if !ok {
            return Err(DeviceError::NotMonotone {
                table,
                index: i + 1,
            });
        }
    }
    Ok(())
}

/// Device programmed by identical pulses: one level per pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct IdenticalPulse {
    pub levels_ltp: Vec<f64>,
    pub levels_ltd: Vec<f64>,
}

impl IdenticalPulse {
    pub fn step(&self, g: f64, direction: Direction) -> StepOutcome {
        match direction {
            Direction::Potentiate => step_levels(&self.levels_ltp, g, direction),
            Direction::Depress => step_levels(&self.levels_ltd, g, direction),
        }
    }
}

/// Which pulse property indexes the rows of a pulse-family table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FamilyAxis {
    #[default]
    Amplitude,
    Width,
}

/// Conductance-versus-pulse-number curves, one row per pulse amplitude
/// (or width).
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyTable {
    pub keys: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl FamilyTable {
    /// Row with the key nearest `pulse` (ties toward the lower key), then one
    /// column past the column nearest `g`.
    pub fn step(&self, g: f64, pulse: f64, direction: Direction) -> StepOutcome {
        let row = &self.rows[nearest_index(&self.keys, libm::fabs(pulse))];
        step_levels(row, g, direction)
    }

    fn validate(&self, ascending: bool, name: &'static str) -> Result<(), DeviceError> {
        if self.keys.is_empty()
            || self.keys.iter().any(|k| !(k.is_finite() && *k > 0.0))
            || self.keys.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(DeviceError::BadKeys(name));
        }
        if self.rows.len() != self.keys.len() {
            return Err(DeviceError::RowCount {
                keys: self.keys.len(),
                rows: self.rows.len(),
            });
        }
        self.rows
            .iter()
            .try_for_each(|r| check_monotone(r, ascending, false, name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseFamily {
    pub potentiation: FamilyTable,
    pub depression: FamilyTable,
    pub axis: FamilyAxis,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeviceKind {
    IdenticalPulse(IdenticalPulse),
    PulseFamily(PulseFamily),
}

/// Properties of the programming pulse applied in one timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    kind: DeviceKind,
    g_min: f64,
    g_max: f64,
}

impl DeviceModel {
    pub fn new(kind: DeviceKind, g_min: f64, g_max: f64) -> Result<Self, DeviceError> {
        if !(g_min.is_finite() && g_max.is_finite() && 0.0 <= g_min && g_min < g_max) {
            return Err(DeviceError::Bounds { g_min, g_max });
        }
        let in_bounds = |table: &'static str, values: &[f64]| {
            values
                .iter()
                .find(|v| !(g_min..=g_max).contains(*v))
                .map_or(Ok(()), |&value| {
                    Err(DeviceError::OutOfBounds { table, value })
                })
        };
        match &kind {
            DeviceKind::IdenticalPulse(d) => {
                check_monotone(&d.levels_ltp, true, true, "levels_ltp")?;
                check_monotone(&d.levels_ltd, false, true, "levels_ltd")?;
                in_bounds("levels_ltp", &d.levels_ltp)?;
                in_bounds("levels_ltd", &d.levels_ltd)?;
            }
            DeviceKind::PulseFamily(d) => {
                d.potentiation.validate(true, "potentiation")?;
                d.depression.validate(false, "depression")?;
                d.potentiation
                    .rows
                    .iter()
                    .try_for_each(|r| in_bounds("potentiation", r))?;
                d.depression
                    .rows
                    .iter()
                    .try_for_each(|r| in_bounds("depression", r))?;
            }
        }
        Ok(Self { kind, g_min, g_max })
    }

    pub fn identical(
        levels_ltp: Vec<f64>,
        levels_ltd: Vec<f64>,
        g_min: f64,
        g_max: f64,
    ) -> Result<Self, DeviceError> {
        Self::new(
            DeviceKind::IdenticalPulse(IdenticalPulse {
                levels_ltp,
                levels_ltd,
            }),
            g_min,
            g_max,
        )
    }

    pub fn kind(&self) -> &DeviceKind {
        &self.kind
    }

    pub fn g_min(&self) -> f64 {
        self.g_min
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn clamp(&self, g: f64) -> f64 {
        g.clamp(self.g_min, self.g_max)
    }

    /// Applies one programming pulse. Identical-pulse devices ignore the
    /// pulse shape; pulse-family devices pick their row from it.
    pub fn program(&self, g: f64, direction: Direction, pulse: Pulse) -> StepOutcome {
        let mut out = match &self.kind {
            DeviceKind::IdenticalPulse(d) => d.step(g, direction),
            DeviceKind::PulseFamily(d) => {
                let key = match d.axis {
                    FamilyAxis::Amplitude => pulse.amplitude,
                    FamilyAxis::Width => pulse.width,
                };
                let table = match direction {
                    Direction::Potentiate => &d.potentiation,
                    Direction::Depress => &d.depression,
                };
                table.step(g, key, direction)
            }
        };
        out.g = self.clamp(out.g);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapseState {
    pub g: f64,
    pub last_mode: SynapseMode,
    pub saturations: u32,
}

impl SynapseState {
    pub fn new(g: f64) -> Self {
        Self {
            g,
            last_mode: SynapseMode::Idle,
            saturations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CircuitError {
    Threshold {
        name: &'static str,
        value: f64,
    },
    Expr {
        slot: &'static str,
        source: ExprError,
    },
    /// `v_app` may not refer to its own result.
    SelfReference,
}

impl fmt::Display for CircuitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Threshold { name, value } => {
                write!(f, "{name} must be a positive voltage, got {value}")
            }
            Self::Expr { slot, source } => write!(f, "{slot}: {source}"),
            Self::SelfReference => write!(f, "v_app cannot reference V_TB"),
        }
    }
}

impl core::error::Error for CircuitError {}

/// Result of mode resolution for one synapse in one timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDecision {
    pub mode: SynapseMode,
    /// Voltage across the device; 0 when the circuit was not evaluated.
    pub v_tb: f64,
}

impl ModeDecision {
    pub const IDLE: Self = Self {
        mode: SynapseMode::Idle,
        v_tb: 0.0,
    };

    /// Amplitude of the programming pulse when plasticity fired.
    pub fn effective_pulse_voltage(&self) -> Option<f64> {
        self.mode.direction().map(|_| libm::fabs(self.v_tb))
    }
}

/// Parameters of a synaptic circuit, with its equations compiled.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitParams {
    pub v_app: Expression,
    pub ex_eqs: Option<Expression>,
    pub v_th_pos: f64,
    pub v_th_neg: f64,
    pub plasticity_policy: PresenceSet,
    pub transmit_policy: PresenceSet,
    pub conduct_during_plasticity: bool,
    /// Shared value of `V_node1` and `V_node2`.
    pub v_node: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitModel {
    params: CircuitParams,
    v_app: Program,
    ex_eqs: Option<Program>,
}

impl CircuitModel {
    pub fn new(
        params: CircuitParams,
        constants: &BTreeMap<String, f64>,
    ) -> Result<Self, CircuitError> {
        for (name, value) in [("v_th_pos", params.v_th_pos), ("v_th_neg", params.v_th_neg)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(CircuitError::Threshold { name, value });
            }
        }
        if params.v_app.free_vars().contains("V_TB") {
            return Err(CircuitError::SelfReference);
        }
        let v_app = params
            .v_app
            .compile(&vocab::NAMES, constants)
            .map_err(|source| CircuitError::Expr {
                slot: "v_app",
                source,
            })?;
        let ex_eqs = params
            .ex_eqs
            .as_ref()
            .map(|e| e.compile(&vocab::NAMES, constants))
            .transpose()
            .map_err(|source| CircuitError::Expr {
                slot: "ex_eqs",
                source,
            })?;
        Ok(Self {
            params,
            v_app,
            ex_eqs,
        })
    }

    pub fn params(&self) -> &CircuitParams {
        &self.params
    }

    /// Maps spike presence and the circuit voltages in `slots` onto a
    /// synapse mode. Stores the evaluated `V_TB` back into `slots`.
    pub fn resolve_mode(
        &self,
        presence: SpikePresence,
        slots: &mut Slots,
    ) -> Result<ModeDecision, ExprError> {
        let plastic = self.params.plasticity_policy.contains(presence);
        let transmit = self.params.transmit_policy.contains(presence);
        if !plastic && !transmit {
            return Ok(ModeDecision::IDLE);
        }
        slots[vocab::V_NODE1] = self.params.v_node;
        slots[vocab::V_NODE2] = self.params.v_node;
        let v_tb = self.v_app.eval(slots.as_slice())?;
        slots[vocab::V_TB] = v_tb;
        let mode = if plastic && v_tb >= self.params.v_th_pos {
            SynapseMode::Potentiate
        } else if plastic && v_tb <= -self.params.v_th_neg {
            SynapseMode::Depress
        } else if transmit {
            SynapseMode::Transmit
        } else {
            SynapseMode::Idle
        };
        Ok(ModeDecision { mode, v_tb })
    }

    /// Current through the device in `mode`; `slots` must hold `G` and the
    /// `V_TB` left by [`resolve_mode`](Self::resolve_mode).
    pub fn transmit_current(&self, mode: SynapseMode, slots: &Slots) -> Result<f64, ExprError> {
        let conducts = match mode {
            SynapseMode::Idle => false,
            SynapseMode::Transmit => true,
            SynapseMode::Potentiate | SynapseMode::Depress => self.params.conduct_during_plasticity,
        };
        if !conducts {
            return Ok(0.0);
        }
        match &self.ex_eqs {
            Some(p) => p.eval(slots.as_slice()),
            None => Ok(slots[vocab::G] * slots[vocab::V_TB]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const US: f64 = 1e-6;

    fn circuit(ex_eqs: Option<&str>) -> CircuitModel {
        CircuitModel::new(
            CircuitParams {
                v_app: Expression::parse("V_post1 - V_node1").unwrap(),
                ex_eqs: ex_eqs.map(|s| Expression::parse(s).unwrap()),
                v_th_pos: 1.0,
                v_th_neg: 1.0,
                plasticity_policy: PresenceSet::of(&[SpikePresence::Both]),
                transmit_policy: PresenceSet::of(&[SpikePresence::PreOnly, SpikePresence::Both]),
                conduct_during_plasticity: true,
                v_node: 0.0,
            },
            &BTreeMap::new(),
        )
        .unwrap()
    }

    fn slots(v_post1: f64, g: f64) -> Slots {
        let mut s = Slots::default();
        s[vocab::V_POST1] = v_post1;
        s[vocab::G] = g;
        s
    }

    #[test]
    fn presence_mapping() {
        assert_eq!(classify_presence(false, false), SpikePresence::None);
        assert_eq!(classify_presence(true, false), SpikePresence::PreOnly);
        assert_eq!(classify_presence(false, true), SpikePresence::PostOnly);
        assert_eq!(classify_presence(true, true), SpikePresence::Both);
    }

    #[test]
    fn mode_resolution() {
        let c = circuit(None);
        // V+ portion of the post spike coincides with the pre pulse.
        let d = c
            .resolve_mode(SpikePresence::Both, &mut slots(1.5, US))
            .unwrap();
        assert_eq!(d.mode, SynapseMode::Potentiate);
        let d = c
            .resolve_mode(SpikePresence::Both, &mut slots(-1.2, US))
            .unwrap();
        assert_eq!(d.mode, SynapseMode::Depress);
        assert_eq!(d.effective_pulse_voltage(), Some(1.2));
        let d = c
            .resolve_mode(SpikePresence::PreOnly, &mut slots(0.1, US))
            .unwrap();
        assert_eq!(d.mode, SynapseMode::Transmit);
        // Plasticity needs the pre-spike in this circuit.
        let d = c
            .resolve_mode(SpikePresence::PostOnly, &mut slots(1.5, US))
            .unwrap();
        assert_eq!(d, ModeDecision::IDLE);
        let d = c
            .resolve_mode(SpikePresence::None, &mut slots(0.1, US))
            .unwrap();
        assert_eq!(d.mode, SynapseMode::Idle);
        let d = c
            .resolve_mode(SpikePresence::Both, &mut slots(0.5, US))
            .unwrap();
        assert_eq!(d.mode, SynapseMode::Transmit);
        assert_eq!(d.effective_pulse_voltage(), None);
    }

    #[test]
    fn currents() {
        let c = circuit(None);
        let mut s = slots(0.1, 2.0 * US);
        c.resolve_mode(SpikePresence::PreOnly, &mut s).unwrap();
        let i = c.transmit_current(SynapseMode::Transmit, &s).unwrap();
        assert!((i - 0.2 * US).abs() < 1e-18);
        assert_eq!(c.transmit_current(SynapseMode::Idle, &s), Ok(0.0));

        let c = circuit(Some("G*V_TB*V_TB"));
        let mut s = slots(2.0, US);
        s[vocab::V_TB] = 2.0;
        let i = c.transmit_current(SynapseMode::Transmit, &s).unwrap();
        assert!((i - 4.0 * US).abs() < 1e-18);
    }

    #[test]
    fn no_current_during_plasticity_when_disabled() {
        let mut params = circuit(None).params().clone();
        params.conduct_during_plasticity = false;
        let c = CircuitModel::new(params, &BTreeMap::new()).unwrap();
        let s = slots(1.5, US);
        assert_eq!(c.transmit_current(SynapseMode::Potentiate, &s), Ok(0.0));
    }

    #[test]
    fn circuit_validation() {
        let mut params = circuit(None).params().clone();
        params.v_th_neg = 0.0;
        assert!(matches!(
            CircuitModel::new(params.clone(), &BTreeMap::new()),
            Err(CircuitError::Threshold {
                name: "v_th_neg",
                ..
            })
        ));
        params.v_th_neg = 1.0;
        params.v_app = Expression::parse("V_bogus").unwrap();
        assert!(matches!(
            CircuitModel::new(params.clone(), &BTreeMap::new()),
            Err(CircuitError::Expr {
                slot: "v_app",
                source: ExprError::UnknownVariable { .. }
            })
        ));
        params.v_app = Expression::parse("V_TB + 1").unwrap();
        assert_eq!(
            CircuitModel::new(params, &BTreeMap::new()),
            Err(CircuitError::SelfReference)
        );
    }

    #[test]
    fn identical_steps() {
        let levels = [1.0 * US, 2.0 * US, 3.0 * US];
        let out = step_levels(&levels, 2.0 * US, Direction::Potentiate);
        assert_eq!(
            out,
            StepOutcome {
                g: 3.0 * US,
                saturated: false
            }
        );
        let out = step_levels(&levels, 3.0 * US, Direction::Potentiate);
        assert_eq!(
            out,
            StepOutcome {
                g: 3.0 * US,
                saturated: true
            }
        );
        let out = step_levels(&levels, 2.4 * US, Direction::Potentiate);
        assert_eq!(out.g, 3.0 * US);
        // Tie between 1 and 2 goes to the lower index.
        let out = step_levels(&[1.0, 2.0, 3.0], 1.5, Direction::Potentiate);
        assert_eq!(out.g, 2.0);
    }

    #[test]
    fn identical_step_never_moves_backwards() {
        let ltp = [1.0, 2.0, 3.0];
        assert_eq!(step_levels(&ltp, 3.5, Direction::Potentiate).g, 3.5);
        let ltd = [3.0, 2.0, 1.0];
        assert_eq!(step_levels(&ltd, 0.5, Direction::Depress).g, 0.5);
        assert_eq!(step_levels(&ltd, 2.2, Direction::Depress).g, 1.0);
    }

    fn family() -> FamilyTable {
        FamilyTable {
            keys: vec![0.8, 1.0],
            rows: vec![
                vec![1.0 * US, 2.0 * US, 3.0 * US],
                vec![1.0 * US, 4.0 * US, 9.0 * US],
            ],
        }
    }

    #[test]
    fn family_steps() {
        let t = family();
        assert_eq!(t.step(2.0 * US, 1.0, Direction::Potentiate).g, 4.0 * US);
        assert_eq!(t.step(9.0 * US, 1.0, Direction::Potentiate).g, 9.0 * US);
        assert!(t.step(9.0 * US, 1.0, Direction::Potentiate).saturated);
        // 0.89 V is nearer 0.8 V.
        assert_eq!(t.step(2.0 * US, 0.89, Direction::Potentiate).g, 3.0 * US);
        // Exact tie between rows picks the lower amplitude.
        assert_eq!(t.step(2.0 * US, 0.9, Direction::Potentiate).g, 3.0 * US);
        assert_eq!(t.step(2.0 * US, -1.0, Direction::Potentiate).g, 4.0 * US);
    }

    #[test]
    fn device_validation() {
        assert!(DeviceModel::identical(vec![1.0, 2.0], vec![2.0, 1.0], 1.0, 2.0).is_ok());
        assert_eq!(
            DeviceModel::identical(vec![1.0, 1.0], vec![2.0, 1.0], 1.0, 2.0),
            Err(DeviceError::NotMonotone {
                table: "levels_ltp",
                index: 1
            })
        );
        assert_eq!(
            DeviceModel::identical(vec![1.0, 2.0], vec![1.0, 2.0], 1.0, 2.0),
            Err(DeviceError::NotMonotone {
                table: "levels_ltd",
                index: 1
            })
        );
        assert!(matches!(
            DeviceModel::identical(vec![1.0, 3.0], vec![2.0, 1.0], 1.0, 2.0),
            Err(DeviceError::OutOfBounds { .. })
        ));
        assert!(matches!(
            DeviceModel::identical(vec![1.0], vec![1.0], 2.0, 1.0),
            Err(DeviceError::Bounds { .. })
        ));
        let mut bad = family();
        bad.rows.pop();
        let kind = DeviceKind::PulseFamily(PulseFamily {
            potentiation: bad,
            depression: FamilyTable {
                keys: vec![1.0],
                rows: vec![vec![3.0 * US, 1.0 * US]],
            },
            axis: FamilyAxis::Amplitude,
        });
        assert_eq!(
            DeviceModel::new(kind, 0.0, 10.0 * US),
            Err(DeviceError::RowCount { keys: 2, rows: 1 })
        );
    }

    #[test]
    fn family_device_uses_width_axis() {
        let kind = DeviceKind::PulseFamily(PulseFamily {
            potentiation: family(),
            depression: FamilyTable {
                keys: vec![1.0],
                rows: vec![vec![3.0 * US, 1.0 * US]],
            },
            axis: FamilyAxis::Width,
        });
        let d = DeviceModel::new(kind, 0.0, 10.0 * US).unwrap();
        let out = d.program(
            2.0 * US,
            Direction::Potentiate,
            Pulse {
                amplitude: 5.0,
                width: 0.8,
            },
        );
        assert_eq!(out.g, 3.0 * US);
        let out = d.program(
            3.0 * US,
            Direction::Depress,
            Pulse {
                amplitude: 5.0,
                width: 0.8,
            },
        );
        assert_eq!(out.g, 1.0 * US);
    }
}
