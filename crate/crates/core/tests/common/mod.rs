#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use spikeforge_core::engine::{ConnType, InitWeights, LayerModels, LayerSpec, NetworkSpec};
use spikeforge_core::expr::Expression;
use spikeforge_core::neuron::{NeuronModel, NeuronParams, RestLevels, SpikeWaveforms};
use spikeforge_core::synapse::{
    CircuitModel, CircuitParams, DeviceModel, PresenceSet, SpikePresence,
};
use spikeforge_core::waveform::Waveform;

pub const US: f64 = 1e-6;

pub fn wave(points: &[(f64, f64)]) -> Arc<Waveform> {
    Arc::new(Waveform::new(points.to_vec()).unwrap())
}

pub fn rect(width: f64, volts: f64) -> Arc<Waveform> {
    Arc::new(Waveform::rectangular(width, volts).unwrap())
}

pub fn lif_params(tau: f64, thres: f64, t_refrac: f64, r_mem: f64) -> NeuronParams {
    let pulse = rect(1e-3, 1.0);
    NeuronParams {
        tau,
        thres,
        v_reset: 0.0,
        t_refrac,
        r_mem,
        state_eqs: None,
        power_expr: None,
        waveforms: SpikeWaveforms {
            pre: pulse.clone(),
            post1: pulse.clone(),
            post2: pulse.clone(),
            inhib: Some(pulse),
        },
        rest: RestLevels::default(),
        pulse_convert: None,
    }
}

pub fn neuron(params: NeuronParams) -> Arc<NeuronModel> {
    Arc::new(NeuronModel::new(params, &BTreeMap::new()).unwrap())
}

pub fn presence(names: &[&str]) -> PresenceSet {
    PresenceSet::of(
        &names
            .iter()
            .map(|n| SpikePresence::from_name(n).unwrap())
            .collect::<Vec<_>>(),
    )
}

pub fn circuit_params(v_app: &str, v_th: f64) -> CircuitParams {
    CircuitParams {
        v_app: Expression::parse(v_app).unwrap(),
        ex_eqs: None,
        v_th_pos: v_th,
        v_th_neg: v_th,
        plasticity_policy: presence(&["both"]),
        transmit_policy: presence(&["pre_only", "both"]),
        conduct_during_plasticity: true,
        v_node: 0.0,
    }
}

pub fn circuit(params: CircuitParams) -> Arc<CircuitModel> {
    Arc::new(CircuitModel::new(params, &BTreeMap::new()).unwrap())
}

/// `n` evenly spaced levels from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn linear_device(g_min: f64, g_max: f64, ltp: usize, ltd: usize) -> Arc<DeviceModel> {
    let up = linspace(g_min, g_max, ltp);
    let down = linspace(g_max, g_min, ltd);
    Arc::new(DeviceModel::identical(up, down, g_min, g_max).unwrap())
}

/// Input layer of `n_in` channels feeding one layer of `n_out` neurons.
pub fn two_layer(
    n_in: usize,
    n_out: usize,
    conn: ConnType,
    models: LayerModels,
    init: InitWeights,
) -> NetworkSpec {
    NetworkSpec {
        layers: vec![
            LayerSpec::input(n_in),
            LayerSpec {
                neurons: n_out,
                plastic: true,
                label: true,
                conn,
                models: Some(models),
            },
        ],
        inh_conn: vec![],
        inh_g: 0.0,
        seed: 1,
        init_weights: init,
    }
}
