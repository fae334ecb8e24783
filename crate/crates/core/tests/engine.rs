mod common;

use std::sync::Arc;

use common::*;
use spikeforge_core::encoding::{Encoder, RateMap, Sample};
use spikeforge_core::engine::{
    assign_labels, infer, train, BuildError, ConnType, InitWeights, LayerModels, LayerSpec,
    Network, NetworkSpec, PersistError, SimConfig, StepTrace,
};
use spikeforge_core::expr::Expression;
use spikeforge_core::synapse::{
    DeviceKind, DeviceModel, FamilyAxis, FamilyTable, PulseFamily, SynapseMode,
};

// Micro-net: two input channels, one output neuron.
const DT: f64 = 1e-3;
const TAU: f64 = 0.004;
const R_MEM: f64 = 1e6;

fn micro_models() -> LayerModels {
    let mut p = lif_params(TAU, 1.0, 0.002, R_MEM);
    p.waveforms.pre = rect(0.002, 1.0);
    p.waveforms.post1 = rect(0.002, 3.0);
    p.waveforms.post2 = rect(0.001, 1.0);
    p.waveforms.inhib = None;
    p.rest.pre = 5.0;
    let mut c = circuit_params("V_post1 - V_pre", 1.5);
    c.ex_eqs = Some(Expression::parse("G * V_pre").unwrap());
    c.plasticity_policy = presence(&["post_only", "both"]);
    c.transmit_policy = presence(&["pre_only", "both"]);
    let device = DeviceModel::identical(
        vec![US, 2.0 * US, 3.0 * US, 4.0 * US],
        vec![4.0 * US, 3.0 * US, 2.0 * US, US],
        US,
        4.0 * US,
    )
    .unwrap();
    LayerModels {
        neuron: neuron(p),
        circuit: circuit(c),
        device: Arc::new(device),
    }
}

fn micro_net() -> Network {
    let spec = two_layer(
        2,
        1,
        ConnType::AllToAll,
        micro_models(),
        InitWeights::Constant(2.0 * US),
    );
    let mut net = Network::build(spec).unwrap();
    assert!(net.set_conductance(1, 1, 0, 3.0 * US));
    net.inject_input(0, 0, 1);
    net.inject_input(1, 1, 1);
    net
}

fn euler(v: f64, i: f64) -> f64 {
    v + DT * ((-v + R_MEM * i) / TAU)
}

#[test]
fn micro_net_matches_hand_trace() {
    let mut net = micro_net();
    let trace: Vec<StepTrace> = (0..3)
        .map(|_| net.run_timestep_traced(DT).unwrap())
        .collect();
    use SynapseMode::*;

    // Step 0: channel 0 pulses alone. Its synapse transmits G * 1 V and the
    // idle one carries nothing.
    let i0 = 0.0 + 2.0 * US * 1.0 + 0.0;
    let v0 = euler(0.0, i0);
    assert!((v0 - 0.5).abs() < 1e-12);
    // Step 1: both pulses active, the neuron crosses threshold and resets.
    let i1 = 0.0 + 2.0 * US * 1.0 + 3.0 * US * 1.0;
    assert!((euler(v0, i1) - 1.625).abs() < 1e-12);
    // Step 2: the post pulse (3 V) arrives. Channel 0 sits at its 5 V rest
    // level, so V_TB = -2 V depresses it; channel 1 still pulses at 1 V, so
    // V_TB = 2 V potentiates it. Both conduct while the neuron is refractory.
    let i2 = 0.0 + 2.0 * US * 5.0 + 3.0 * US * 1.0;

    let expected = [
        (
            vec![true, false],
            vec![Some(Transmit), Some(Idle)],
            vec![-1.0, 0.0],
            i0,
            v0,
            false,
            [2.0, 3.0],
        ),
        (
            vec![false, true],
            vec![Some(Transmit), Some(Transmit)],
            vec![-1.0, -1.0],
            i1,
            0.0,
            true,
            [2.0, 3.0],
        ),
        (
            vec![false, false],
            vec![Some(Depress), Some(Potentiate)],
            vec![-2.0, 2.0],
            i2,
            0.0,
            false,
            [1.0, 4.0],
        ),
    ];
    for (k, (tr, (spikes, modes, v_tb, i, v, fired, g))) in trace.iter().zip(expected).enumerate() {
        assert_eq!(tr.step, k as u64);
        assert_eq!(tr.input_spikes, spikes, "step {k}");
        let l = &tr.layers[0];
        assert_eq!(l.modes, modes, "step {k}");
        assert_eq!(l.v_tb, v_tb, "step {k}");
        assert_eq!(l.currents, vec![i], "step {k}");
        assert_eq!(l.v, vec![v], "step {k}");
        assert_eq!(l.fired, vec![fired], "step {k}");
        assert_eq!(l.g, vec![Some(g[0] * US), Some(g[1] * US)], "step {k}");
    }
}

#[test]
fn quiet_network_decays_without_current() {
    let mut net = micro_net();
    net.reset_dynamics();
    let mut net = Network::build(net.spec().clone()).unwrap();
    net.neuron_states_mut(1)[0].v = 0.8;
    let tr = net.run_timestep_traced(DT).unwrap();
    let l = &tr.layers[0];
    assert!(l.modes.iter().all(|m| *m == Some(SynapseMode::Idle)));
    assert_eq!(l.currents, vec![0.0]);
    assert_eq!(l.v, vec![euler(0.8, 0.0)]);
}

/// Micro-net with longer pulses, a higher threshold and a width-indexed
/// device whose level spacing scales with pulse width, run for 8 ms.
fn final_conductances(dt: f64) -> Vec<f64> {
    let widths = vec![2.5e-4, 5e-4, 1e-3];
    let rows = |up: bool| -> Vec<Vec<f64>> {
        widths
            .iter()
            .map(|w| {
                let n = (9.0e-3f64 / (0.2 * w)).round() as usize + 1;
                if up {
                    linspace(US, 10.0 * US, n)
                } else {
                    linspace(10.0 * US, US, n)
                }
            })
            .collect()
    };
    let device = DeviceModel::new(
        DeviceKind::PulseFamily(PulseFamily {
            potentiation: FamilyTable {
                keys: widths.clone(),
                rows: rows(true),
            },
            depression: FamilyTable {
                keys: widths.clone(),
                rows: rows(false),
            },
            axis: FamilyAxis::Width,
        }),
        US,
        10.0 * US,
    )
    .unwrap();
    let mut models = micro_models();
    let mut p = models.neuron.params().clone();
    p.thres = 1.3;
    p.waveforms.pre = rect(0.004, 1.0);
    p.waveforms.post1 = rect(0.003, 3.0);
    models.neuron = neuron(p);
    models.device = Arc::new(device);
    let spec = two_layer(
        2,
        1,
        ConnType::AllToAll,
        models,
        InitWeights::Constant(4.6 * US),
    );
    let mut net = Network::build(spec).unwrap();
    let per_ms = (1e-3 / dt).round() as u64;
    net.inject_input(0, 0, 1);
    net.inject_input(1, per_ms, 1);
    for _ in 0..8 * per_ms {
        net.run_timestep(dt).unwrap();
    }
    net.synapses(1).iter().map(|(_, _, s)| s.g).collect()
}

#[test]
fn conductance_converges_as_dt_shrinks() {
    let g: Vec<Vec<f64>> = [1e-3, 5e-4, 2.5e-4]
        .iter()
        .map(|&dt| final_conductances(dt))
        .collect();
    let diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let (d1, d2) = (diff(&g[0], &g[1]), diff(&g[1], &g[2]));
    assert!(d1 > 0.0, "case does not depend on dt");
    assert!(d2 <= d1, "differences grew: {d1:e} then {d2:e}");
    assert!(d1 <= 0.1 * 9.0 * US, "first difference {d1:e} too large");
    assert!(g[2].iter().any(|&x| x != 4.6 * US), "nothing was learned");
}

fn sized(n_in: usize, n_out: usize, conn: ConnType) -> Result<Network, BuildError> {
    let models = LayerModels {
        neuron: neuron(lif_params(0.01, 1.0, 0.0, 1.0)),
        circuit: circuit(circuit_params("V_pre - V_post1", 10.0)),
        device: linear_device(0.0, 10.0 * US, 10, 10),
    };
    Network::build(two_layer(n_in, n_out, conn, models, InitWeights::MidRange))
}

#[test]
fn topology_examples() {
    let net = sized(4, 2, ConnType::AllToAll).unwrap();
    assert_eq!(net.synapses(1).count(), 8);
    let net = sized(3, 3, ConnType::OneToOne).unwrap();
    assert_eq!(net.synapses(1).count(), 3);
    assert!(net.synapses(1).get(1, 1).is_some() && net.synapses(1).get(1, 2).is_none());
    assert!(matches!(
        sized(3, 2, ConnType::OneToOne),
        Err(BuildError::OneToOneSizes { .. })
    ));
    assert!(matches!(
        sized(3, 2, ConnType::Sparse(0.0)),
        Err(BuildError::SparseProbability { .. })
    ));

    let a = sized(30, 10, ConnType::Sparse(0.3)).unwrap();
    let b = sized(30, 10, ConnType::Sparse(0.3)).unwrap();
    assert_eq!(a.synapses(1).mask(), b.synapses(1).mask());
    let n = a.synapses(1).count();
    assert!(n > 40 && n < 150, "{n} synapses");
    for j in 0..10 {
        assert!(
            (0..30).any(|i| a.synapses(1).get(i, j).is_some()),
            "neuron {j} has no inputs"
        );
    }
    assert_eq!(
        sized(5, 4, ConnType::Sparse(1.0))
            .unwrap()
            .synapses(1)
            .count(),
        20
    );

    for g in net.synapses(1).iter().map(|(_, _, s)| s.g) {
        assert!(
            (2.5 * US..=7.5 * US).contains(&g),
            "mid-range init gave {g}"
        );
    }
}

/// Four inputs, two outputs, each output wired to its own pair of inputs.
fn separable_net() -> Network {
    let mut p = lif_params(0.01, 0.5, 0.0, 1e6);
    p.waveforms.pre = rect(1e-3, 1.0);
    let models = LayerModels {
        neuron: neuron(p),
        circuit: circuit(circuit_params("V_pre - V_post1", 10.0)),
        device: linear_device(0.0, 10.0 * US, 10, 10),
    };
    let mut spec = two_layer(4, 2, ConnType::AllToAll, models, InitWeights::Constant(0.0));
    spec.layers[1].plastic = false;
    let mut net = Network::build(spec).unwrap();
    for i in 0..4 {
        net.set_conductance(1, i, i / 2, 10.0 * US);
    }
    net
}

fn separable_data() -> Vec<Sample> {
    (0..20)
        .map(|k| {
            let c = k % 2;
            let x = (0..4).map(|i| if i / 2 == c { 1.0 } else { 0.0 }).collect();
            Sample::features(x, Some(c))
        })
        .collect()
}

fn sim(seed: u64) -> SimConfig {
    SimConfig {
        duration: 1.0,
        dt: 1e-3,
        sample_window: 0.1,
        reset_between_samples: true,
        shuffle: true,
        seed,
        checkpoint_steps: Some(500),
    }
}

fn poisson() -> Encoder {
    Encoder::Poisson(RateMap::new(0.0, 100.0).unwrap())
}

#[test]
fn hand_built_separable_net_is_perfect() {
    let mut net = separable_net();
    let data = separable_data();
    let labels = assign_labels(&mut net, &data, &poisson(), &sim(3)).unwrap();
    assert_eq!(labels, vec![Some(0), Some(1)]);
    let report = infer(&mut net, &data, &poisson(), &sim(3)).unwrap();
    assert_eq!(report.accuracy, Some(1.0));
    assert_eq!(
        report.confusion.counts,
        vec![vec![10, 0, 0], vec![0, 10, 0]]
    );
}

#[test]
fn silent_neurons_stay_unlabelled() {
    let mut net = separable_net();
    for i in 0..4 {
        net.set_conductance(1, i, 1, 0.0);
    }
    let data = separable_data();
    let labels = assign_labels(&mut net, &data, &poisson(), &sim(3)).unwrap();
    assert_eq!(labels, vec![Some(0), None]);
    let report = infer(&mut net, &data, &poisson(), &sim(3)).unwrap();
    assert_eq!(report.accuracy, Some(0.5));
    assert_eq!(report.confusion.counts[1], vec![0, 0, 10]);
}

#[test]
fn frozen_layers_keep_weights_bit_identical() {
    let mut net = separable_net();
    let before = net.weights_text();
    let report = train(&mut net, &separable_data(), &poisson(), &sim(5)).unwrap();
    assert_eq!(report.training_accuracy, 1.0);
    assert_eq!(
        report
            .checkpoints
            .iter()
            .map(|c| c.step)
            .collect::<Vec<_>>(),
        vec![500, 1000]
    );
    let after: Vec<_> = net
        .weights_text()
        .lines()
        .filter(|l| !l.starts_with("label"))
        .map(String::from)
        .collect();
    let before: Vec<_> = before
        .lines()
        .filter(|l| !l.starts_with("label"))
        .map(String::from)
        .collect();
    assert_eq!(before, after);
}

fn plastic_run(seed: u64) -> (String, f64) {
    let mut net = separable_net();
    let mut spec = net.spec().clone();
    spec.layers[1].plastic = true;
    spec.layers[1].models.as_mut().unwrap().circuit =
        circuit(circuit_params("V_pre - V_post1", 0.5));
    spec.init_weights = InitWeights::Uniform {
        lo: 2.0 * US,
        hi: 8.0 * US,
    };
    spec.seed = seed;
    net = Network::build(spec).unwrap();
    let report = train(&mut net, &separable_data(), &poisson(), &sim(seed)).unwrap();
    (net.weights_text(), report.training_accuracy)
}

#[test]
fn training_is_deterministic() {
    let a = plastic_run(7);
    assert_eq!(a, plastic_run(7));
    assert_ne!(a.0, plastic_run(8).0);
}

#[test]
fn training_preserves_topology() {
    let models = LayerModels {
        neuron: neuron(lif_params(0.01, 0.5, 0.0, 1e6)),
        circuit: circuit(circuit_params("V_pre - V_post1", 0.5)),
        device: linear_device(0.0, 10.0 * US, 10, 10),
    };
    let mut net = Network::build(two_layer(
        4,
        2,
        ConnType::Sparse(0.5),
        models,
        InitWeights::MidRange,
    ))
    .unwrap();
    let mask = net.synapses(1).mask();
    train(&mut net, &separable_data(), &poisson(), &sim(2)).unwrap();
    assert_eq!(mask, net.synapses(1).mask());
}

#[test]
fn weights_round_trip() {
    let (text, _) = plastic_run(4);
    let mut net = separable_net();
    net.apply_weights_text(&text).unwrap();
    assert_eq!(net.weights_text(), text);
    assert_eq!(net.labels().len(), 2);

    let truncated = &text[..text.len() / 2];
    let err = separable_net().apply_weights_text(truncated).unwrap_err();
    assert!(matches!(err, PersistError::Corrupt { .. }), "{err:?}");

    let future = text.replacen("v1", "v2", 1);
    let err = separable_net().apply_weights_text(&future).unwrap_err();
    assert_eq!(
        err,
        PersistError::VersionMismatch {
            found: "2".into(),
            expected: 1
        }
    );
    let msg = err.to_string();
    assert!(msg.contains('2') && msg.contains('1'));

    let mut net = separable_net();
    let before = net.weights_text();
    assert!(net
        .apply_weights_text("spikeforge-net v1\n1,0,0,1\n")
        .is_err());
    assert_eq!(
        net.weights_text(),
        before,
        "failed load left the network untouched"
    );
}

#[test]
fn bad_specs_are_rejected() {
    let models = micro_models();
    let mut spec = two_layer(
        2,
        1,
        ConnType::AllToAll,
        models.clone(),
        InitWeights::MidRange,
    );
    spec.layers[1].label = false;
    assert!(matches!(
        Network::build(spec),
        Err(BuildError::LabelLayers(0))
    ));

    let mut spec = two_layer(
        2,
        1,
        ConnType::AllToAll,
        models.clone(),
        InitWeights::MidRange,
    );
    spec.inh_conn = vec![(1, 1)];
    assert!(matches!(
        Network::build(spec),
        Err(BuildError::MissingInhibWaveform(1))
    ));

    let spec = NetworkSpec {
        layers: vec![LayerSpec::input(2)],
        ..two_layer(2, 1, ConnType::AllToAll, models, InitWeights::MidRange)
    };
    assert!(matches!(
        Network::build(spec),
        Err(BuildError::TooFewLayers)
    ));
}

#[test]
fn input_width_must_match() {
    let mut net = separable_net();
    let data = vec![Sample::features(vec![1.0; 3], Some(0))];
    assert!(infer(&mut net, &data, &poisson(), &sim(1)).is_err());
    assert!(infer(&mut net, &[], &poisson(), &sim(1)).is_err());
}
