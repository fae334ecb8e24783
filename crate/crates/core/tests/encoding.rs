use proptest::prelude::*;
use spikeforge_core::encoding::{
    aer_encode, fixed_rate_encode, poisson_encode, AerEvent, Encoder, Polarity, PolarityMode,
    RateMap, Sample, SampleInput,
};
use spikeforge_core::rng::{derive_seed, seeded};

#[test]
fn poisson_rates_within_three_sigma() {
    let (duration, dt, trials) = (1.0, 1e-3, 100u64);
    for rate in [10.0, 50.0, 100.0] {
        let map = RateMap::new(0.0, rate).unwrap();
        let total: usize = (0..trials)
            .map(|trial| {
                let mut rng = seeded(derive_seed(42, rate as u64, trial));
                poisson_encode(1.0, map, duration, dt, &mut rng)
                    .unwrap()
                    .len()
            })
            .sum();
        // Bernoulli spikes per step: mean n*p, variance n*p*(1-p).
        let n = trials as f64 * duration / dt;
        let p = rate * dt;
        let sigma = (n * p * (1.0 - p)).sqrt();
        let dev = (total as f64 - n * p).abs();
        assert!(
            dev <= 3.0 * sigma,
            "rate {rate}: {total} spikes, expected {} +- {}",
            n * p,
            3.0 * sigma
        );
    }
}

#[test]
fn fixed_rate_examples() {
    let map = RateMap::new(0.0, 10.0).unwrap();
    let train = fixed_rate_encode(1.0, map, 1.0, 1e-3).unwrap();
    assert_eq!(
        train.steps(),
        &[0, 100, 200, 300, 400, 500, 600, 700, 800, 900]
    );
    let t: Vec<f64> = train.times().collect();
    assert!((t[3] - 0.3).abs() < 1e-12);
    assert!(fixed_rate_encode(0.0, map, 1.0, 1e-3).unwrap().is_empty());
    assert!(fixed_rate_encode(1.5, map, 1.0, 1e-3).is_err());
}

#[test]
fn rate_map_is_linear() {
    let map = RateMap::new(2.0, 60.0).unwrap();
    assert_eq!(map.rate(0.0).unwrap(), 2.0);
    assert_eq!(map.rate(0.5).unwrap(), 31.0);
    assert_eq!(map.rate(1.0).unwrap(), 60.0);
    assert!(RateMap::new(5.0, 1.0).is_err());
    assert!(RateMap::new(-1.0, 1.0).is_err());
}

#[test]
fn aer_channels_and_polarity() {
    let events = [
        AerEvent {
            t: 0.0005,
            address: 1,
            polarity: Polarity::On,
        },
        AerEvent {
            t: 0.0021,
            address: 0,
            polarity: Polarity::Off,
        },
        AerEvent {
            t: 0.5,
            address: 0,
            polarity: Polarity::On,
        },
    ];
    let separate = aer_encode(&events, 4, PolarityMode::SeparateChannels, 0.01, 1e-3).unwrap();
    assert_eq!(separate[2].steps(), &[0]);
    assert_eq!(separate[1].steps(), &[2]);
    assert!(separate[0].is_empty(), "event past the window is dropped");

    let signed = aer_encode(&events, 2, PolarityMode::Signed, 0.01, 1e-3).unwrap();
    assert_eq!(signed[0].steps(), &[2]);
    assert_eq!(signed[0].sign(0), -1);
    assert_eq!(signed[1].sign(0), 1);

    assert!(aer_encode(&events, 1, PolarityMode::Signed, 0.01, 1e-3).is_err());
}

#[test]
fn encoder_width_must_match() {
    let enc = Encoder::Poisson(RateMap::new(0.0, 50.0).unwrap());
    let sample = Sample::features(vec![0.5; 3], Some(0));
    assert!(enc.encode(&sample, 4, 0.1, 1e-3, &mut seeded(0)).is_err());
    assert_eq!(
        enc.encode(&sample, 3, 0.1, 1e-3, &mut seeded(0))
            .unwrap()
            .len(),
        3
    );
    let events = Sample {
        input: SampleInput::Events(vec![]),
        label: None,
    };
    assert!(enc.encode(&events, 3, 0.1, 1e-3, &mut seeded(0)).is_err());
}

proptest! {
    #[test]
    fn spikes_lie_on_grid_inside_window(
        intensity in 0.0..=1.0f64,
        r_max in 0.0..400.0f64,
        steps in 1u64..2000,
        seed in any::<u64>(),
    ) {
        let dt = 1e-3;
        let duration = steps as f64 * dt;
        let map = RateMap::new(0.0, r_max).unwrap();
        for train in [
            poisson_encode(intensity, map, duration, dt, &mut seeded(seed)).unwrap(),
            fixed_rate_encode(intensity, map, duration, dt).unwrap(),
        ] {
            prop_assert!(train.steps().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(train.steps().iter().all(|&k| k < steps));
            for (t, &k) in train.times().zip(train.steps()) {
                prop_assert!((t - k as f64 * dt).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn poisson_is_reproducible(seed in any::<u64>(), intensity in 0.0..=1.0f64) {
        let map = RateMap::new(0.0, 100.0).unwrap();
        let a = poisson_encode(intensity, map, 0.2, 1e-3, &mut seeded(seed)).unwrap();
        let b = poisson_encode(intensity, map, 0.2, 1e-3, &mut seeded(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}
