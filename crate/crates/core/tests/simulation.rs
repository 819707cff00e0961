use fecap_core::instrument::Waveform;
use fecap_core::kinetics::{simulate, DeviceModel, Dynamics, EnsembleConfig, SimOptions};
use proptest::prelude::*;

fn small_model() -> DeviceModel {
    DeviceModel {
        dynamics: Dynamics::Ensemble(EnsembleConfig { n_domains: 64, ..EnsembleConfig::default() }),
        ..DeviceModel::default()
    }
}

fn opts() -> SimOptions {
    SimOptions { min_steps_per_segment: 50, ..SimOptions::default() }
}

fn waveform(levels: &[(f64, f64)]) -> Waveform {
    let mut w = Waveform::starting_at(0.0, f64::INFINITY);
    for &(v, d) in levels {
        w = w.ramp_to(v, 1e-7).hold(d);
    }
    w.ramp_to(0.0, 1e-7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn polarization_bounded_and_bias_sign_fixed(
        levels in proptest::collection::vec((-6.0f64..4.0, 1e-7f64..1e-3), 1..6)
    ) {
        let model = small_model();
        let p_s = model.saturation_polarization().unwrap();
        let mut state = model.initial_state().unwrap();
        let rec = simulate(&waveform(&levels), &model, &mut state, &opts()).unwrap();
        for k in 0..rec.len() {
            prop_assert!(rec.p[k].abs() <= p_s * (1.0 + 1e-12));
            prop_assert!(rec.e_bias[k] <= 0.0);
            prop_assert!((0.0..=1.0).contains(&rec.f_occ[k]));
        }
    }
}

#[test]
fn identical_inputs_give_bit_identical_traces() {
    let model = DeviceModel::default();
    let w = waveform(&[(-4.5, 50e-6), (0.0, 1e-3), (2.5, 20e-6)]);
    let run = || {
        let mut s = model.initial_state().unwrap();
        simulate(&w, &model, &mut s, &opts()).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    for k in 0..a.len() {
        assert_eq!(a.p[k].to_bits(), b.p[k].to_bits());
        assert_eq!(a.i[k].to_bits(), b.i[k].to_bits());
    }
}

#[test]
fn area_changes_only_scale_currents() {
    let base = DeviceModel::default();
    let mut big = base;
    big.stack.area = 25.0 * base.stack.area;
    let w = waveform(&[(-4.5, 50e-6), (0.0, 2e-3), (2.5, 100e-6)]);
    let mut s1 = base.initial_state().unwrap();
    let mut s2 = big.initial_state().unwrap();
    let a = simulate(&w, &base, &mut s1, &opts()).unwrap();
    let b = simulate(&w, &big, &mut s2, &opts()).unwrap();
    assert_eq!(a.p, b.p);
    for k in 0..a.len() {
        assert!((b.i[k] - 25.0 * a.i[k]).abs() <= 1e-12 * b.i[k].abs(), "{k}");
    }
}

#[test]
fn stable_state_holds_at_zero_volts() {
    let model = DeviceModel::default();
    let mut s = model.initial_state().unwrap();
    let p0 = s.polarization();
    let rec = simulate(&Waveform::starting_at(0.0, 1e-5).hold(10e-3), &model, &mut s, &opts()).unwrap();
    let p_s = model.saturation_polarization().unwrap();
    for p in &rec.p {
        assert!((p - p0).abs() < 1e-3 * p_s);
    }
}
