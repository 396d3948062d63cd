use proptest::prelude::*;

use xisim::config::{ExperimentConfig, ExperimentKind, SCHEMA_VERSION};
use xisim::CliError;
use xisim_core::lattice::Site;
use xisim_core::pathspace::InitialKind;

fn kind() -> impl Strategy<Value = ExperimentKind> {
    prop::sample::select(ExperimentKind::ALL.to_vec())
}

fn initial() -> impl Strategy<Value = InitialKind> {
    prop_oneof![
        Just(InitialKind::DiametricLines),
        (0.001f64..std::f64::consts::PI).prop_map(|gap| InitialKind::AngularGap { gap }),
        (70i32..90, -5i32..5, 70i32..90).prop_map(|(x, y, z)| InitialKind::GivenEndpoints {
            a: Site::new(x, y, 0),
            b: Site::new(-z, y, 1),
        }),
    ]
}

prop_compose! {
    fn config()(
        experiment in kind(),
        seed in any::<u64>(),
        pairs in 1u64..1_000_000,
        steps in prop::collection::btree_set(1u64..50_000, 1..8),
        h_lag in 1u64..20_000,
        initial in prop::collection::vec(initial(), 2),
        base_radius in 8.0f64..64.0,
        xi_ref in -2.0f64..2.0,
        half_angles in prop::collection::vec(0.1f64..std::f64::consts::PI, 1..4),
        hitting_k in prop::collection::vec(0.0f64..4.0, 1..3),
        second_seed in any::<Option<u64>>(),
    ) -> ExperimentConfig {
        let mut c = ExperimentConfig::default_for(experiment);
        c.seed = seed;
        c.survival.pairs = pairs;
        c.survival.checkpoints = steps.into_iter().collect();
        c.survival.max_steps = *c.survival.checkpoints.last().unwrap();
        c.survival.h_lag = h_lag;
        c.paths.initial = initial;
        c.paths.base_radius = base_radius;
        c.paths.xi_ref = xi_ref;
        c.paths.second_seed = second_seed;
        c.cone.half_angles = half_angles;
        c.validate.hitting_k = hitting_k;
        c
    }
}

proptest! {
    #[test]
    fn emitted_config_parses_back_identically(c in config()) {
        c.validate().unwrap();
        let text = c.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn runtime_settings_do_not_change_the_hash(c in config(), threads in 1usize..16) {
        let mut d = c.clone();
        d.runtime.threads = Some(threads);
        d.runtime.checkpoint_every = Some(5.0);
        prop_assert_eq!(d.hash(), c.hash());
        prop_assert_eq!(d.without_runtime(), c);
    }
}

#[test]
fn defaults_are_valid_for_every_kind() {
    for kind in ExperimentKind::ALL {
        let c = ExperimentConfig::default_for(kind);
        assert_eq!(c.schema_version, SCHEMA_VERSION);
        c.validate().unwrap();
    }
}

fn usage_message(text: &str) -> String {
    match ExperimentConfig::from_json(text) {
        Err(CliError::Usage(m)) => m,
        other => panic!("expected a usage error, got {other:?}"),
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let msg = usage_message(r#"{"schema_version":1,"experiment":"survival","seed":1,"sedd":2}"#);
    assert!(msg.contains("sedd"), "{msg}");
    let msg = usage_message(r#"{"schema_version":1,"experiment":"survival","seed":1,"survival":{"pairz":5}}"#);
    assert!(msg.contains("pairz"), "{msg}");
}

#[test]
fn unknown_experiment_is_rejected() {
    let msg = usage_message(r#"{"schema_version":1,"experiment":"survivl","seed":1}"#);
    assert!(msg.contains("survivl"), "{msg}");
}

#[test]
fn wrong_schema_version_is_rejected() {
    let msg = usage_message(r#"{"schema_version":2,"experiment":"survival","seed":1}"#);
    assert!(msg.starts_with("schema_version"), "{msg}");
}

#[test]
fn field_errors_name_the_field() {
    let mut c = ExperimentConfig::default_for(ExperimentKind::Survival);
    c.survival.checkpoints.clear();
    let msg = usage_message(&c.to_json());
    assert!(msg.starts_with("survival.checkpoints"), "{msg}");

    let mut c = ExperimentConfig::default_for(ExperimentKind::Survival);
    c.survival.checkpoints = vec![10, 20_000];
    let msg = usage_message(&c.to_json());
    assert!(msg.starts_with("survival.checkpoints"), "{msg}");

    let mut c = ExperimentConfig::default_for(ExperimentKind::Cone);
    c.cone.half_angles = vec![4.0];
    let msg = usage_message(&c.to_json());
    assert!(msg.starts_with("cone.half_angles[0]"), "{msg}");

    let mut c = ExperimentConfig::default_for(ExperimentKind::Mixing);
    c.paths.initial.pop();
    let msg = usage_message(&c.to_json());
    assert!(msg.starts_with("paths.initial"), "{msg}");
}

#[test]
fn minimal_config_takes_defaults() {
    let c = ExperimentConfig::from_json(r#"{"schema_version":1,"experiment":"tuple","seed":9}"#);
    let c = c.unwrap();
    assert_eq!(c.seed, 9);
    assert_eq!(c.survival.pairs, 100_000);
}
