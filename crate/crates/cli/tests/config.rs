use msgd_lab::config::{Command, ModelSpec, SchemeSpec};
use msgd_lab::{validate_config, ConfigError};

fn key_of(err: ConfigError) -> (String, String) {
    match err {
        ConfigError::Key { key, message } => (key, message),
        other => panic!("expected a key error, got {other}"),
    }
}

#[test]
fn minimal_config_gets_documented_defaults() {
    let cfg = validate_config(r#"{"command": "clt"}"#).unwrap();
    assert_eq!(cfg.seed, 0);
    assert!(cfg.out.is_none());
    let Command::Clt { params, thresholds } = &cfg.command else {
        panic!("wrong command")
    };
    assert_eq!(params.model, ModelSpec::Uniform { p: 1 });
    assert_eq!(params.schemes, vec![SchemeSpec::Dirichlet]);
    assert_eq!((params.n, params.m, params.samples, params.bins), (10_000, 2000, 10_000, 50));
    assert_eq!(thresholds.ks_max, 0.03);
    for (name, _) in msgd_lab::COMMANDS {
        validate_config(&format!(r#"{{"command": "{name}"}}"#)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn step_size_outside_unit_interval_is_rejected() {
    let raw = r#"{"command": "gd-ode", "params": {"gammas": [0.1, 1.5]}}"#;
    let (key, msg) = key_of(validate_config(raw).unwrap_err());
    assert_eq!(key, "params.gammas[1]");
    assert!(msg.contains("0 < gamma < 1"), "{msg}");
}

#[test]
fn dirichlet_needs_two_or_more() {
    let raw = r#"{"command": "weights-moments", "params": {"n": 10, "m": 1, "schemes": [{"kind": "dirichlet"}]}}"#;
    let (key, msg) = key_of(validate_config(raw).unwrap_err());
    assert_eq!(key, "params.schemes[0]");
    assert!(msg.contains('m'), "{msg}");
}

#[test]
fn unknown_keys_are_named() {
    let (key, msg) = key_of(validate_config(r#"{"command": "clt", "sede": 3}"#).unwrap_err());
    assert!(msg.contains("sede"), "{key}: {msg}");
    let (key, msg) = key_of(validate_config(r#"{"command": "clt", "params": {"bins": 10, "bogus": 1}}"#).unwrap_err());
    assert!(msg.contains("bogus") && key.starts_with("params"), "{key}: {msg}");
    let raw = r#"{"command": "clt", "params": {"model": {"kind": "uniform", "p": 1, "s": 2}}}"#;
    let (key, msg) = key_of(validate_config(raw).unwrap_err());
    assert!(msg.contains('s') && key.starts_with("params.model"), "{key}: {msg}");
    let (key, _) = key_of(validate_config(r#"{"command": "clt", "thresholds": {"ks": 1}}"#).unwrap_err());
    assert!(key.starts_with("thresholds"), "{key}");
}

#[test]
fn wrong_types_name_the_key() {
    let (key, _) = key_of(validate_config(r#"{"command": "clt", "params": {"n": "many"}}"#).unwrap_err());
    assert_eq!(key, "params.n");
}

#[test]
fn syntax_errors_carry_line_numbers() {
    let raw = "{\n  \"command\": \"clt\",\n  \"seed\": 1,,\n}";
    match validate_config(raw).unwrap_err() {
        ConfigError::Syntax(msg) => assert!(msg.contains("line 3"), "{msg}"),
        other => panic!("{other}"),
    }
}

#[test]
fn unknown_and_missing_commands() {
    let (key, msg) = key_of(validate_config(r#"{"command": "train"}"#).unwrap_err());
    assert_eq!(key, "command");
    assert!(msg.contains("wass-scaling"));
    let (key, _) = key_of(validate_config(r#"{"seed": 1}"#).unwrap_err());
    assert_eq!(key, "command");
}

#[test]
fn cross_field_rules() {
    let both = r#"{"command": "converge", "params": {"steps": 10, "horizon": 1.0}}"#;
    assert_eq!(key_of(validate_config(both).unwrap_err()).0, "params.horizon");
    let kappas = r#"{"command": "converge", "params": {"kappas": [0.1]}}"#;
    assert_eq!(key_of(validate_config(kappas).unwrap_err()).0, "params.kappas");
    let no_kappa = r#"{"command": "converge", "params": {"model": {"kind": "logistic", "p": 2, "t": 10}}}"#;
    assert_eq!(key_of(validate_config(no_kappa).unwrap_err()).0, "params.model.kappa");
    let off_grid = r#"{"command": "wass-scaling", "params": {"gammas": [0.3, 0.1]}}"#;
    assert_eq!(key_of(validate_config(off_grid).unwrap_err()).0, "params.gammas[0]");
    let dup = r#"{"command": "clt", "params": {"schemes": [{"kind": "minibatch"}, {"kind": "minibatch"}]}}"#;
    assert_eq!(key_of(validate_config(dup).unwrap_err()).0, "params.schemes[1]");
    let neg = r#"{"command": "clt", "thresholds": {"ks_max": -1}}"#;
    assert_eq!(key_of(validate_config(neg).unwrap_err()).0, "thresholds.ks_max");
}

#[test]
fn seed_override_updates_the_echo() {
    let cfg = validate_config(r#"{"command": "gd-ode", "seed": 5}"#).unwrap().with_seed(99);
    assert_eq!(cfg.seed, 99);
    assert_eq!(cfg.echo()["seed"], 99);
}
