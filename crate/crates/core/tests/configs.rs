use std::path::Path;

use gtbandit::experiment::{ExperimentConfig, PRESETS};

#[test]
fn shipped_configs_match_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in PRESETS {
        let loaded = ExperimentConfig::load(&dir.join(format!("{name}.toml"))).unwrap();
        let preset = ExperimentConfig::preset(name).unwrap();
        assert_eq!(loaded.hash(), preset.hash(), "{name}");
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let mut text = ExperimentConfig::preset("fig2a-desk").unwrap().to_toml();
    text = text.replacen("horizon", "horizn", 1);
    assert!(ExperimentConfig::from_toml(&text).is_err());
}
