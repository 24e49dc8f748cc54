use std::path::{Path, PathBuf};

use liquar_core::harness::{preset, preset_names};
use liquar_core::ExperimentConfig;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "toml")).collect();
    v.sort();
    v
}

#[test]
fn shipped_configs_match_presets() {
    let root = configs_dir();
    for name in preset_names() {
        let p = preset(name).unwrap();
        let loaded: Vec<ExperimentConfig> = if p.configs.len() == 1 {
            vec![ExperimentConfig::load(root.join(format!("{name}.toml"))).unwrap()]
        } else {
            files(&root.join(name)).iter().map(|f| ExperimentConfig::load(f).unwrap()).collect()
        };
        assert_eq!(loaded, p.configs, "{name}");
    }
}

#[test]
fn shipped_configs_round_trip() {
    let root = configs_dir();
    let mut all = files(&root);
    for name in preset_names() {
        if root.join(name).is_dir() {
            all.extend(files(&root.join(name)));
        }
    }
    assert!(all.len() >= 14);
    for f in all {
        let text = std::fs::read_to_string(&f).unwrap();
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.to_toml_string().unwrap(), text, "{}", f.display());
    }
}
