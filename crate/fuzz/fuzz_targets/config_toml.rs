#![no_main]
use kernel_greedy::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = ExperimentConfig::from_toml(text) else { return };
    // Validation and derived settings must reject bad values, never panic.
    if config.validate().is_ok() {
        let _ = config.kernel();
        let _ = config.phantom();
        let _ = config.methods();
    }
    if let Ok(again) = config.to_toml() {
        assert_eq!(ExperimentConfig::from_toml(&again).unwrap(), config);
    }
});
