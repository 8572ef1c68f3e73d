#![no_main]

use libfuzzer_sys::fuzz_target;
use nehari::io::parse_sweep_config;

fuzz_target!(|data: &[u8]| {
    let Ok(file) = parse_sweep_config(data, "fuzz") else {
        return;
    };
    if let Ok(cfg) = file.sweep_config() {
        assert!(cfg.fractions.iter().all(|f| *f > 0.0 && *f < 1.0));
    }
});
