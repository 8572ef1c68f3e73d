#![no_main]

use libfuzzer_sys::fuzz_target;
use nehari::io::parse_run_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = parse_run_config(data, "fuzz") {
        let _ = cfg.solver_config().validate();
    }
});
