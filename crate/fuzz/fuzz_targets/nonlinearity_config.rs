#![no_main]

use libfuzzer_sys::fuzz_target;
use nehari::graph::path_graph;
use nehari::io::parse_nonlinearity_config;

fuzz_target!(|data: &[u8]| {
    let Ok(cfg) = parse_nonlinearity_config(data, "fuzz") else {
        return;
    };
    let g = path_graph(3, 1.0, 1.0, 0.0);
    if let Ok(nl) = cfg.build(&g) {
        let _ = nl.check_shape(&g);
        for x in 0..3 {
            let _ = (nl.f(x, 0.5), nl.F(x, -2.0), nl.df(x, 1.0));
        }
    }
});
