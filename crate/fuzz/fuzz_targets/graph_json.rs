#![no_main]

use libfuzzer_sys::fuzz_target;
use nehari::io::{graph_to_json, parse_graph};

fuzz_target!(|data: &[u8]| {
    let Ok(g) = parse_graph(data, "fuzz") else { return };
    let _ = g.validate();
    // whatever parses must survive a write/read cycle unchanged
    let again = parse_graph(graph_to_json(&g).as_bytes(), "roundtrip").expect("serialized graph parses");
    assert_eq!(again, g);
});
