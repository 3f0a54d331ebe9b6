#![no_main]

use extruplan::Plan;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = Plan::from_json(text) {
        let _ = Plan::from_json(&p.to_json()).expect("round trip");
    }
});
