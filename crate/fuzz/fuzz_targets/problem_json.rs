#![no_main]

use extruplan::FrameProblem;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = FrameProblem::from_json(text) {
        // accepted problems must survive a round trip
        let again = FrameProblem::from_json(&p.to_json()).expect("round trip");
        assert_eq!(again.num_elements(), p.num_elements());
    }
});
