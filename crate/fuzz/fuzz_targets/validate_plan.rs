#![no_main]

use extruplan::{FrameProblem, Plan};
use libfuzzer_sys::fuzz_target;

// Any parsable plan against a fixed two-element chain: the validator must
// return a verdict, never panic.
const CHAIN: &str = include_str!("../corpus/problem_json/chain.json");

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(plan) = Plan::from_json(text) else { return };
    let problem = FrameProblem::from_json(CHAIN).expect("seed problem parses");
    let _ = extruplan::validate::validate_plan(&problem, &plan);
});
