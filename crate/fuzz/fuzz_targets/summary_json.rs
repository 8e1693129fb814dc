#![no_main]
use kernel_greedy::MethodSummary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(summary) = MethodSummary::from_json(text) {
        let again = summary.to_json().unwrap();
        let _ = MethodSummary::from_json(&again).unwrap();
    }
});
