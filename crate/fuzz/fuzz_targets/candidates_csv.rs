#![no_main]
use kernel_greedy::io::{read_candidates, write_candidates};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(file) = read_candidates(data) else { return };
    let mut out = Vec::new();
    write_candidates(&mut out, &file.functionals, file.samples.as_deref()).unwrap();
    assert_eq!(read_candidates(out.as_slice()).unwrap(), file);
});
