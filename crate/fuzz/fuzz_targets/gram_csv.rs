#![no_main]
use kernel_greedy::io::{read_gram, write_gram};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = read_gram(data) {
        let mut out = Vec::new();
        write_gram(&mut out, &m).unwrap();
        assert_eq!(read_gram(out.as_slice()).unwrap(), m);
    }
});
