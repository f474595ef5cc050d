#![no_main]

use hyperplastic::register::parse_correspondences;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_correspondences(data);
});
