#![no_main]

use hyperplastic::cube_io::decode_ppm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_ppm(data);
});
