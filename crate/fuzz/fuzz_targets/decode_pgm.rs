#![no_main]

use hyperplastic::cube_io::decode_pgm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_pgm(data);
});
