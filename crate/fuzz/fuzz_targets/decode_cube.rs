#![no_main]

use hyperplastic::cube_io::{decode_cube, encode_cube};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // anything that decodes must survive a round trip
    if let Ok(cube) = decode_cube(data) {
        let again = decode_cube(&encode_cube(&cube)).expect("re-encoded cube decodes");
        assert_eq!(encode_cube(&again), encode_cube(&cube));
    }
});
