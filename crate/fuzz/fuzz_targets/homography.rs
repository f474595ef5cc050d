#![no_main]

use hyperplastic::register::Homography;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = Homography::from_json_slice(data);
});
