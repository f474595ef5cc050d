#![no_main]

use hyperplastic::classify::ModelFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = ModelFile::from_json_slice(data);
});
