#![no_main]

use hyperplastic::pipeline::SynthConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = SynthConfig::from_json_slice(data);
});
