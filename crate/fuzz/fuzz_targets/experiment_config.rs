#![no_main]

use hyperplastic::pipeline::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = ExperimentConfig::from_json_slice(data);
});
