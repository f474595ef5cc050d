#![no_main]

use hyperplastic::cube_io::SceneManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = SceneManifest::from_json_slice(data);
});
