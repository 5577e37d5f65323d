#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    rnkit::fuzz_checks::name_stream(data);
});
