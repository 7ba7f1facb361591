//! Fuzzes the accuracy-profile CSV reader.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = voltsnn::fat::AccuracyProfile::read_csv(data);
});
