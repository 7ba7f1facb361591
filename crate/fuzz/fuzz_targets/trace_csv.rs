//! Fuzzes the access-trace CSV importer.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = voltsnn::dram::AccessTrace::read_csv(data);
});
