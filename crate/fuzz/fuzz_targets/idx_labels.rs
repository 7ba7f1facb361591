//! Fuzzes the IDX label-file parser.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = voltsnn::dataset::read_idx_labels(&mut &data[..]);
});
