//! Fuzzes the IDX image-file parser. Errors are fine; panics and runaway
//! allocations are not.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = voltsnn::dataset::read_idx_images(&mut &data[..]);
});
