#![no_main]

use libfuzzer_sys::fuzz_target;
use normlearn::data::{CsvReader, LabelMapping};

fuzz_target!(|data: &[u8]| {
    // label column by index so arbitrary headers still exercise parsing
    if let Ok(reader) = CsvReader::new(data, "0", LabelMapping::Identity) {
        for item in reader {
            if item.is_err() {
                break;
            }
        }
    }
});
