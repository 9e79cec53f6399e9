#![no_main]

use libfuzzer_sys::fuzz_target;
use normlearn::data::{parse_svmlight_line, serialize_example, LabelMapping, SvmlightReader};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };

    // single line: parsing may fail but must not panic, and anything that
    // parses must survive a canonical round trip
    if let Ok(example) = parse_svmlight_line(text, 1) {
        let canonical = serialize_example(&example);
        let again = parse_svmlight_line(&canonical, 1).expect("canonical form reparses");
        assert_eq!(again, example);
    }

    // whole-stream reader with label mapping
    for item in SvmlightReader::new(text.as_bytes(), LabelMapping::ZeroOneToPm1) {
        if item.is_err() {
            break;
        }
    }
});
