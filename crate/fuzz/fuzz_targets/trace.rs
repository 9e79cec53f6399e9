#![no_main]

use libfuzzer_sys::fuzz_target;
use normlearn::theory::trace::RunTrace;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = RunTrace::read_from(data) {
        let text = trace.to_text();
        let again = RunTrace::from_text(&text).expect("serialized trace reparses");
        assert_eq!(trace, again);
    }
});
