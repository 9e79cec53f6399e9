#![no_main]

use libfuzzer_sys::fuzz_target;
use normlearn::model_io::{load_model, save_model};

fuzz_target!(|data: &[u8]| {
    // anything that loads must save and reload to the same state
    if let Ok((state, config)) = load_model(data) {
        let mut buf = Vec::new();
        save_model(&mut buf, &state, &config).expect("in-memory save");
        let (state2, config2) = load_model(buf.as_slice()).expect("saved model reloads");
        assert_eq!(state, state2);
        assert_eq!(config.algorithm, config2.algorithm);
    }
});
