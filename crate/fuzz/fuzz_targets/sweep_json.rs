#![no_main]

use libfuzzer_sys::fuzz_target;
use pqr_lab::experiments::SweepConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = SweepConfig::from_json(text) {
        let _ = cfg.fit_window();
        let json = serde_json::to_string(&cfg).unwrap();
        // a validated config must serialise back into a valid one
        SweepConfig::from_json(&json).unwrap();
    }
});
