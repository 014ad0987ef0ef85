#![no_main]

use libfuzzer_sys::fuzz_target;
use pqr_lab::graph::KernelSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(k) = KernelSpec::from_json(text) {
        assert!(k.delta > 0.0 && k.s0 > 0.0 && k.s2 > 0.0);
        let _ = k.eta_delta(0.5 * k.support_radius());
    }
});
