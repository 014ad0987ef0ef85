#![no_main]

use libfuzzer_sys::fuzz_target;
use pqr_lab::density::DensityModel;

fuzz_target!(|data: &[u8]| {
    // large cluster lists only make the normaliser slow, not interesting
    if data.len() > 4096 {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = DensityModel::from_json(text) {
        let d = model.domain().dim();
        let _ = model.eval(&vec![0.0; d]);
        let _ = model.eval(&vec![f64::NAN; d]);
    }
});
