#![no_main]

use libfuzzer_sys::fuzz_target;
use mecat_core::generators::RateFunction;

fuzz_target!(|data: &str| {
    if let Ok(f) = data.parse::<RateFunction>() {
        let _ = f.checked_value(0.5);
        let _ = f.derivative(0.5);
        // the canonical spelling must parse back
        let again: RateFunction = f.spec_string().parse().expect("spec_string round trip");
        assert_eq!(again.spec_string(), f.spec_string());
    }
});
