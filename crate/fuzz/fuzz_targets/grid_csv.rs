#![no_main]

use libfuzzer_sys::fuzz_target;
use mecat_core::pseudospectra::{contour_levels, PseudospectrumGrid};

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = PseudospectrumGrid::from_csv(data, "fuzz") {
        let _ = g.local_minima();
        if g.n_re * g.n_im <= 1 << 14 {
            let _ = contour_levels(&g, &[1e-1, 1e-3]);
        }
    }
});
