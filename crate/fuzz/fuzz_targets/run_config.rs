#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let args = vec!["mecat".into(), "--config".into(), "fuzz.json".into()];
    let _ = mecat_cli::parse_with_config(args, |_| Ok(data.to_string()));
});
