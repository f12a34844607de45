#![no_main]

use libfuzzer_sys::fuzz_target;
use phasedyn::cli::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = parse_config(text) {
        // anything accepted must survive a serialize/parse round trip
        let echoed = serde_json::to_string(&config).expect("accepted config serializes");
        let again = parse_config(&echoed).expect("echoed config parses");
        assert_eq!(again, config);
    }
});
