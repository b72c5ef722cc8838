#![no_main]

use libfuzzer_sys::fuzz_target;
use probfn::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml(text) {
        let again = RunConfig::from_toml(&cfg.to_toml()).expect("serialized config reparses");
        assert_eq!(again, cfg);
    }
});
