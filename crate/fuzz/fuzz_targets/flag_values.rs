#![no_main]

use libfuzzer_sys::fuzz_target;
use probfn::config::Fixture;
use probfn::gaussian_radial::SamplingMethod;
use probfn::prob::TiePolicy;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = text.parse::<Fixture>() {
        assert_eq!(f.as_str(), text);
    }
    if let Ok(m) = text.parse::<SamplingMethod>() {
        assert_eq!(m.as_str().parse::<SamplingMethod>().unwrap(), m);
    }
    let _ = text.parse::<TiePolicy>();
});
