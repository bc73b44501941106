#![no_main]

use fixmk_core::geometry::{NormSpec, Polytope};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(k) = serde_json::from_slice::<Polytope>(data) else {
        return;
    };
    if k.vertices().len() > 64 {
        return;
    }
    let json = serde_json::to_string(&k).unwrap();
    assert_eq!(serde_json::from_str::<Polytope>(&json).unwrap(), k);
    if k.vertices().iter().all(|v| v.amax() < 1e6) {
        assert!(k.contains(&k.centroid(), 1e-6).unwrap());
    }
    let _ = k.diameter(&NormSpec::max_abs(k.dim()).unwrap());
});
