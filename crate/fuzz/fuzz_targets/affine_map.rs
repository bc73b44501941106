#![no_main]

use fixmk_core::geometry::{cesaro_average, AffineMap, Vector};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(map) = serde_json::from_slice::<AffineMap>(data) else {
        return;
    };
    let json = serde_json::to_string(&map).unwrap();
    let back: AffineMap = serde_json::from_str(&json).unwrap();
    assert_eq!(back, map);
    let x = Vector::from_element(map.dim(), 0.5);
    let _ = map.apply(&x).unwrap();
    let _ = map.compose(&map).unwrap();
    let _ = map.inverse();
    let _ = cesaro_average(&map, 5).unwrap();
});
