#![no_main]

use fixmk_core::geometry::Polytope;
use fixmk_core::semigroup::{validate_structure, SemigroupNode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(node) = serde_json::from_slice::<SemigroupNode>(data) else {
        return;
    };
    let json = serde_json::to_string(&node).unwrap();
    let back: SemigroupNode = serde_json::from_str(&json).unwrap();
    assert_eq!(back.generator_count(), node.generator_count());
    assert_eq!(back.depth(), node.depth());
    if node.dim() <= 4 && node.generator_count() <= 4 {
        let cube = Polytope::cube(node.dim(), -1.0, 1.0).unwrap();
        let _ = validate_structure(&node, &cube, 2, 1e-9);
    }
});
