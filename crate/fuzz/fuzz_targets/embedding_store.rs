#![no_main]

use libfuzzer_sys::fuzz_target;
use sasv_core::data::{EmbeddingStore, StoreKind};

fuzz_target!(|data: &[u8]| {
    for kind in [StoreKind::Asv, StoreKind::Cm] {
        if let Ok(store) = EmbeddingStore::from_bytes(data, kind) {
            let bytes = store.to_binary().expect("a parsed store re-encodes");
            let again = EmbeddingStore::from_binary(&bytes, kind).expect("re-encoded store parses");
            assert_eq!(again.len(), store.len());
        }
    }
});
