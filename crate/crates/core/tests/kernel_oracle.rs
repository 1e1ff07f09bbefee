mod common;

use qkext::harness::generate_data;
use qkext::kernel::{build_kernel_matrix, DataSource};
use qkext::pqc::{builtin, BUILTIN_IDS};

#[test]
fn kernel_matches_dense_unitary_gram() {
    for id in BUILTIN_IDS {
        for (w, layers) in [(1, 1), (2, 2), (3, 1)] {
            let t = builtin(id, w, layers).unwrap();
            let data = generate_data(
                DataSource::UniformRandom,
                20,
                t.param_count(),
                23,
                None,
                None,
            )
            .unwrap();
            let k = build_kernel_matrix(&t, &data).unwrap();
            let oracle = common::gram_oracle(&t, data.points());
            let diff = (k.values() - &oracle).abs().max();
            assert!(diff < 1e-10, "{id} w={w} L={layers}: diff {diff}");
        }
    }
}
