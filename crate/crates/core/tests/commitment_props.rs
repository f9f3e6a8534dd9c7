use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use zk3col_core::commitment::{commit, verify_opening, Opening, Salt};
use zk3col_core::stats::pearson_uniform;

#[test]
fn binding_over_random_trials() {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    for _ in 0..100_000 {
        let vertex = rng.gen_range(0..64u32);
        let color = rng.gen_range(1..=3u8);
        let salt = Salt::random(&mut rng);
        let cm = commit(vertex, color, &salt);
        let other = color % 3 + 1;
        assert!(verify_opening(&cm, &Opening { vertex, color, salt }));
        assert!(!verify_opening(&cm, &Opening { vertex, color: other, salt }));
        assert!(!verify_opening(&cm, &Opening { vertex: vertex + 1, color, salt }));
        let mut tweaked = salt;
        tweaked.0[rng.gen_range(0..16)] ^= 1 << rng.gen_range(0..8);
        assert!(!verify_opening(&cm, &Opening { vertex, color, salt: tweaked }));
    }
}

#[test]
fn digests_look_uniform_regardless_of_color() {
    // byte histogram of digests of a fixed (vertex, color) with fresh salts
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for color in 1..=3u8 {
        let mut counts = vec![0u64; 256];
        for _ in 0..20_000 {
            let cm = commit(0, color, &Salt::random(&mut rng));
            for b in cm.0 {
                counts[b as usize] += 1;
            }
        }
        let chi = pearson_uniform(&counts);
        assert!(chi.p > 0.01, "color {color}: {chi:?}");
    }
}

#[test]
fn digests_distinct_within_rounds() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let mut seen = std::collections::HashSet::new();
    for _ in 0..1000 {
        let mut salt = [0u8; 16];
        rng.fill_bytes(&mut salt);
        for v in 0..20 {
            assert!(seen.insert(commit(v, 1, &Salt(salt)).0));
        }
    }
}
