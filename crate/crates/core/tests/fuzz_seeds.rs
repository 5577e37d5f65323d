//! Replays the checked-in fuzz corpora so regressions show up in `cargo test`.

use std::fs;
use std::path::Path;

use rnkit::fuzz_checks::TARGETS;

#[test]
fn corpora_replay_cleanly() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus");
    for (target, check) in TARGETS {
        let dir = root.join(target);
        let (mut seen, mut accepted) = (0, 0);
        for entry in fs::read_dir(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display())) {
            let path = entry.unwrap().path();
            accepted += usize::from(check(&fs::read(&path).unwrap()));
            seen += 1;
        }
        assert!(accepted > 0, "{target}: {accepted} of {seen} seeds accepted");
    }
}

#[test]
fn every_target_has_a_harness() {
    let targets = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/fuzz_targets");
    for (target, _) in TARGETS {
        assert!(targets.join(format!("{target}.rs")).is_file(), "missing harness for {target}");
    }
}

#[test]
fn arbitrary_bytes_do_not_trip_the_checks() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let alphabet = b"{}[]\":,/-0123456789 \nabcdefghijklmnopqrstuvwxyz";
    for _ in 0..2000 {
        let len = rng.random_range(0..40);
        let data: Vec<u8> = (0..len)
            .map(|_| if rng.random_bool(0.8) { alphabet[rng.random_range(0..alphabet.len())] } else { rng.random() })
            .collect();
        for (_, check) in TARGETS {
            let _ = check(&data);
        }
    }
}
