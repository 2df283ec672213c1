mod common;

use std::fs;

use common::golden;

#[test]
fn prompts_match_committed_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let dir = golden::dir();
    if update {
        fs::create_dir_all(&dir).unwrap();
    }
    let mut stale = Vec::new();
    for (name, text) in golden::cases() {
        let path = dir.join(format!("{name}.txt"));
        if update {
            fs::write(&path, &text).unwrap();
            continue;
        }
        let committed = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}; run with UPDATE_GOLDEN=1", path.display()));
        if committed != text {
            stale.push(name);
        }
    }
    assert!(stale.is_empty(), "prompts differ from golden files: {stale:?}");
}

#[test]
fn prompt_construction_is_byte_stable() {
    let first = golden::cases();
    for _ in 0..3 {
        assert_eq!(golden::cases(), first);
    }
    let from_threads: Vec<_> = (0..4).map(|_| std::thread::spawn(golden::cases)).map(|h| h.join().unwrap()).collect();
    assert!(from_threads.iter().all(|c| *c == first));
}
