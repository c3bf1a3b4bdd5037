use modkit_core::dataset::{generate_dataset, Dataset, DatasetConfig, Split};

fn small(seed: u64) -> DatasetConfig {
    DatasetConfig {
        count: 20,
        seed,
        splits: [0.5, 0.1, 0.4],
        ..DatasetConfig::default()
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ds = generate_dataset(&small(3)).unwrap();
    ds.write(a.path()).unwrap();
    generate_dataset(&small(3)).unwrap().write(b.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 22);
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        assert_eq!(x, y, "{n:?}");
    }
    let back = Dataset::read(a.path()).unwrap();
    assert_eq!(back, ds);
    let head = std::fs::read_to_string(a.path().join("seq_0.csv")).unwrap();
    assert!(head.starts_with("t,v_p,v_s,i_L\n"));
}

#[test]
fn splits_are_disjoint_and_exhaustive() {
    let ds = generate_dataset(&small(9)).unwrap();
    assert_eq!(ds.split(Split::Train).len(), 10);
    assert_eq!(ds.split(Split::Val).len(), 2);
    assert_eq!(ds.split(Split::Test).len(), 8);
    let mut all: Vec<usize> = Split::ALL.iter().flat_map(|s| ds.splits.get(*s).to_vec()).collect();
    all.sort_unstable();
    assert_eq!(all, (0..20).collect::<Vec<_>>());
    let other = generate_dataset(&small(10)).unwrap();
    assert_ne!(ds.splits, other.splits);
}

#[test]
fn threaded_generation_matches_serial() {
    let serial = generate_dataset(&small(4)).unwrap();
    let par = generate_dataset(&DatasetConfig { threads: 2, ..small(4) }).unwrap();
    assert_eq!(serial, par);
}
