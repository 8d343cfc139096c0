use std::path::Path;

use ascribe_server::{scan_assets, CatalogError};
use ascribe_session::{AssetEntry, AssetKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent catalog: plain recursive `read_dir`.
fn oracle(root: &Path, dir: &Path, out: &mut Vec<AssetEntry>) {
    let rel = |p: &Path| {
        p.strip_prefix(root)
            .unwrap()
            .iter()
            .map(|s| s.to_str().unwrap().to_string())
            .collect::<Vec<_>>()
            .join("/")
    };
    let mut pngs = (0usize, 0u64);
    let mut has_subdir = false;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            has_subdir = true;
            oracle(root, &p, out);
            continue;
        }
        let name = p.file_name().unwrap().to_str().unwrap().to_lowercase();
        let size = std::fs::metadata(&p).unwrap().len();
        let kind = if name.ends_with(".obj") {
            AssetKind::MeshObj
        } else if name.ends_with(".stl") {
            AssetKind::MeshStl
        } else {
            if name.ends_with(".png") {
                pngs = (pngs.0 + 1, pngs.1 + size);
            }
            continue;
        };
        out.push(AssetEntry { name: rel(&p), kind, size, slice_count: None });
    }
    if dir != root && !has_subdir && pngs.0 > 0 {
        out.push(AssetEntry {
            name: rel(dir),
            kind: AssetKind::ImageStack,
            size: pngs.1,
            slice_count: Some(pngs.0),
        });
    }
}

fn random_tree(rng: &mut ChaCha8Rng, dir: &Path, depth: usize) {
    std::fs::create_dir_all(dir).unwrap();
    const EXTS: [&str; 7] = ["obj", "stl", "png", "PNG", "OBJ", "txt", "json"];
    for i in 0..rng.random_range(0..6) {
        let ext = EXTS[rng.random_range(0..EXTS.len())];
        let len = rng.random_range(0..200);
        std::fs::write(dir.join(format!("f{i}_{}.{ext}", rng.random_range(0..100))), vec![7u8; len]).unwrap();
    }
    if depth < 3 {
        for i in 0..rng.random_range(0..3) {
            random_tree(rng, &dir.join(format!("d{i}")), depth + 1);
        }
    }
}

#[test]
fn examples() {
    let empty = tempfile::tempdir().unwrap();
    assert!(scan_assets(empty.path()).unwrap().is_empty());

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.obj"), "v 0 0 0\n").unwrap();
    std::fs::write(dir.path().join("b.stl"), [0u8; 84]).unwrap();
    std::fs::create_dir(dir.path().join("stack")).unwrap();
    std::fs::write(dir.path().join("stack/s0.png"), [1u8; 10]).unwrap();
    let got = scan_assets(dir.path()).unwrap();
    let kinds: Vec<_> = got.iter().map(|e| (e.name.as_str(), e.kind)).collect();
    assert_eq!(
        kinds,
        [("a.obj", AssetKind::MeshObj), ("b.stl", AssetKind::MeshStl), ("stack", AssetKind::ImageStack)]
    );
    assert_eq!(got[1].size, 84);
    assert_eq!(got[2].slice_count, Some(1));
}

#[test]
fn missing_root() {
    let err = scan_assets(Path::new("/definitely/not/here")).unwrap_err();
    assert!(matches!(err, CatalogError::RootNotFound(_)));
    assert_eq!(err.kind(), "RootNotFound");
}

#[test]
fn matches_directory_walk_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let dir = tempfile::tempdir().unwrap();
        random_tree(&mut rng, dir.path(), 0);
        let mut expect = Vec::new();
        oracle(dir.path(), dir.path(), &mut expect);
        expect.sort_by(|a, b| a.name.cmp(&b.name));
        let got = scan_assets(dir.path()).unwrap();
        assert_eq!(got, expect);
        assert_eq!(scan_assets(dir.path()).unwrap(), got, "scan is deterministic");
    }
}
