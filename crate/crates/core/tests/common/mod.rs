#![allow(dead_code)]

pub mod gradcheck;

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use ditherlab::dataset::{load_mnist, Mnist, Split};

/// `DITHERLAB_DATA_DIR`, else `<workspace>/data/mnist`.
pub fn mnist_dir() -> PathBuf {
    std::env::var_os("DITHERLAB_DATA_DIR").map(PathBuf::from).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
    })
}

pub fn mnist() -> &'static Mnist {
    static MNIST: OnceLock<Mnist> = OnceLock::new();
    MNIST.get_or_init(|| {
        let dir = mnist_dir();
        load_mnist(&dir).unwrap_or_else(|e| {
            panic!("MNIST not available ({e}); run scripts/fetch-mnist.sh or set DITHERLAB_DATA_DIR")
        })
    })
}

pub fn split() -> &'static Split {
    static SPLIT: OnceLock<Split> = OnceLock::new();
    SPLIT.get_or_init(|| {
        let m = mnist();
        Split::prepare(&m.train, &m.test, 256).expect("256-example split")
    })
}

pub fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares `actual` with a checked-in golden file; `BLESS=1` rewrites it.
pub fn assert_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with BLESS=1 to create)", path.display()));
    assert!(expected == actual, "{} differs from the freshly generated output", path.display());
}
