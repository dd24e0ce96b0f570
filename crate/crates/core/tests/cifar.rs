use std::path::Path;

use ossgcl::stream::{load_cifar_dir, parse_cifar, CifarVariant, InputShape, PIXELS};
use ossgcl::Error;

/// Three records with labels 3, 0, 9 and pixel bytes `(r * 7 + k) % 256`.
fn fixture(variant: CifarVariant, labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for (r, &y) in labels.iter().enumerate() {
        if variant == CifarVariant::Cifar100 {
            out.push(y / 10);
        }
        out.push(y);
        out.extend((0..PIXELS).map(|k| ((r * 7 + k) % 256) as u8));
    }
    out
}

#[test]
fn parses_exact_tensors_and_labels() {
    let bytes = fixture(CifarVariant::Cifar10, &[3, 0, 9]);
    let ds = parse_cifar(&bytes, CifarVariant::Cifar10, Path::new("fx.bin")).unwrap();
    assert_eq!(ds.labels, vec![3, 0, 9]);
    assert_eq!(ds.classes, 10);
    assert_eq!(ds.shape, InputShape::Image { channels: 3, height: 32, width: 32 });
    for r in 0..3 {
        let f = &ds.features[r];
        assert_eq!(f.len(), PIXELS);
        for k in [0, 1, 1023, 1024, 2048, 3071] {
            assert_eq!(f[k], ((r * 7 + k) % 256) as f64 / 255.0);
        }
    }
}

#[test]
fn cifar100_reads_the_fine_label() {
    let bytes = fixture(CifarVariant::Cifar100, &[57, 3, 99]);
    let ds = parse_cifar(&bytes, CifarVariant::Cifar100, Path::new("fx.bin")).unwrap();
    assert_eq!(ds.labels, vec![57, 3, 99]);
    assert_eq!(ds.features[1][0], 7.0 / 255.0);
}

#[test]
fn truncation_reports_record_offset() {
    let bytes = fixture(CifarVariant::Cifar10, &[3, 0, 9]);
    let cut = &bytes[..bytes.len() - 100];
    match parse_cifar(cut, CifarVariant::Cifar10, Path::new("fx.bin")) {
        Err(Error::Data { offset, path, .. }) => {
            assert_eq!(offset, 2 * 3073);
            assert_eq!(path, Path::new("fx.bin"));
        }
        other => panic!("{other:?}"),
    }
    assert!(parse_cifar(&[], CifarVariant::Cifar10, Path::new("e")).is_err());
}

#[test]
fn bad_label_reports_its_byte() {
    let mut bytes = fixture(CifarVariant::Cifar10, &[3, 0, 9]);
    bytes[3073] = 12;
    match parse_cifar(&bytes, CifarVariant::Cifar10, Path::new("fx.bin")) {
        Err(Error::Data { offset, .. }) => assert_eq!(offset, 3073),
        other => panic!("{other:?}"),
    }
}

#[test]
fn loads_a_directory_of_batches() {
    let dir = tempfile::tempdir().unwrap();
    let v = CifarVariant::Cifar10;
    for (i, name) in v.train_files().iter().enumerate() {
        std::fs::write(dir.path().join(name), fixture(v, &[i as u8, 9 - i as u8])).unwrap();
    }
    std::fs::write(dir.path().join(v.test_file()), fixture(v, &[1])).unwrap();
    let (train, test) = load_cifar_dir(dir.path(), v).unwrap();
    assert_eq!(train.len(), 2 * v.train_files().len());
    assert_eq!(test.labels, vec![1]);
    std::fs::remove_file(dir.path().join(v.test_file())).unwrap();
    assert!(matches!(load_cifar_dir(dir.path(), v), Err(Error::Io { .. })));
}
