//! File-format round trips and parse errors.

use std::fs;

use nlunmix::io::{
    load_endmembers_csv, load_scene, read_matrix_csv, save_endmembers_csv, save_scene,
    write_matrix_csv,
};
use nlunmix::Error;
use nlunmix_core::{
    generate_scene, generate_synthetic_endmembers, EndmemberMatrix, Matrix, MixingModel, NoiseSpec,
};

#[test]
fn endmembers_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let m = generate_synthetic_endmembers(37, 4, 9).unwrap();
    save_endmembers_csv(&path, &m).unwrap();
    let back = load_endmembers_csv(&path).unwrap();
    assert_eq!(back.matrix(), m.matrix());
    assert_eq!(back.wavelengths(), m.wavelengths());
    assert_eq!(back.names().map(|n| n.len()), Some(4));
}

#[test]
fn plain_grid_and_named_header_both_load() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("plain.csv");
    fs::write(&plain, "0.1,0.2\n0.3,0.4\n0.5,0.6\n").unwrap();
    let m = load_endmembers_csv(&plain).unwrap();
    assert_eq!((m.bands(), m.endmembers()), (3, 2));
    assert!(m.names().is_none());

    let named = dir.path().join("named.csv");
    fs::write(&named, "wavelength,soil,grass\n0.4,0.1,0.2\n0.5,0.3,0.4\n").unwrap();
    let m = load_endmembers_csv(&named).unwrap();
    assert_eq!(m.names().unwrap(), ["soil", "grass"]);
    assert_eq!(m.wavelengths().unwrap(), [0.4, 0.5]);
    assert_eq!(m.matrix().row(1), [0.3, 0.4]);
}

#[test]
fn parse_errors_name_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "wavelength,a,b\n0.4,0.1,0.2\n0.5,oops,0.4\n").unwrap();
    match load_endmembers_csv(&path).unwrap_err() {
        Error::Parse { row, col, .. } => assert_eq!((row, col), (3, 2)),
        e => panic!("unexpected {e}"),
    }
    fs::write(&path, "0.1,0.2\n0.3\n").unwrap();
    match read_matrix_csv(&path).unwrap_err() {
        Error::Parse { row, .. } => assert_eq!(row, 2),
        e => panic!("unexpected {e}"),
    }
    fs::write(&path, "0.1,NaN\n0.3,0.2\n").unwrap();
    assert!(matches!(
        read_matrix_csv(&path),
        Err(Error::Parse { row: 1, col: 2, .. })
    ));
    fs::write(&path, "").unwrap();
    assert!(matches!(read_matrix_csv(&path), Err(Error::Parse { .. })));
    fs::write(&path, "time,a\n0.4,0.1\n").unwrap();
    assert!(matches!(
        load_endmembers_csv(&path),
        Err(Error::Parse { row: 1, col: 1, .. })
    ));
}

#[test]
fn fewer_bands_than_endmembers_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wide.csv");
    fs::write(&path, "0.1,0.2,0.3\n0.3,0.4,0.5\n").unwrap();
    assert!(matches!(load_endmembers_csv(&path), Err(Error::Core(_))));
    assert!(load_endmembers_csv(&dir.path().join("missing.csv")).is_err());
}

#[test]
fn scenes_round_trip_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_synthetic_endmembers(30, 3, 1).unwrap();
    let scene =
        generate_scene(&m, 25, &MixingModel::gbm(0.6), &NoiseSpec::new(21.0, 4), 5).unwrap();
    save_scene(dir.path(), &scene).unwrap();
    assert_eq!(load_scene(dir.path()).unwrap(), scene);
    // No partial files are left behind.
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(names.iter().all(|n| !n.ends_with(".partial")), "{names:?}");
}

#[test]
fn matrix_csv_preserves_extreme_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let x =
        Matrix::from_rows(&[vec![1e-300, -0.1, 1.0 / 3.0], vec![f64::MAX, 5e-324, -0.0]]).unwrap();
    write_matrix_csv(&path, &x).unwrap();
    let back = read_matrix_csv(&path).unwrap();
    for (a, b) in x.as_slice().iter().zip(back.as_slice()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    // Headerless endmember files carry no metadata.
    let m = EndmemberMatrix::new(Matrix::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap())
        .unwrap();
    save_endmembers_csv(&path, &m).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), "0.1,0.2\n0.3,0.4\n");
}
