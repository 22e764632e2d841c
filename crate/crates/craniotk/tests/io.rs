use craniotk::io::manifest::{parse_manifest, to_json};
use craniotk::io::nifti::{self, NiftiError};
use craniotk::io::{read_manifest, read_scalar_volume, read_volume, write_manifest, write_scalar_volume, write_volume};
use craniotk::io::{CaseEntry, DatasetManifest, DatasetSubset};
use craniotk_core::{Geometry, ScalarGrid, VoxelGrid};

#[test]
fn gz_and_plain_round_trip_with_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let g = Geometry::new([7, 5, 3], [0.695, 0.695, 0.715], [-10.5, 3.25, 0.0]).unwrap();
    let m = VoxelGrid::from_fn(g, |[i, j, k]| (i * j + k) % 4 == 1);
    for name in ["a.nii", "a.nii.gz"] {
        let p = dir.path().join(name);
        write_volume(&m, &p).unwrap();
        let first = std::fs::read(&p).unwrap();
        write_volume(&m, &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), first);
        let back = read_volume(&p).unwrap();
        assert_eq!(back.to_bools(), m.to_bools());
        assert_eq!(back.geometry().dims, g.dims);
        for a in 0..3 {
            assert_eq!(back.geometry().spacing[a], g.spacing[a] as f32 as f64);
            assert_eq!(back.geometry().origin[a], g.origin[a] as f32 as f64);
        }
    }
}

#[test]
fn empty_mask_writes_zero_payload() {
    let dir = tempfile::tempdir().unwrap();
    let g = Geometry::new([4, 4, 4], [1.0; 3], [0.0; 3]).unwrap();
    let p = dir.path().join("e.nii");
    write_volume(&VoxelGrid::empty(g), &p).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(bytes.len(), nifti::VOX_OFFSET + 64);
    assert!(bytes[nifti::VOX_OFFSET..].iter().all(|&b| b == 0));
    assert!(read_volume(&p).unwrap().is_empty());
}

#[test]
fn common_grid_payload_is_one_byte_per_voxel() {
    let dir = tempfile::tempdir().unwrap();
    let g = Geometry::new([304, 304, 224], [0.695, 0.695, 0.715], [0.0; 3]).unwrap();
    let p = dir.path().join("big.nii");
    write_volume(&VoxelGrid::empty(g), &p).unwrap();
    assert_eq!(std::fs::metadata(&p).unwrap().len() as usize, nifti::VOX_OFFSET + 304 * 304 * 224);
}

#[test]
fn scalar_maps_keep_float32_values() {
    let dir = tempfile::tempdir().unwrap();
    let g = Geometry::new([3, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
    let values: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
    let p = dir.path().join("avg.nii.gz");
    write_scalar_volume(&ScalarGrid::new(g, values.clone()).unwrap(), &p).unwrap();
    let back = read_scalar_volume(&p).unwrap();
    for (a, b) in back.data().iter().zip(&values) {
        assert_eq!(*a, *b as f32 as f64);
    }
}

#[test]
fn detached_header_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let g = Geometry::new([2, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
    let p = dir.path().join("x.nii");
    write_volume(&VoxelGrid::full(g), &p).unwrap();
    let mut bytes = std::fs::read(&p).unwrap();
    bytes[344..348].copy_from_slice(b"ni1\0");
    std::fs::write(&p, bytes).unwrap();
    assert!(matches!(read_volume(&p), Err(NiftiError::BadMagic(_))));
}

#[test]
fn manifest_file_round_trip_and_path_check() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a_full.nii.gz"), b"").unwrap();
    let mut m = DatasetManifest::new(3);
    let mut c = CaseEntry::new("a", DatasetSubset::TestExtra);
    c.paths.full = Some("a_full.nii.gz".into());
    m.cases.push(c);
    let p = dir.path().join("manifest.json");
    write_manifest(&m, &p).unwrap();
    assert_eq!(read_manifest(&p).unwrap(), m);
    assert_eq!(
        to_json(&parse_manifest(&std::fs::read_to_string(&p).unwrap()).unwrap()),
        std::fs::read_to_string(&p).unwrap()
    );

    std::fs::remove_file(dir.path().join("a_full.nii.gz")).unwrap();
    assert!(read_manifest(&p).is_err());
}
