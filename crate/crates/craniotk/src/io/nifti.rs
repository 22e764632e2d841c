//! A strict NIfTI-1 subset for binary masks and scalar maps.
//!
//! Accepted: single-file `n+1` volumes (optionally gzipped, by `.gz`
//! extension), either byte order, datatypes uint8 (2) and float32 (16),
//! up to three non-trivial dimensions, and an axis-aligned orientation
//! given by the qform (or, when the qform code is 0, the sform). Axis
//! permutations and flips are normalized on read so that voxel axes follow
//! world x, y, z with positive spacing. Anything else is rejected.
//!
//! Written files are uint8 (masks) or float32 (scalar maps), little endian,
//! `vox_offset` 352, qform and sform code 1 with identity rotation, and are
//! byte-for-byte deterministic (gzip mtime is zero).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use craniotk_core::{Geometry, ScalarGrid, VoxelGrid};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::{Compression, GzBuilder};

pub const HEADER_SIZE: usize = 348;
pub const VOX_OFFSET: usize = 352;
pub const DT_UINT8: i16 = 2;
pub const DT_FLOAT32: i16 = 16;
/// Written into `descrip` so files carry their format version.
pub const DESCRIP: &str = "craniotk volume v1";

#[derive(Debug, thiserror::Error)]
pub enum NiftiError {
    #[error("not a single-file NIfTI-1 volume (bad magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("orientation is not an axis permutation with flips")]
    NonOrthogonalOrientation,
    #[error("file truncated: need {needed} bytes, have {actual}")]
    Truncated { needed: usize, actual: usize },
    #[error("unsupported header: {0}")]
    UnsupportedHeader(String),
    #[error(transparent)]
    Geometry(#[from] craniotk_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

type Result<T> = std::result::Result<T, NiftiError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

struct Reader<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Reader<'_> {
    fn arr<const N: usize>(&self, off: usize) -> [u8; N] {
        let mut a = [0u8; N];
        a.copy_from_slice(&self.bytes[off..off + N]);
        if self.endian == Endian::Big {
            a.reverse();
        }
        a
    }
    fn i16(&self, off: usize) -> i16 {
        i16::from_le_bytes(self.arr(off))
    }
    fn f32(&self, off: usize) -> f32 {
        f32::from_le_bytes(self.arr(off))
    }
}

/// Decoded volume: geometry in the normalized axis convention plus samples
/// in normalized linear order (x fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct RawVolume {
    pub geometry: Geometry,
    pub datatype: i16,
    pub values: Vec<f64>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let io_err = |source| NiftiError::Io { path: path.display().to_string(), source };
    let file = File::open(path).map_err(io_err)?;
    let mut bytes = Vec::new();
    if is_gz(path) {
        GzDecoder::new(file).read_to_end(&mut bytes).map_err(io_err)?;
    } else {
        std::io::BufReader::new(file).read_to_end(&mut bytes).map_err(io_err)?;
    }
    Ok(bytes)
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

/// Parse an in-memory `.nii` image.
pub fn parse(bytes: &[u8]) -> Result<RawVolume> {
    if bytes.len() < HEADER_SIZE {
        return Err(NiftiError::Truncated { needed: HEADER_SIZE, actual: bytes.len() });
    }
    let endian = if i32::from_le_bytes(bytes[0..4].try_into().unwrap()) == HEADER_SIZE as i32 {
        Endian::Little
    } else if i32::from_be_bytes(bytes[0..4].try_into().unwrap()) == HEADER_SIZE as i32 {
        Endian::Big
    } else {
        return Err(NiftiError::UnsupportedHeader("sizeof_hdr is not 348".into()));
    };
    let r = Reader { bytes, endian };
    let magic: [u8; 4] = bytes[344..348].try_into().unwrap();
    if &magic != b"n+1\0" {
        return Err(NiftiError::BadMagic(magic));
    }

    let ndim = r.i16(40);
    if !(1..=7).contains(&ndim) {
        return Err(NiftiError::UnsupportedHeader(format!("dim[0] = {ndim}")));
    }
    let mut dims = [1usize; 3];
    for d in 1..=ndim as usize {
        let v = r.i16(40 + 2 * d);
        if v < 1 {
            return Err(NiftiError::UnsupportedHeader(format!("dim[{d}] = {v}")));
        }
        if d <= 3 {
            dims[d - 1] = v as usize;
        } else if v != 1 {
            return Err(NiftiError::UnsupportedHeader(format!("dim[{d}] = {v}; only 3-D volumes are supported")));
        }
    }

    let datatype = r.i16(70);
    let bitpix = r.i16(72);
    let width = match datatype {
        DT_UINT8 => 1,
        DT_FLOAT32 => 4,
        other => return Err(NiftiError::UnsupportedDatatype(other)),
    };
    if bitpix as usize != 8 * width {
        return Err(NiftiError::UnsupportedHeader(format!("bitpix {bitpix} does not match datatype {datatype}")));
    }

    let vox_offset = r.f32(108);
    if !(vox_offset >= VOX_OFFSET as f32) || vox_offset.fract() != 0.0 {
        return Err(NiftiError::UnsupportedHeader(format!("vox_offset {vox_offset}")));
    }
    let offset = vox_offset as usize;
    let n = dims[0] * dims[1] * dims[2];
    let needed = offset + n * width;
    if bytes.len() < needed {
        return Err(NiftiError::Truncated { needed, actual: bytes.len() });
    }

    let slope = r.f32(112) as f64;
    let inter = r.f32(116) as f64;
    let (slope, inter) = if slope == 0.0 || !slope.is_finite() { (1.0, 0.0) } else { (slope, inter) };

    let pixdim: [f64; 8] = std::array::from_fn(|i| r.f32(76 + 4 * i) as f64);
    let (columns, offset_world) = orientation(&r, &pixdim)?;

    let raw: Vec<f64> = match datatype {
        DT_UINT8 => bytes[offset..needed].iter().map(|&b| b as f64).collect(),
        _ => (0..n).map(|i| r.f32(offset + 4 * i) as f64).collect(),
    };
    let raw: Vec<f64> = raw.into_iter().map(|v| v * slope + inter).collect();
    normalize(dims, &columns, offset_world, raw, datatype)
}

/// Columns of the index → world matrix (one per data axis) and the offset.
fn orientation(r: &Reader<'_>, pixdim: &[f64; 8]) -> Result<([[f64; 3]; 3], [f64; 3])> {
    let qform_code = r.i16(252);
    let sform_code = r.i16(254);
    if qform_code > 0 {
        let (b, c, d) = (r.f32(256) as f64, r.f32(260) as f64, r.f32(264) as f64);
        let a2 = 1.0 - (b * b + c * c + d * d);
        if a2 < -1e-6 {
            return Err(NiftiError::UnsupportedHeader("invalid quaternion".into()));
        }
        let a = a2.max(0.0).sqrt();
        let rot = [
            [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
            [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
            [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
        ];
        let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let spacing = [pixdim[1], pixdim[2], pixdim[3]];
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(NiftiError::UnsupportedHeader(format!("pixdim {spacing:?}")));
        }
        let scale = [spacing[0], spacing[1], spacing[2] * qfac];
        let columns = std::array::from_fn(|j| std::array::from_fn(|i| rot[i][j] * scale[j]));
        let offset = [r.f32(268) as f64, r.f32(272) as f64, r.f32(276) as f64];
        Ok((columns, offset))
    } else if sform_code > 0 {
        let rows: [[f64; 4]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| r.f32(280 + 16 * i + 4 * j) as f64));
        let columns = std::array::from_fn(|j| std::array::from_fn(|i| rows[i][j]));
        Ok((columns, [rows[0][3], rows[1][3], rows[2][3]]))
    } else {
        Err(NiftiError::UnsupportedHeader("neither qform nor sform is set".into()))
    }
}

/// Reorder samples so voxel axes follow world x, y, z with positive steps.
fn normalize(
    dims: [usize; 3],
    columns: &[[f64; 3]; 3],
    offset: [f64; 3],
    raw: Vec<f64>,
    datatype: i16,
) -> Result<RawVolume> {
    let mut world_axis = [0usize; 3];
    let mut sign = [1.0f64; 3];
    let mut spacing = [0.0f64; 3];
    let mut used = [false; 3];
    for (j, col) in columns.iter().enumerate() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(NiftiError::NonOrthogonalOrientation);
        }
        let w = (0..3).max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs())).unwrap();
        if (0..3).any(|i| i != w && col[i].abs() > 1e-6 * norm) || used[w] {
            return Err(NiftiError::NonOrthogonalOrientation);
        }
        used[w] = true;
        world_axis[j] = w;
        sign[j] = col[w].signum();
        spacing[w] = col[w].abs();
    }
    let mut new_dims = [0usize; 3];
    let mut origin = offset;
    for j in 0..3 {
        let w = world_axis[j];
        new_dims[w] = dims[j];
        if sign[j] < 0.0 {
            origin[w] = offset[w] - spacing[w] * (dims[j] as f64 - 1.0);
        }
    }
    let geometry = Geometry::new(new_dims, spacing, origin)?;
    let identity = world_axis == [0, 1, 2] && sign.iter().all(|&s| s > 0.0);
    let values = if identity {
        raw
    } else {
        let mut out = vec![0.0; raw.len()];
        let mut lin = 0;
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let src = [i, j, k];
                    let mut dst = [0usize; 3];
                    for a in 0..3 {
                        dst[world_axis[a]] = if sign[a] > 0.0 { src[a] } else { dims[a] - 1 - src[a] };
                    }
                    out[geometry.linear(dst[0], dst[1], dst[2])] = raw[lin];
                    lin += 1;
                }
            }
        }
        out
    };
    Ok(RawVolume { geometry, datatype, values })
}

pub fn read_raw(path: &Path) -> Result<RawVolume> {
    parse(&read_bytes(path)?)
}

/// Read a mask; any nonzero sample becomes a set voxel.
pub fn read_volume(path: &Path) -> Result<VoxelGrid> {
    let raw = read_raw(path)?;
    let bits: Vec<bool> = raw.values.iter().map(|&v| v != 0.0).collect();
    Ok(VoxelGrid::from_bools(raw.geometry, &bits)?)
}

pub fn read_scalar_volume(path: &Path) -> Result<ScalarGrid> {
    let raw = read_raw(path)?;
    Ok(ScalarGrid::new(raw.geometry, raw.values)?)
}

/// Serialize a header plus payload into a complete `.nii` byte image.
pub fn encode(geometry: &Geometry, datatype: i16, payload: &[u8]) -> Vec<u8> {
    let mut h = vec![0u8; VOX_OFFSET];
    let put_i16 = |h: &mut Vec<u8>, off: usize, v: i16| h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut Vec<u8>, off: usize, v: f32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());
    h[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    h[38] = b'r';
    let dims = [3i16, geometry.dims[0] as i16, geometry.dims[1] as i16, geometry.dims[2] as i16, 1, 1, 1, 1];
    for (i, d) in dims.iter().enumerate() {
        put_i16(&mut h, 40 + 2 * i, *d);
    }
    put_i16(&mut h, 70, datatype);
    put_i16(&mut h, 72, if datatype == DT_UINT8 { 8 } else { 32 });
    let pixdim = [1.0, geometry.spacing[0], geometry.spacing[1], geometry.spacing[2], 1.0, 1.0, 1.0, 1.0];
    for (i, p) in pixdim.iter().enumerate() {
        put_f32(&mut h, 76 + 4 * i, *p as f32);
    }
    put_f32(&mut h, 108, VOX_OFFSET as f32);
    put_f32(&mut h, 112, 1.0);
    h[123] = 2; // xyzt_units: mm
    let descrip = DESCRIP.as_bytes();
    h[148..148 + descrip.len()].copy_from_slice(descrip);
    put_i16(&mut h, 252, 1);
    put_i16(&mut h, 254, 1);
    for a in 0..3 {
        put_f32(&mut h, 268 + 4 * a, geometry.origin[a] as f32);
        put_f32(&mut h, 280 + 16 * a + 4 * a, geometry.spacing[a] as f32);
        put_f32(&mut h, 280 + 16 * a + 12, geometry.origin[a] as f32);
    }
    h[344..348].copy_from_slice(b"n+1\0");
    h.extend_from_slice(payload);
    h
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| NiftiError::Io { path: path.display().to_string(), source };
    let file = BufWriter::new(File::create(path).map_err(io_err)?);
    if is_gz(path) {
        let mut gz: GzEncoder<_> = GzBuilder::new().mtime(0).write(file, Compression::default());
        gz.write_all(bytes).map_err(io_err)?;
        gz.finish().map_err(io_err)?.flush().map_err(io_err)?;
    } else {
        let mut file = file;
        file.write_all(bytes).map_err(io_err)?;
        file.flush().map_err(io_err)?;
    }
    Ok(())
}

fn check_dims(geometry: &Geometry) -> Result<()> {
    if geometry.dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(NiftiError::UnsupportedHeader(format!("dims {:?} exceed the NIfTI-1 limit", geometry.dims)));
    }
    Ok(())
}

/// Write a mask as uint8 (0/1).
pub fn write_volume(m: &VoxelGrid, path: &Path) -> Result<()> {
    check_dims(m.geometry())?;
    write_bytes(path, &encode(m.geometry(), DT_UINT8, &m.to_bytes()))
}

/// Write a scalar map as float32.
pub fn write_scalar_volume(g: &ScalarGrid, path: &Path) -> Result<()> {
    check_dims(g.geometry())?;
    let payload: Vec<u8> = g.data().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    write_bytes(path, &encode(g.geometry(), DT_FLOAT32, &payload))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry() -> Geometry {
        Geometry::new([3, 4, 2], [0.5, 1.0, 2.0], [-1.0, 2.0, 3.0]).unwrap()
    }

    fn header_for(mask: &VoxelGrid) -> Vec<u8> {
        encode(mask.geometry(), DT_UINT8, &mask.to_bytes())
    }

    fn sample_mask() -> VoxelGrid {
        VoxelGrid::from_fn(geometry(), |[i, j, k]| (i + 2 * j + k) % 3 == 0)
    }

    #[test]
    fn parse_round_trip() {
        let m = sample_mask();
        let raw = parse(&header_for(&m)).unwrap();
        assert_eq!(raw.geometry, *m.geometry());
        let back =
            VoxelGrid::from_bools(raw.geometry, &raw.values.iter().map(|&v| v != 0.0).collect::<Vec<_>>()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn detached_magic_is_rejected() {
        let mut bytes = header_for(&sample_mask());
        bytes[344..348].copy_from_slice(b"ni1\0");
        assert!(matches!(parse(&bytes), Err(NiftiError::BadMagic(_))));
    }

    #[test]
    fn unsupported_datatype() {
        let mut bytes = header_for(&sample_mask());
        bytes[70..72].copy_from_slice(&4i16.to_le_bytes());
        assert!(matches!(parse(&bytes), Err(NiftiError::UnsupportedDatatype(4))));
    }

    #[test]
    fn truncated_payload() {
        let bytes = header_for(&sample_mask());
        assert!(matches!(parse(&bytes[..bytes.len() - 1]), Err(NiftiError::Truncated { .. })));
        assert!(matches!(parse(&bytes[..100]), Err(NiftiError::Truncated { .. })));
    }

    #[test]
    fn oblique_qform_is_rejected() {
        let mut bytes = header_for(&sample_mask());
        // 30 degrees about z
        let half = (15.0f32).to_radians();
        bytes[264..268].copy_from_slice(&half.sin().to_le_bytes());
        assert!(matches!(parse(&bytes), Err(NiftiError::NonOrthogonalOrientation)));
    }

    #[test]
    fn sheared_sform_is_rejected() {
        let mut bytes = header_for(&sample_mask());
        bytes[252..254].copy_from_slice(&0i16.to_le_bytes());
        bytes[284..288].copy_from_slice(&0.3f32.to_le_bytes());
        assert!(matches!(parse(&bytes), Err(NiftiError::NonOrthogonalOrientation)));
    }

    #[test]
    fn missing_orientation_is_rejected() {
        let mut bytes = header_for(&sample_mask());
        bytes[252..256].fill(0);
        assert!(matches!(parse(&bytes), Err(NiftiError::UnsupportedHeader(_))));
    }

    #[test]
    fn float_payload_is_binarized() {
        let g = geometry();
        let payload: Vec<u8> = (0..g.len()).flat_map(|i| if i % 2 == 0 { 1.0f32 } else { 0.0 }.to_le_bytes()).collect();
        let raw = parse(&encode(&g, DT_FLOAT32, &payload)).unwrap();
        assert_eq!(raw.values.iter().filter(|&&v| v != 0.0).count(), g.len().div_ceil(2));
    }

    #[test]
    fn flipped_x_axis_is_normalized() {
        let m = sample_mask();
        let g = *m.geometry();
        // store the x axis reversed and point the sform column at -x
        let mut flipped = VoxelGrid::empty(g);
        for lin in m.iter_on() {
            let [i, j, k] = g.coords(lin);
            flipped.set(g.dims[0] - 1 - i, j, k, true);
        }
        let mut bytes = header_for(&flipped);
        bytes[252..254].copy_from_slice(&0i16.to_le_bytes());
        let x_max = g.origin[0] + g.spacing[0] * (g.dims[0] as f64 - 1.0);
        bytes[280..284].copy_from_slice(&(-(g.spacing[0] as f32)).to_le_bytes());
        bytes[292..296].copy_from_slice(&(x_max as f32).to_le_bytes());
        let raw = parse(&bytes).unwrap();
        assert_eq!(raw.geometry, g);
        let back =
            VoxelGrid::from_bools(raw.geometry, &raw.values.iter().map(|&v| v != 0.0).collect::<Vec<_>>()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn big_endian_header_is_read() {
        let m = sample_mask();
        let le = header_for(&m);
        let mut be = le.clone();
        let swap = |b: &mut Vec<u8>, off: usize, w: usize| b[off..off + w].reverse();
        swap(&mut be, 0, 4);
        for i in 0..8 {
            swap(&mut be, 40 + 2 * i, 2);
        }
        for off in [70, 72, 252, 254] {
            swap(&mut be, off, 2);
        }
        for i in 0..8 {
            swap(&mut be, 76 + 4 * i, 4);
        }
        for off in [108, 112, 116, 256, 260, 264, 268, 272, 276] {
            swap(&mut be, off, 4);
        }
        for i in 0..12 {
            swap(&mut be, 280 + 4 * i, 4);
        }
        assert_eq!(parse(&be).unwrap(), parse(&le).unwrap());
    }
}
