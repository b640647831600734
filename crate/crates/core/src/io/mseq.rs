//! MSEQ binary tensor container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   4 bytes  "MSEQ"
//! version u32      = 1
//! dtype   u8       1 = f32, 2 = f64, 3 = u8
//! ndim    u8
//! reserved u16     = 0
//! dims    ndim x u64
//! payload row-major elements
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::deform::{DeformField, Frame, VelocityField};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MSEQ";
const VERSION: u32 = 1;
const MAX_NDIM: u8 = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
}

impl TensorData {
    fn dtype_code(&self) -> u8 {
        match self {
            TensorData::F32(_) => 1,
            TensorData::F64(_) => 2,
            TensorData::U8(_) => 3,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// N-dimensional row-major tensor with an explicit element type.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u64>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<u64>, data: TensorData) -> Result<Self> {
        let expect = checked_len(&dims)?;
        if expect != data.len() as u64 {
            return Err(Error::Dim(format!(
                "dims {:?} imply {expect} elements but the payload holds {}",
                dims,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.data.dtype_code(), self.dims.len() as u8])?;
        w.write_all(&0u16.to_le_bytes())?;
        for d in &self.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        match &self.data {
            TensorData::F32(v) => {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            TensorData::F64(v) => {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            TensorData::U8(v) => w.write_all(v)?,
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Tensor> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(Error::Parse(format!(
                "not an MSEQ file: bad magic bytes {:02x?}",
                magic
            )));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::Parse(format!("unsupported MSEQ version {version}")));
        }
        let mut head = [0u8; 4];
        r.read_exact(&mut head).map_err(truncated)?;
        let (dtype, ndim) = (head[0], head[1]);
        let reserved = u16::from_le_bytes([head[2], head[3]]);
        if reserved != 0 {
            return Err(Error::Parse(format!("MSEQ reserved field must be 0, got {reserved}")));
        }
        if ndim > MAX_NDIM {
            return Err(Error::Parse(format!("MSEQ rank {ndim} exceeds the maximum {MAX_NDIM}")));
        }
        let mut dims = Vec::with_capacity(ndim as usize);
        for _ in 0..ndim {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(truncated)?;
            dims.push(u64::from_le_bytes(b));
        }
        let count = checked_len(&dims)?;
        let data = match dtype {
            1 => {
                let mut v = Vec::with_capacity(count as usize);
                let mut b = [0u8; 4];
                for _ in 0..count {
                    r.read_exact(&mut b).map_err(truncated)?;
                    v.push(f32::from_le_bytes(b));
                }
                TensorData::F32(v)
            }
            2 => {
                let mut v = Vec::with_capacity(count as usize);
                let mut b = [0u8; 8];
                for _ in 0..count {
                    r.read_exact(&mut b).map_err(truncated)?;
                    v.push(f64::from_le_bytes(b));
                }
                TensorData::F64(v)
            }
            3 => {
                let mut v = vec![0u8; count as usize];
                r.read_exact(&mut v).map_err(truncated)?;
                TensorData::U8(v)
            }
            other => return Err(Error::Parse(format!("unknown MSEQ dtype code {other}"))),
        };
        // Trailing bytes mean the file does not round-trip; reject them.
        let mut probe = [0u8; 1];
        match r.read(&mut probe)? {
            0 => Tensor::new(dims, data),
            _ => Err(Error::Parse("MSEQ payload has trailing bytes".into())),
        }
    }

    pub fn write_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)
    }

    pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Tensor> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    // ---- conversions ----

    pub fn from_matrix(m: &DMatrix<f64>) -> Tensor {
        let (h, w) = m.shape();
        let mut v = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                v.push(m[(r, c)]);
            }
        }
        Tensor { dims: vec![h as u64, w as u64], data: TensorData::F64(v) }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.dims.len() != 2 {
            return Err(Error::Dim(format!("expected a rank-2 tensor, got rank {}", self.dims.len())));
        }
        let (h, w) = (self.dims[0] as usize, self.dims[1] as usize);
        let get = |k: usize| -> f64 {
            match &self.data {
                TensorData::F32(v) => v[k] as f64,
                TensorData::F64(v) => v[k],
                TensorData::U8(v) => v[k] as f64,
            }
        };
        Ok(DMatrix::from_fn(h, w, |r, c| get(r * w + c)))
    }

    /// H x W x 2 layout with the (axis-0, axis-1) components interleaved per
    /// pixel.
    pub fn from_field(d0: &DMatrix<f64>, d1: &DMatrix<f64>) -> Tensor {
        let (h, w) = d0.shape();
        let mut v = Vec::with_capacity(h * w * 2);
        for r in 0..h {
            for c in 0..w {
                v.push(d0[(r, c)]);
                v.push(d1[(r, c)]);
            }
        }
        Tensor { dims: vec![h as u64, w as u64, 2], data: TensorData::F64(v) }
    }

    fn to_components(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if self.dims.len() != 3 || self.dims[2] != 2 {
            return Err(Error::Dim("expected an H x W x 2 field tensor".into()));
        }
        let (h, w) = (self.dims[0] as usize, self.dims[1] as usize);
        let get = |k: usize| -> f64 {
            match &self.data {
                TensorData::F32(v) => v[k] as f64,
                TensorData::F64(v) => v[k],
                TensorData::U8(v) => v[k] as f64,
            }
        };
        let d0 = DMatrix::from_fn(h, w, |r, c| get((r * w + c) * 2));
        let d1 = DMatrix::from_fn(h, w, |r, c| get((r * w + c) * 2 + 1));
        Ok((d0, d1))
    }

    pub fn from_velocity(v: &VelocityField) -> Tensor {
        Self::from_field(v.component(0), v.component(1))
    }

    pub fn to_velocity(&self) -> Result<VelocityField> {
        let (d0, d1) = self.to_components()?;
        VelocityField::new(d0, d1)
    }

    pub fn from_deform(phi: &DeformField) -> Tensor {
        Self::from_field(phi.displacement(0), phi.displacement(1))
    }

    pub fn to_deform(&self) -> Result<DeformField> {
        let (d0, d1) = self.to_components()?;
        DeformField::from_displacement(d0, d1)
    }

    /// Frames serialize as f32 images; reading accepts any scalar dtype.
    pub fn from_frame_f32(f: &Frame) -> Tensor {
        let (h, w) = f.shape();
        let mut v = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                v.push(f.data[(r, c)] as f32);
            }
        }
        Tensor { dims: vec![h as u64, w as u64], data: TensorData::F32(v) }
    }

    pub fn to_frame(&self) -> Result<Frame> {
        Frame::new(self.to_matrix()?)
    }

    pub fn from_labels(m: &DMatrix<u8>) -> Tensor {
        let (h, w) = m.shape();
        let mut v = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                v.push(m[(r, c)]);
            }
        }
        Tensor { dims: vec![h as u64, w as u64], data: TensorData::U8(v) }
    }

    pub fn to_bool_mask(&self) -> Result<DMatrix<bool>> {
        if self.dims.len() != 2 {
            return Err(Error::Dim("expected a rank-2 mask tensor".into()));
        }
        let (h, w) = (self.dims[0] as usize, self.dims[1] as usize);
        let get = |k: usize| -> bool {
            match &self.data {
                TensorData::F32(v) => v[k] != 0.0,
                TensorData::F64(v) => v[k] != 0.0,
                TensorData::U8(v) => v[k] != 0,
            }
        };
        Ok(DMatrix::from_fn(h, w, |r, c| get(r * w + c)))
    }
}

fn checked_len(dims: &[u64]) -> Result<u64> {
    let mut acc: u64 = 1;
    for &d in dims {
        acc = acc
            .checked_mul(d)
            .ok_or_else(|| Error::Parse("MSEQ dimensions overflow".into()))?;
    }
    if acc > (1 << 33) {
        return Err(Error::Parse(format!("MSEQ payload of {acc} elements is unreasonably large")));
    }
    Ok(acc)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Parse("MSEQ file is truncated".into())
    } else {
        Error::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn round_trip(t: &Tensor) -> Tensor {
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        Tensor::read_from(&mut buf.as_slice()).unwrap()
    }

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[1.5, -2.25, 0.1, f64::MIN_POSITIVE, 1e300, -0.0]);
        let t = Tensor::from_matrix(&m);
        let back = round_trip(&t);
        assert_eq!(t, back);
        assert_eq!(back.to_matrix().unwrap(), m);
    }

    #[test]
    fn bad_magic_is_reported_with_the_format_name() {
        let mut buf = Vec::new();
        Tensor::from_matrix(&DMatrix::zeros(2, 2)).write_to(&mut buf).unwrap();
        buf[0] = b'X';
        let err = Tensor::read_from(&mut buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("MSEQ"), "message: {err}");
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut buf = Vec::new();
        Tensor::from_matrix(&DMatrix::zeros(2, 2)).write_to(&mut buf).unwrap();
        buf.push(0);
        assert!(Tensor::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn truncation_is_rejected() {
        let mut buf = Vec::new();
        Tensor::from_matrix(&DMatrix::zeros(4, 4)).write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(Tensor::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn field_layout_interleaves_components() {
        let d0 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let d1 = DMatrix::from_row_slice(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        let t = Tensor::from_field(&d0, &d1);
        assert_eq!(t.dims, vec![2, 2, 2]);
        match &t.data {
            TensorData::F64(v) => assert_eq!(v, &[1.0, 5.0, 2.0, 6.0, 3.0, 7.0, 4.0, 8.0]),
            _ => panic!("wrong dtype"),
        }
        let (b0, b1) = t.to_components().unwrap();
        assert_eq!(b0, d0);
        assert_eq!(b1, d1);
    }

    proptest! {
        #[test]
        fn arbitrary_tensors_round_trip(
            h in 1usize..6,
            w in 1usize..6,
            which in 0u8..3,
            bits in proptest::collection::vec(any::<u64>(), 36),
        ) {
            let n = h * w;
            let data = match which {
                0 => TensorData::F32(bits.iter().take(n).map(|&b| f32::from_bits(b as u32)).collect()),
                1 => TensorData::F64(bits.iter().take(n).map(|&b| f64::from_bits(b)).collect()),
                _ => TensorData::U8(bits.iter().take(n).map(|&b| b as u8).collect()),
            };
            let t = Tensor::new(vec![h as u64, w as u64], data).unwrap();
            let mut buf = Vec::new();
            t.write_to(&mut buf).unwrap();
            let back = Tensor::read_from(&mut buf.as_slice()).unwrap();
            let mut buf2 = Vec::new();
            back.write_to(&mut buf2).unwrap();
            prop_assert_eq!(buf, buf2);
        }
    }
}
