use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A 2D scalar image with an optional integer label mask of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub data: DMatrix<f64>,
    pub label: Option<DMatrix<u8>>,
}

impl Frame {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 2 || data.ncols() < 2 {
            return Err(Error::Dim("frames must be at least 2x2".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("frame intensities must be finite".into()));
        }
        Ok(Self { data, label: None })
    }

    pub fn with_label(data: DMatrix<f64>, label: DMatrix<u8>) -> Result<Self> {
        if label.shape() != data.shape() {
            return Err(Error::Dim("label mask shape must match the image".into()));
        }
        let mut f = Self::new(data)?;
        f.label = Some(label);
        Ok(f)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    /// Row-major flattening, used by vector-in/vector-out likelihood models.
    pub fn to_vector(&self) -> DVector<f64> {
        let (h, w) = self.shape();
        DVector::from_fn(h * w, |k, _| self.data[(k / w, k % w)])
    }

    pub fn from_vector(v: &DVector<f64>, shape: (usize, usize)) -> Result<Self> {
        let (h, w) = shape;
        if v.len() != h * w {
            return Err(Error::Dim(format!("vector length {} does not fill {h}x{w}", v.len())));
        }
        Frame::new(DMatrix::from_fn(h, w, |r, c| v[r * w + c]))
    }

    /// Boolean mask of the pixels carrying a given label value.
    pub fn label_mask(&self, value: u8) -> Option<DMatrix<bool>> {
        self.label.as_ref().map(|l| l.map(|v| v == value))
    }
}

/// Static reference frame plus the image sequence explained as deformations
/// of it.
#[derive(Debug, Clone)]
pub struct FrameSeq {
    pub reference: Frame,
    pub frames: Vec<Frame>,
}

impl FrameSeq {
    pub fn new(reference: Frame, frames: Vec<Frame>) -> Result<Self> {
        let shape = reference.shape();
        if frames.iter().any(|f| f.shape() != shape) {
            return Err(Error::Dim("all frames must share the reference shape".into()));
        }
        Ok(Self { reference, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Per-pixel 2-vectors stored as two component planes.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Field2 {
    pub d0: DMatrix<f64>,
    pub d1: DMatrix<f64>,
}

impl Field2 {
    fn new(d0: DMatrix<f64>, d1: DMatrix<f64>) -> Result<Self> {
        if d0.shape() != d1.shape() {
            return Err(Error::Dim("field components must share a shape".into()));
        }
        if d0.nrows() < 2 || d0.ncols() < 2 {
            return Err(Error::Dim("fields must be at least 2x2".into()));
        }
        if d0.iter().chain(d1.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("field components must be finite".into()));
        }
        Ok(Self { d0, d1 })
    }

    fn zeros(h: usize, w: usize) -> Self {
        Self { d0: DMatrix::zeros(h, w), d1: DMatrix::zeros(h, w) }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.d0.shape()
    }

    /// Largest vector magnitude over the grid.
    pub fn max_magnitude(&self) -> f64 {
        let mut best = 0.0f64;
        for (a, b) in self.d0.iter().zip(self.d1.iter()) {
            best = best.max((a * a + b * b).sqrt());
        }
        best
    }

    /// Bilinear sample of both components at a continuous (row, col)
    /// position, clamped to the domain.
    pub fn sample_clamped(&self, r: f64, c: f64) -> (f64, f64) {
        let (h, w) = self.shape();
        let r = r.clamp(0.0, (h - 1) as f64);
        let c = c.clamp(0.0, (w - 1) as f64);
        let r0 = r.floor() as usize;
        let c0 = c.floor() as usize;
        let r1 = (r0 + 1).min(h - 1);
        let c1 = (c0 + 1).min(w - 1);
        let fr = r - r0 as f64;
        let fc = c - c0 as f64;
        let lerp = |m: &DMatrix<f64>| -> f64 {
            (1.0 - fr) * (1.0 - fc) * m[(r0, c0)]
                + (1.0 - fr) * fc * m[(r0, c1)]
                + fr * (1.0 - fc) * m[(r1, c0)]
                + fr * fc * m[(r1, c1)]
        };
        (lerp(&self.d0), lerp(&self.d1))
    }
}

/// Stationary velocity field v(x) in pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField(pub(crate) Field2);

/// Deformation phi(x) = x + u(x), stored as the displacement u.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformField(pub(crate) Field2);

impl VelocityField {
    pub fn new(d0: DMatrix<f64>, d1: DMatrix<f64>) -> Result<Self> {
        Field2::new(d0, d1).map(Self)
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self(Field2::zeros(h, w))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn component(&self, axis: usize) -> &DMatrix<f64> {
        match axis {
            0 => &self.0.d0,
            1 => &self.0.d1,
            _ => panic!("axis must be 0 or 1"),
        }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.0.max_magnitude()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(Field2 { d0: &self.0.d0 * factor, d1: &self.0.d1 * factor })
    }

    /// v + w, elementwise.
    pub fn add(&self, other: &VelocityField) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Dim("velocity fields must share a shape".into()));
        }
        Ok(Self(Field2 { d0: &self.0.d0 + &other.0.d0, d1: &self.0.d1 + &other.0.d1 }))
    }
}

impl DeformField {
    pub fn from_displacement(d0: DMatrix<f64>, d1: DMatrix<f64>) -> Result<Self> {
        Field2::new(d0, d1).map(Self)
    }

    pub fn identity(h: usize, w: usize) -> Self {
        Self(Field2::zeros(h, w))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn displacement(&self, axis: usize) -> &DMatrix<f64> {
        match axis {
            0 => &self.0.d0,
            1 => &self.0.d1,
            _ => panic!("axis must be 0 or 1"),
        }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.0.max_magnitude()
    }
}
