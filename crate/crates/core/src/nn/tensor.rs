use super::NnError;

/// Dense row-major `f32` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorF32 {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl TensorF32 {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, NnError> {
        let n: usize = dims.iter().product();
        if dims.contains(&0) || n != data.len() {
            return Err(NnError::ShapeMismatch(format!(
                "dims {dims:?} do not describe {} values",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            data: vec![0.0; n],
        }
    }

    pub fn full(dims: Vec<usize>, value: f32) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            data: vec![value; n],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self, NnError> {
        Self::new(dims, self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `[N, C, H, W]` of a rank-4 tensor.
    pub fn nchw(&self) -> Result<[usize; 4], NnError> {
        match self.dims[..] {
            [n, c, h, w] => Ok([n, c, h, w]),
            _ => Err(NnError::ShapeMismatch(format!("expected rank 4, got {:?}", self.dims))),
        }
    }

    /// Item `i` along the leading (batch) axis, keeping a leading 1.
    pub fn batch_item(&self, i: usize) -> Self {
        let per = self.numel() / self.dims[0];
        let mut dims = self.dims.clone();
        dims[0] = 1;
        Self {
            dims,
            data: self.data[i * per..(i + 1) * per].to_vec(),
        }
    }

    /// Concatenates tensors along the leading axis.
    pub fn stack(items: Vec<Self>) -> Result<Self, NnError> {
        let first = items
            .first()
            .ok_or_else(|| NnError::ShapeMismatch("cannot stack zero tensors".into()))?;
        let tail = first.dims[1..].to_vec();
        let mut n = 0;
        let mut data = Vec::with_capacity(items.iter().map(Self::numel).sum());
        for it in &items {
            if it.dims[1..] != tail[..] {
                return Err(NnError::ShapeMismatch(format!(
                    "cannot stack {:?} with {:?}",
                    it.dims, first.dims
                )));
            }
            n += it.dims[0];
            data.extend_from_slice(&it.data);
        }
        let mut dims = vec![n];
        dims.extend(tail);
        Ok(Self { dims, data })
    }
}
