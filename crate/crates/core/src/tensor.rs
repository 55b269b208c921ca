//! Dense row-major `f64` tensors and the raw kernels shared by the forward
//! pass and the reverse-mode tape.
//!
//! Every function here is pure: equal inputs give bit-equal outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as zero by [`Tensor::normalize_last`].
pub const NORM_GUARD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// View of a shape around one axis: `outer × len × inner`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct AxisSplit {
    pub outer: usize,
    pub len: usize,
    pub inner: usize,
}

impl AxisSplit {
    pub fn new(shape: &[usize], axis: usize) -> Self {
        AxisSplit {
            outer: shape[..axis].iter().product(),
            len: shape[axis],
            inner: shape[axis + 1..].iter().product(),
        }
    }

    #[inline]
    pub fn index(&self, o: usize, i: usize, n: usize) -> usize {
        (o * self.len + i) * self.inner + n
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid_shape("tensor", &shape, "extents must be positive"));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::invalid_shape(
                "tensor",
                &shape,
                format!("expected {numel} values, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "vector must be non-empty");
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(Error::invalid_shape("from_rows", &[rows.len(), cols], "empty matrix"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::shape("from_rows", &[cols], &[bad.len()]));
        }
        Ok(Tensor {
            shape: vec![rows.len(), cols],
            data: rows.concat(),
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = *self.shape.last().expect("row of a scalar");
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        let cols = self.shape.last().copied().unwrap_or(1);
        self.data.chunks(cols)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != self.numel() || shape.contains(&0) {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub(crate) fn check_axis(&self, op: &'static str, axis: usize) -> Result<()> {
        if axis >= self.rank() {
            return Err(Error::invalid_shape(op, &self.shape, format!("axis {axis} out of range")));
        }
        Ok(())
    }

    /// Matrix product. `self` may carry leading batch axes (`[.., m, k]`),
    /// which are flattened into rows; `rhs` must be `[k, n]`.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (m, k, n) = matmul_dims(&self.shape, &rhs.shape)?;
        let mut shape = self.shape.clone();
        *shape.last_mut().unwrap() = n;
        Ok(Tensor {
            shape,
            data: gemm(&self.data, &rhs.data, m, k, n),
        })
    }

    pub fn transpose(&self) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::invalid_shape("transpose", &self.shape, "expected a matrix"));
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        Ok(Tensor {
            shape: vec![c, r],
            data: transpose_raw(&self.data, r, c),
        })
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip_broadcast("add", rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip_broadcast("sub", rhs, |a, b| a - b)
    }

    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip_broadcast("mul", rhs, |a, b| a * b)
    }

    fn zip_broadcast(&self, op: &'static str, rhs: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape == rhs.shape {
            let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
            return Ok(Tensor {
                shape: self.shape.clone(),
                data,
            });
        }
        let shape = broadcast_shape(op, &self.shape, &rhs.shape)?;
        let lhs_map = broadcast_index_map(&self.shape, &shape);
        let rhs_map = broadcast_index_map(&rhs.shape, &shape);
        let data = lhs_map
            .iter()
            .zip(&rhs_map)
            .map(|(&i, &j)| f(self.data[i], rhs.data[j]))
            .collect();
        Ok(Tensor { shape, data })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn relu(&self) -> Tensor {
        self.map(|v| v.max(0.0))
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.map(|v| v * c)
    }

    /// Sum along `axis`, removing it.
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        self.check_axis("sum_axis", axis)?;
        let split = AxisSplit::new(&self.shape, axis);
        let mut out = vec![0.0; split.outer * split.inner];
        for o in 0..split.outer {
            for i in 0..split.len {
                let src = &self.data[split.index(o, i, 0)..split.index(o, i, 0) + split.inner];
                let dst = &mut out[o * split.inner..(o + 1) * split.inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        Ok(Tensor { shape, data: out })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        self.check_axis("softmax", axis)?;
        let split = AxisSplit::new(&self.shape, axis);
        let mut out = self.data.clone();
        for o in 0..split.outer {
            for n in 0..split.inner {
                let idx = |i| split.index(o, i, n);
                let max = (0..split.len).map(|i| out[idx(i)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for i in 0..split.len {
                    let e = (out[idx(i)] - max).exp();
                    out[idx(i)] = e;
                    total += e;
                }
                for i in 0..split.len {
                    out[idx(i)] /= total;
                }
            }
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: out,
        })
    }

    /// Average pooling along axis 0 with window `size` and `stride`.
    ///
    /// Produces `ceil(T / stride)` rows; row `n` averages input rows
    /// `[n * stride, min(n * stride + size, T))`.
    pub fn avg_pool_1d(&self, size: usize, stride: usize) -> Result<Tensor> {
        let windows = pool_windows(&self.shape, size, stride)?;
        let width: usize = self.shape[1..].iter().product();
        let mut data = vec![0.0; windows.len() * width];
        for (n, &(start, end)) in windows.iter().enumerate() {
            let dst = &mut data[n * width..(n + 1) * width];
            for t in start..end {
                for (d, s) in dst.iter_mut().zip(&self.data[t * width..(t + 1) * width]) {
                    *d += s;
                }
            }
            let inv = 1.0 / (end - start) as f64;
            dst.iter_mut().for_each(|d| *d *= inv);
        }
        let mut shape = self.shape.clone();
        shape[0] = windows.len();
        Ok(Tensor { shape, data })
    }

    /// L2-normalizes every slice along the last axis. Slices whose norm is
    /// below [`NORM_GUARD`] are left unchanged.
    pub fn normalize_last(&self) -> Tensor {
        let width = self.shape.last().copied().unwrap_or(1);
        let mut data = self.data.clone();
        for chunk in data.chunks_mut(width) {
            let norm = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm >= NORM_GUARD {
                chunk.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Tensor {
            shape: self.shape.clone(),
            data,
        }
    }

    /// Stacks equal-shaped tensors along a new `axis`.
    pub fn stack(parts: &[Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("stack of zero tensors".into()))?;
        if axis > first.rank() {
            return Err(Error::invalid_shape("stack", &first.shape, format!("axis {axis} out of range")));
        }
        if let Some(bad) = parts.iter().find(|p| p.shape != first.shape) {
            return Err(Error::shape("stack", &first.shape, &bad.shape));
        }
        let mut shape = first.shape.clone();
        shape.insert(axis, parts.len());
        let split = AxisSplit::new(&shape, axis);
        let mut data = vec![0.0; split.outer * split.len * split.inner];
        for (i, part) in parts.iter().enumerate() {
            for o in 0..split.outer {
                let src = &part.data[o * split.inner..(o + 1) * split.inner];
                let at = split.index(o, i, 0);
                data[at..at + split.inner].copy_from_slice(src);
            }
        }
        Ok(Tensor { shape, data })
    }

    /// Takes index `index` along `axis`, removing the axis.
    pub fn select(&self, axis: usize, index: usize) -> Result<Tensor> {
        self.check_axis("select", axis)?;
        if index >= self.shape[axis] {
            return Err(Error::invalid_shape("select", &self.shape, format!("index {index} out of range")));
        }
        let split = AxisSplit::new(&self.shape, axis);
        let mut data = Vec::with_capacity(split.outer * split.inner);
        for o in 0..split.outer {
            let at = split.index(o, index, 0);
            data.extend_from_slice(&self.data[at..at + split.inner]);
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        Ok(Tensor { shape, data })
    }

    /// Index of the largest value; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.data)
    }
}

/// Lowest index among the maximal values.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn matmul_dims(lhs: &[usize], rhs: &[usize]) -> Result<(usize, usize, usize)> {
    if lhs.len() < 2 || rhs.len() != 2 {
        return Err(Error::shape("matmul", lhs, rhs));
    }
    let k = lhs[lhs.len() - 1];
    if k != rhs[0] {
        return Err(Error::shape("matmul", lhs, rhs));
    }
    let m = lhs[..lhs.len() - 1].iter().product();
    Ok((m, k, rhs[1]))
}

/// `a[m×k] · b[k×n]`.
pub(crate) fn gemm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += a_ip * bv;
            }
        }
    }
    c
}

/// `a[m×n] · b[k×n]ᵀ`, giving `m×k`.
pub(crate) fn gemm_nt(a: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * k];
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        for j in 0..k {
            let b_row = &b[j * n..(j + 1) * n];
            c[i * k + j] = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
        }
    }
    c
}

/// `a[m×k]ᵀ · b[m×n]`, giving `k×n`.
pub(crate) fn gemm_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; k * n];
    for i in 0..m {
        let b_row = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == 0.0 {
                continue;
            }
            let c_row = &mut c[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += a_ip * bv;
            }
        }
    }
    c
}

pub(crate) fn transpose_raw(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// Trailing-axis broadcast: extents must match or one of them must be 1.
pub fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let extent = |s: &[usize], i: usize| {
        let pad = rank - s.len();
        if i < pad { 1 } else { s[i - pad] }
    };
    (0..rank)
        .map(|i| match (extent(a, i), extent(b, i)) {
            (x, y) if x == y => Ok(x),
            (1, y) => Ok(y),
            (x, 1) => Ok(x),
            _ => Err(Error::shape(op, a, b)),
        })
        .collect()
}

/// For every flat index of `out_shape`, the flat index of the element of a
/// tensor shaped `in_shape` that broadcasts onto it.
pub(crate) fn broadcast_index_map(in_shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let rank = out_shape.len();
    let pad = rank - in_shape.len();
    let mut in_strides = vec![0usize; rank];
    let mut stride = 1;
    for i in (0..in_shape.len()).rev() {
        in_strides[i + pad] = if in_shape[i] == 1 { 0 } else { stride };
        stride *= in_shape[i];
    }
    let numel: usize = out_shape.iter().product();
    let mut map = Vec::with_capacity(numel);
    let mut counter = vec![0usize; rank];
    let mut offset = 0usize;
    for _ in 0..numel {
        map.push(offset);
        for axis in (0..rank).rev() {
            counter[axis] += 1;
            offset += in_strides[axis];
            if counter[axis] < out_shape[axis] {
                break;
            }
            offset -= in_strides[axis] * counter[axis];
            counter[axis] = 0;
        }
    }
    map
}

/// Half-open row windows `[start, end)` of an average pool along axis 0.
pub(crate) fn pool_windows(shape: &[usize], size: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    if size == 0 || stride == 0 {
        return Err(Error::InvalidArgument(format!(
            "pool size and stride must be >= 1 (got {size}, {stride})"
        )));
    }
    let rows = match shape.first() {
        Some(&t) if t > 0 => t,
        _ => return Err(Error::invalid_shape("avg_pool_1d", shape, "empty input")),
    };
    let count = rows.div_ceil(stride);
    Ok((0..count)
        .map(|n| {
            let start = n * stride;
            (start, (start + size).min(rows))
        })
        .collect())
}
