//! Dense order-d tensors and the multilinear kernels used by the solvers.
//!
//! Storage is row-major: the last index varies fastest. Every reduction walks
//! the entries in a fixed sequential order, so identical inputs always give
//! bit-identical outputs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Wraps a flat row-major buffer. Requires order ≥ 2, positive dims, and
    /// `data.len() == ∏ dims`.
    pub fn from_vec(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_dims(&dims)?;
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::structural(format!(
                "data length {} does not match dims {:?} (expected {})",
                data.len(),
                dims,
                expected
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn filled(dims: Vec<usize>, value: f64) -> Result<Self> {
        validate_dims(&dims)?;
        let len = dims.iter().product();
        Ok(Self {
            dims,
            data: vec![value; len],
        })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        Self::filled(dims, 0.0)
    }

    pub fn ones(dims: Vec<usize>) -> Result<Self> {
        Self::filled(dims, 1.0)
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        validate_dims(&dims)?;
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment(&mut idx, &dims);
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of a multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn check_same_dims(&self, other: &Self, op: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::structural(format!(
                "{op}: dims {:?} and {:?} differ",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// Sum of entrywise products.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_dims(other, "inner")?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn frob_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Entrywise `f(self, other)`.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_dims(other, "zip_with")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            dims: self.dims.clone(),
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|a| a * factor)
    }

    /// ‖self − other‖_F without allocating the difference.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_same_dims(other, "distance")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    fn check_vector(&self, mode: usize, v: &[f64]) -> Result<()> {
        if v.len() != self.dims[mode] {
            return Err(Error::structural(format!(
                "vector of length {} cannot contract mode {} of size {}",
                v.len(),
                mode,
                self.dims[mode]
            )));
        }
        Ok(())
    }

    /// Contracts every mode except `mode` against the given vectors.
    ///
    /// `others` holds one vector per remaining mode, in increasing mode order.
    /// Entry `s` of the result is `Σ X[.., s, ..] ∏_{l≠mode} v_l[i_l]`, i.e. the
    /// gradient of `⟨X, ⊗_l v_l⟩` with respect to the mode-`mode` vector.
    pub fn contract_all_but(&self, mode: usize, others: &[&[f64]]) -> Result<Vec<f64>> {
        let d = self.order();
        if mode >= d {
            return Err(Error::structural(format!(
                "mode {mode} out of range for order {d}"
            )));
        }
        if others.len() != d - 1 {
            return Err(Error::structural(format!(
                "expected {} vectors, got {}",
                d - 1,
                others.len()
            )));
        }
        for (k, v) in others.iter().enumerate() {
            let l = if k < mode { k } else { k + 1 };
            self.check_vector(l, v)?;
        }
        Ok(self.contract_unchecked(mode, |l| others[if l < mode { l } else { l - 1 }]))
    }

    /// Same as [`contract_all_but`](Self::contract_all_but) but takes a full
    /// length-d list and ignores the entry at `mode`. Lengths are not checked.
    pub(crate) fn contract_unchecked<'a>(
        &self,
        mode: usize,
        vec_for: impl Fn(usize) -> &'a [f64],
    ) -> Vec<f64> {
        let d = self.order();
        let mut dims = self.dims.clone();
        let mut buf: Option<Vec<f64>> = None;
        // Contract from the last mode down so earlier mode positions stay put.
        for l in (0..d).rev() {
            if l == mode {
                continue;
            }
            let src = buf.as_deref().unwrap_or(&self.data);
            let out = contract_mode(src, &dims, l, vec_for(l));
            dims.remove(l);
            buf = Some(out);
        }
        buf.unwrap_or_else(|| self.data.clone())
    }

    /// `⟨X, ⊗_l v_l⟩` for one vector per mode.
    pub fn contract_all(&self, vecs: &[&[f64]]) -> Result<f64> {
        if vecs.len() != self.order() {
            return Err(Error::structural(format!(
                "expected {} vectors, got {}",
                self.order(),
                vecs.len()
            )));
        }
        for (l, v) in vecs.iter().enumerate() {
            self.check_vector(l, v)?;
        }
        let g = self.contract_unchecked(0, |l| vecs[l]);
        Ok(dot(&g, vecs[0]))
    }

    /// Mode-`mode` unfolding: an `n_mode × ∏_{l≠mode} n_l` matrix whose column
    /// index enumerates the remaining modes in row-major order.
    pub fn matricize(&self, mode: usize) -> Result<DMatrix<f64>> {
        let d = self.order();
        if mode >= d {
            return Err(Error::structural(format!(
                "mode {mode} out of range for order {d}"
            )));
        }
        let rows = self.dims[mode];
        let prefix: usize = self.dims[..mode].iter().product();
        let suffix: usize = self.dims[mode + 1..].iter().product();
        let cols = prefix * suffix;
        let mut m = DMatrix::zeros(rows, cols);
        for p in 0..prefix {
            for i in 0..rows {
                let base = (p * rows + i) * suffix;
                for s in 0..suffix {
                    m[(i, p * suffix + s)] = self.data[base + s];
                }
            }
        }
        Ok(m)
    }
}

/// Column-wise Kronecker product. Column `c` of the result is
/// `a_c ⊗ b_c ⊗ …`, with the first matrix's index varying slowest; this matches
/// the column order of [`DenseTensor::matricize`] when the factors are given
/// in increasing mode order.
pub fn khatri_rao(mats: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let first = mats
        .first()
        .ok_or_else(|| Error::structural("khatri_rao needs at least one matrix"))?;
    let r = first.ncols();
    if let Some(bad) = mats.iter().find(|m| m.ncols() != r) {
        return Err(Error::structural(format!(
            "khatri_rao: ragged column counts ({} vs {})",
            bad.ncols(),
            r
        )));
    }
    let rows: usize = mats.iter().map(|m| m.nrows()).product();
    let mut out = DMatrix::zeros(rows, r);
    for c in 0..r {
        let col = kron_columns(mats.iter().map(|m| m.column(c).iter().copied().collect()));
        out.column_mut(c).copy_from_slice(&col);
    }
    Ok(out)
}

/// Kronecker product of a sequence of vectors, first vector slowest.
pub(crate) fn kron_columns(vecs: impl IntoIterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut acc = vec![1.0];
    for v in vecs {
        let mut next = Vec::with_capacity(acc.len() * v.len());
        for &a in &acc {
            next.extend(v.iter().map(|&b| a * b));
        }
        acc = next;
    }
    acc
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::structural(format!(
            "tensor order must be at least 2, got {}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::structural(format!(
            "every dimension must be positive, got {dims:?}"
        )));
    }
    Ok(())
}

fn increment(idx: &mut [usize], dims: &[usize]) {
    for k in (0..dims.len()).rev() {
        idx[k] += 1;
        if idx[k] < dims[k] {
            return;
        }
        idx[k] = 0;
    }
}

/// Contracts mode `l` of a row-major buffer with shape `dims` against `v`.
fn contract_mode(src: &[f64], dims: &[usize], l: usize, v: &[f64]) -> Vec<f64> {
    let n = dims[l];
    let prefix: usize = dims[..l].iter().product();
    let suffix: usize = dims[l + 1..].iter().product();
    let mut out = vec![0.0; prefix * suffix];
    if suffix == 1 {
        for (p, o) in out.iter_mut().enumerate() {
            *o = dot(&src[p * n..(p + 1) * n], v);
        }
        return out;
    }
    for p in 0..prefix {
        let dst = &mut out[p * suffix..(p + 1) * suffix];
        for (i, &vi) in v.iter().enumerate() {
            let row = &src[(p * n + i) * suffix..(p * n + i + 1) * suffix];
            for (o, &x) in dst.iter_mut().zip(row) {
                *o += vi * x;
            }
        }
    }
    out
}
