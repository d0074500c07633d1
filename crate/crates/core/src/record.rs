//! Row-major sample arrays and little-endian binary helpers.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// `rows × cols` samples stored row-major; one row per time step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    cols: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn with_capacity(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            data: Vec::with_capacity(rows * cols),
        }
    }

    pub fn from_vec(cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 && !data.is_empty() || cols > 0 && data.len() % cols != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not fill rows of width {cols}",
                data.len()
            )));
        }
        Ok(Self { cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut out = Self::with_capacity(rows.len(), cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension("ragged rows".into()));
            }
            out.push_row(r);
        }
        Ok(out)
    }

    pub fn rows(&self) -> usize {
        if self.cols == 0 {
            0
        } else {
            self.data.len() / self.cols
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows()).map(|k| self.data[k * self.cols + j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows `start..` as a new array.
    pub fn tail(&self, start: usize) -> Samples {
        let start = start.min(self.rows());
        Samples {
            cols: self.cols,
            data: self.data[start * self.cols..].to_vec(),
        }
    }

    /// Per-column means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for k in 0..self.rows() {
            for (acc, v) in m.iter_mut().zip(self.row(k)) {
                *acc += v;
            }
        }
        let n = self.rows().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Sample covariance (divisor `N − 1`), row-major `cols × cols`.
    pub fn covariance(&self) -> Vec<f64> {
        let c = self.cols;
        let mean = self.mean();
        let mut acc = vec![0.0; c * c];
        let mut d = vec![0.0; c];
        for k in 0..self.rows() {
            for ((dj, v), m) in d.iter_mut().zip(self.row(k)).zip(&mean) {
                *dj = v - m;
            }
            for i in 0..c {
                for j in i..c {
                    acc[i * c + j] += d[i] * d[j];
                }
            }
        }
        let denom = (self.rows().max(2) - 1) as f64;
        for i in 0..c {
            for j in i..c {
                let v = acc[i * c + j] / denom;
                acc[i * c + j] = v;
                acc[j * c + i] = v;
            }
        }
        acc
    }
}

pub(crate) fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f64s(w: &mut impl Write, v: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(v.len() * 8);
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(b)
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub(crate) fn read_f64s(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated data block: {e}")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_of_known_rows() {
        let s = Samples::from_rows(&[vec![1.0, 2.0], vec![3.0, 6.0], vec![5.0, 10.0]]).unwrap();
        assert_eq!(s.mean(), vec![3.0, 6.0]);
        assert_eq!(s.covariance(), vec![4.0, 8.0, 8.0, 16.0]);
        assert_eq!(s.tail(2).rows(), 1);
        assert_eq!(s.column(1), vec![2.0, 6.0, 10.0]);
    }

    #[test]
    fn ragged_input_rejected() {
        assert!(Samples::from_vec(3, vec![1.0; 4]).is_err());
        assert!(Samples::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
