//! Small dense square matrices and the matrix exponential.
//!
//! The generators in this crate are at most 6×6, so everything is stored
//! inline as `[[T; N]; N]` and the routines favour clarity over blocking.
//!
//! [`Matrix::exp`] is scaling-and-squaring with a degree-13 diagonal Padé
//! approximant (Higham 2005). The scaling threshold is the double precision
//! one, which keeps the truncation error below `2^-53` relative for any
//! scalar type this crate supports.

use std::ops::{Index, IndexMut, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: Deserialize<'de> + Copy + Default"
))]
pub struct Matrix<T, const N: usize> {
    #[serde(with = "rows")]
    data: [[T; N]; N],
}

impl<T: Real, const N: usize> Matrix<T, N> {
    pub fn zeros() -> Self {
        Self {
            data: [[T::zero(); N]; N],
        }
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.data[i][i] = T::one();
        }
        m
    }

    pub fn from_rows(data: [[T; N]; N]) -> Self {
        Self { data }
    }

    pub fn rows(&self) -> &[[T; N]; N] {
        &self.data
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        out.data
            .iter_mut()
            .flat_map(|r| r.iter_mut())
            .for_each(|x| *x *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..N {
            for j in 0..N {
                out.data[i][j] += other.data[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..N {
            for j in 0..N {
                out.data[i][j] -= other.data[i][j];
            }
        }
        out
    }

    /// Adds `s` to every diagonal entry.
    fn add_diag(&self, s: T) -> Self {
        let mut out = *self;
        for i in 0..N {
            out.data[i][i] += s;
        }
        out
    }

    pub fn mul_vec(&self, v: &[T; N]) -> [T; N] {
        let mut out = [T::zero(); N];
        for (o, row) in out.iter_mut().zip(self.data.iter()) {
            *o = row.iter().zip(v.iter()).map(|(&a, &b)| a * b).sum();
        }
        out
    }

    pub fn column(&self, j: usize) -> [T; N] {
        let mut out = [T::zero(); N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.data[i][j];
        }
        out
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> T {
        (0..N)
            .map(|j| (0..N).map(|i| self.data[i][j].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().flatten().all(|x| x.is_finite())
    }

    /// Solves `self · X = rhs` by LU decomposition with partial pivoting.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        let mut a = self.data;
        let mut b = rhs.data;
        for k in 0..N {
            let pivot = (k..N)
                .max_by(|&i, &j| {
                    a[i][k]
                        .abs()
                        .partial_cmp(&a[j][k].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(k);
            if a[pivot][k] == T::zero() || !a[pivot][k].is_finite() {
                return Err(Error::Numerical("singular matrix in LU solve".into()));
            }
            a.swap(k, pivot);
            b.swap(k, pivot);
            for i in (k + 1)..N {
                let f = a[i][k] / a[k][k];
                if f == T::zero() {
                    continue;
                }
                for j in k..N {
                    let akj = a[k][j];
                    a[i][j] -= f * akj;
                }
                for j in 0..N {
                    let bkj = b[k][j];
                    b[i][j] -= f * bkj;
                }
            }
        }
        for k in (0..N).rev() {
            for j in 0..N {
                let mut acc = b[k][j];
                for i in (k + 1)..N {
                    acc -= a[k][i] * b[i][j];
                }
                b[k][j] = acc / a[k][k];
            }
        }
        Ok(Self { data: b })
    }

    /// Matrix exponential `e^self`.
    pub fn exp(&self) -> Result<Self> {
        if !self.is_finite() {
            return Err(Error::Numerical("non-finite entry in exponent".into()));
        }
        const THETA_13: f64 = 5.371_920_351_148_152;
        let norm = self.norm_1().as_f64();
        let squarings = if norm > THETA_13 {
            (norm / THETA_13).log2().ceil() as i32
        } else {
            0
        };
        let a = self.scale(T::of(0.5f64.powi(squarings)));

        let b: [T; 14] = PADE_13.map(T::of);
        let a2 = a * a;
        let a4 = a2 * a2;
        let a6 = a4 * a2;

        let u_inner = a6.scale(b[13]).add(&a4.scale(b[11])).add(&a2.scale(b[9]));
        let u_inner = (a6 * u_inner)
            .add(&a6.scale(b[7]))
            .add(&a4.scale(b[5]))
            .add(&a2.scale(b[3]))
            .add_diag(b[1]);
        let u = a * u_inner;

        let v_inner = a6.scale(b[12]).add(&a4.scale(b[10])).add(&a2.scale(b[8]));
        let v = (a6 * v_inner)
            .add(&a6.scale(b[6]))
            .add(&a4.scale(b[4]))
            .add(&a2.scale(b[2]))
            .add_diag(b[0]);

        let mut r = v.sub(&u).solve(&v.add(&u))?;
        for _ in 0..squarings {
            r = r * r;
        }
        if !r.is_finite() {
            return Err(Error::Numerical("matrix exponential overflowed".into()));
        }
        Ok(r)
    }
}

const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

impl<T: Real, const N: usize> Mul for Matrix<T, N> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let aik = self.data[i][k];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..N {
                    out.data[i][j] += aik * rhs.data[k][j];
                }
            }
        }
        out
    }
}

impl<T, const N: usize> Index<(usize, usize)> for Matrix<T, N> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i][j]
    }
}

impl<T, const N: usize> IndexMut<(usize, usize)> for Matrix<T, N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i][j]
    }
}

/// Serde does not cover `[[T; N]; N]` for generic `N`; go through nested `Vec`s.
mod rows {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S, T, const N: usize>(data: &[[T; N]; N], s: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
        T: Serialize,
    {
        let rows: Vec<&[T]> = data.iter().map(|r| r.as_slice()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D, T, const N: usize>(d: D) -> Result<[[T; N]; N], D::Error>
    where
        D: Deserializer<'de>,
        T: Deserialize<'de> + Copy + Default,
    {
        let rows: Vec<Vec<T>> = Vec::deserialize(d)?;
        if rows.len() != N || rows.iter().any(|r| r.len() != N) {
            return Err(D::Error::custom(format!("expected a {N}x{N} matrix")));
        }
        let mut out = [[T::default(); N]; N];
        for (o, r) in out.iter_mut().zip(rows) {
            o.copy_from_slice(&r);
        }
        Ok(out)
    }
}
