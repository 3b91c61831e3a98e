use crate::error::{Error, Result};

/// Banded matrix with an in-place LU factorization (partial pivoting).
///
/// Storage follows the LAPACK band layout: column-major with `2 kl + ku + 1` rows, the
/// top `kl` rows reserved for pivoting fill-in.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    factored: bool,
}

impl BandedLu {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            ab: vec![0.0; ld * n],
            ipiv: vec![0; n],
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        self.kl + self.ku + row - col + col * self.ld
    }

    /// `A[row, col] += v`; the entry must lie inside the band.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        debug_assert!(!self.factored);
        debug_assert!(col <= row + self.ku && row <= col + self.kl, "({row}, {col}) outside band");
        let k = self.idx(row, col);
        self.ab[k] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if col > row + self.ku || row > col + self.kl {
            0.0
        } else {
            self.ab[self.idx(row, col)]
        }
    }

    /// `y = A x` before factorization.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert!(!self.factored);
        for (row, yr) in y.iter_mut().enumerate() {
            let lo = row.saturating_sub(self.kl);
            let hi = (row + self.ku).min(self.n - 1);
            *yr = (lo..=hi).map(|c| self.ab[self.idx(row, c)] * x[c]).sum();
        }
    }

    pub fn factor(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = self.ab[kv + j * self.ld].abs();
            for r in 1..=km {
                let v = self.ab[kv + r + j * self.ld].abs();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            self.ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::NonFinite("banded factorization pivot"));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[kv + j * self.ld];
            for r in 1..=km {
                self.ab[kv + r + j * self.ld] /= piv;
            }
            for c in j + 1..=ju {
                let t = self.ab[self.idx(j, c)];
                if t != 0.0 {
                    for r in 1..=km {
                        let l = self.ab[kv + r + j * self.ld];
                        let k = self.idx(j + r, c);
                        self.ab[k] -= l * t;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Overwrites `b` with `A^-1 b`. Requires [`BandedLu::factor`].
    pub fn solve(&self, b: &mut [f64]) {
        debug_assert!(self.factored);
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku;
        for j in 0..n {
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            let lm = kl.min(n - 1 - j);
            for r in 1..=lm {
                b[j + r] -= self.ab[kv + r + j * self.ld] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[kv + j * self.ld];
            let bj = b[j];
            for i in j.saturating_sub(kv)..j {
                b[i] -= self.ab[self.idx(i, j)] * bj;
            }
        }
    }
}
