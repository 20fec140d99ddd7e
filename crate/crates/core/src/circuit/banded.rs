use crate::scalar::Scalar;

/// Symmetric positive-definite matrix stored as its lower band.
#[derive(Debug, Clone)]
pub(crate) struct BandedSpd<T> {
    n: usize,
    bw: usize,
    // a[i * (bw + 1) + d] = A[i][i - d]
    a: Vec<T>,
}

impl<T: Scalar> BandedSpd<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd { n, bw, a: vec![T::zero(); n * (bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`).
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.a[k] += v;
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            T::zero()
        } else {
            self.a[self.idx(i, j)]
        }
    }

    /// In-place Cholesky; returns the first non-positive pivot on failure.
    pub fn factor(mut self) -> Result<Cholesky<T>, usize> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = self.a[self.idx(i, j)];
                let kl = lo.max(j.saturating_sub(bw));
                for k in kl..j {
                    s -= self.a[self.idx(i, k)] * self.a[self.idx(j, k)];
                }
                let ij = self.idx(i, j);
                if i == j {
                    if !(s > T::zero()) {
                        return Err(i);
                    }
                    self.a[ij] = s.sqrt();
                } else {
                    self.a[ij] = s / self.a[self.idx(j, j)];
                }
            }
        }
        Ok(Cholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Cholesky<T> {
    l: BandedSpd<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= l.a[l.idx(i, k)] * y[k];
            }
            y[i] = s / l.a[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= l.a[l.idx(k, i)] * y[k];
            }
            y[i] = s / l.a[l.idx(i, i)];
        }
        y
    }
}
