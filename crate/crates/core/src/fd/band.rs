use crate::error::{Error, Result};

/// Square band matrix with equal lower and upper bandwidth `w`, factored in
/// place by LU without pivoting (adequate for the M-matrices the monotone
/// scheme produces).
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    w: usize,
    /// Row `i`, column `j` lives at `i·(2w + 1) + (j + w - i)`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, w: usize) -> Self {
        BandMatrix {
            n,
            w,
            data: vec![0.0; n * (2 * w + 1)],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.w);
        i * (2 * self.w + 1) + (j + self.w - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.w {
            0.0
        } else {
            self.data[self.at(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.data[k] += v;
    }

    pub fn clear(&mut self) {
        self.data.fill(0.0);
    }

    /// Factors in place and solves `A x = rhs`, overwriting `rhs` with `x`.
    pub fn solve_in_place(&mut self, rhs: &mut [f64]) -> Result<()> {
        let (n, w) = (self.n, self.w);
        let stride = 2 * w + 1;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * 1e-300_f64.max(f64::EPSILON * f64::EPSILON);
        for k in 0..n {
            let pivot = self.data[k * stride + w];
            if !(pivot.abs() > tiny) || !pivot.is_finite() {
                return Err(Error::SingularLinearSystem { row: k, pivot });
            }
            let jmax = (k + w).min(n - 1);
            for i in (k + 1)..=jmax {
                let ik = i * stride + (k + w - i);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                for j in (k + 1)..=jmax {
                    let kj = k * stride + (j + w - k);
                    let ij = i * stride + (j + w - i);
                    self.data[ij] -= l * self.data[kj];
                }
                rhs[i] -= l * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + w).min(n - 1);
            let mut acc = rhs[k];
            for j in (k + 1)..=jmax {
                acc -= self.data[k * stride + (j + w - k)] * rhs[j];
            }
            rhs[k] = acc / self.data[k * stride + w];
        }
        Ok(())
    }
}
