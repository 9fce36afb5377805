//! Small dense complex matrices and a Hermitian eigensolver.
//!
//! Everything here targets the block sizes that show up in the sector
//! decomposition (dimension ≤ 26 for twelve peripheral spins), so the
//! implementations favour determinism and simplicity over asymptotics.

use num_complex::Complex64 as C64;

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        debug_assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMat {
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn add(&self, rhs: &CMat) -> CMat {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self.clone();
        for (o, r) in out.data.iter_mut().zip(rhs.data.iter()) {
            *o += r;
        }
        out
    }

    pub fn scale(&self, s: C64) -> CMat {
        let mut out = self.clone();
        for o in out.data.iter_mut() {
            *o *= s;
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// ρ → U ρ U†.
    pub fn conjugate_by(&self, u: &CMat) -> CMat {
        u.mul(self).mul(&u.adjoint())
    }

    pub fn max_abs_diff(&self, rhs: &CMat) -> f64 {
        self.data
            .iter()
            .zip(rhs.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Solve A·x = b by Gaussian elimination with partial pivoting.
pub fn solve_linear(a: &CMat, b: &[C64]) -> Vec<C64> {
    let n = a.dim;
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (pivot_row, pivot_norm) = (col..n)
            .map(|r| (r, m[(r, col)].norm()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        assert!(pivot_norm > 1e-300, "singular system");
        if pivot_row != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot_row, j)];
                m[(pivot_row, j)] = tmp;
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m[(col, col)];
        for row in (col + 1)..n {
            let factor = m[(row, col)] / pivot;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for j in col..n {
                let v = m[(col, j)];
                m[(row, j)] -= factor * v;
            }
            let bv = rhs[col];
            rhs[row] -= factor * bv;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for col in (0..n).rev() {
        let mut sum = rhs[col];
        for k in (col + 1)..n {
            sum -= m[(col, k)] * x[k];
        }
        x[col] = sum / m[(col, col)];
    }
    x
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.
///
/// Returns (eigenvalues, V) with A = V diag(λ) V†. Deterministic for a given
/// input; accurate to ~1e-14 relative for the well-conditioned Hamiltonians
/// this crate produces.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.dim;
    let mut m = a.clone();
    let mut v = CMat::identity(n);
    let scale = m.frobenius_norm().max(1e-300);

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.norm() <= 1e-18 * scale {
                    continue;
                }
                // 2x2 Hermitian rotation annihilating (p,q).
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let abs = apq.norm();
                let phase = apq / abs;
                let tau = (aqq - app) / (2.0 * abs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G: columns p,q mix; G[p][p]=c, G[p][q]=s*phase, G[q][p]=-s*conj(phase), G[q][q]=c
                // Update M <- G† M G and V <- V G.
                let gs = C64::new(s, 0.0) * phase;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * c - mkq * gs.conj();
                    m[(k, q)] = mkp * gs + mkq * c;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = mpk * c - mqk * gs;
                    m[(q, k)] = mpk * gs.conj() + mqk * c;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * gs.conj();
                    v[(k, q)] = vkp * gs + vkq * c;
                }
            }
        }
    }

    let eig = (0..n).map(|i| m[(i, i)].re).collect();
    (eig, v)
}

/// exp(i s H) for Hermitian H, via eigendecomposition.
pub fn exp_i_hermitian(h: &CMat, s: f64) -> CMat {
    let (eig, v) = eigh(h);
    let phases: Vec<C64> = eig.iter().map(|&l| C64::from_polar(1.0, s * l)).collect();
    let d = CMat::from_diag(&phases);
    v.mul(&d).mul(&v.adjoint())
}
