//! Sparse right-hand side and fixed-step RK4 for the master equation.
//!
//! The Hamiltonians here have a handful of nonzeros per row, so the products
//! `Hρ` and `LρL†` are done with a compressed-row left factor against the
//! dense density matrix. Nothing here is exported.

use crate::operator::{symmetrize_in_place, ComplexMatrix, C64, I, ZERO};

#[derive(Debug, Clone)]
pub(crate) struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    pub fn from_dense(m: &ComplexMatrix) -> Self {
        let n = m.rows();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    /// `out = A X` for a dense row-major `X`.
    fn mul(&self, x: &[C64], out: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let orow = &mut out[i * n..(i + 1) * n];
            orow.fill(ZERO);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.vals[p];
                let xrow = &x[self.cols[p] * n..(self.cols[p] + 1) * n];
                for (o, v) in orow.iter_mut().zip(xrow) {
                    *o += a * v;
                }
            }
        }
    }

    /// `out += s · A X†`, using `scratch` for `X†`.
    fn mul_adj_add(&self, x: &[C64], s: f64, scratch: &mut [C64], out: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                scratch[j * n + i] = x[i * n + j].conj();
            }
        }
        for i in 0..n {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.vals[p] * s;
                let zrow = &scratch[self.cols[p] * n..(self.cols[p] + 1) * n];
                for (o, v) in orow.iter_mut().zip(zrow) {
                    *o += a * v;
                }
            }
        }
    }
}

/// `K(u) = K₀ + Σ_c u_c K_c` on a shared sparsity pattern, where
/// `u = (Re Ω_q, Im Ω_q, Re Ω_r, Im Ω_r)`.
#[derive(Debug, Clone)]
pub(crate) struct AffineCsr {
    pattern: Csr,
    parts: [Vec<C64>; 5],
}

impl AffineCsr {
    pub fn new(parts: &[ComplexMatrix; 5]) -> Self {
        let n = parts[0].rows();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if parts.iter().any(|m| m[(i, j)] != ZERO) {
                    cols.push(j);
                }
            }
            row_ptr.push(cols.len());
        }
        let mut values: [Vec<C64>; 5] = Default::default();
        for (c, m) in parts.iter().enumerate() {
            values[c] = (0..n)
                .flat_map(|i| (row_ptr[i]..row_ptr[i + 1]).map(move |p| (i, p)))
                .map(|(i, p)| m[(i, cols[p])])
                .collect();
        }
        Self {
            pattern: Csr {
                n,
                row_ptr,
                cols,
                vals: vec![ZERO; values[0].len()],
            },
            parts: values,
        }
    }

    fn set(&mut self, u: [f64; 4]) {
        let [v0, v1, v2, v3, v4] = &self.parts;
        for (p, out) in self.pattern.vals.iter_mut().enumerate() {
            *out = v0[p] + v1[p] * u[0] + v2[p] * u[1] + v3[p] * u[2] + v4[p] * u[3];
        }
    }
}

/// `ρ̇ = −i(Kρ − ρK†) + Σ r L ρ L†` with `K = H − (i/2) Σ r L†L`.
pub(crate) struct Liouvillian {
    n: usize,
    k: AffineCsr,
    jumps: Vec<(f64, Csr)>,
    y: Vec<C64>,
    x: Vec<C64>,
}

impl Liouvillian {
    /// `h_parts` are the affine components of the Hermitian part; the
    /// dissipative anti-Hermitian term is folded into the constant part.
    pub fn new(h_parts: [ComplexMatrix; 5], jumps: Vec<(f64, ComplexMatrix)>) -> Self {
        let n = h_parts[0].rows();
        let mut parts = h_parts;
        for (rate, l) in &jumps {
            let ll = &l.adjoint() * l;
            parts[0] = &parts[0] - &ll.scale(I * (0.5 * rate));
        }
        Self {
            n,
            k: AffineCsr::new(&parts),
            jumps: jumps
                .into_iter()
                .filter(|(r, _)| *r > 0.0)
                .map(|(r, l)| (r, Csr::from_dense(&l)))
                .collect(),
            y: vec![ZERO; n * n],
            x: vec![ZERO; n * n],
        }
    }

    pub fn set_drives(&mut self, omega_q: C64, omega_r: C64) {
        self.k.set([omega_q.re, omega_q.im, omega_r.re, omega_r.im]);
    }

    pub fn apply(&mut self, rho: &[C64], out: &mut [C64]) {
        let n = self.n;
        self.k.pattern.mul(rho, &mut self.y);
        for i in 0..n {
            for j in 0..n {
                // −i y_ij + (−i y_ji)*
                let a = self.y[i * n + j];
                let b = self.y[j * n + i];
                out[i * n + j] = C64::new(a.im + b.im, b.re - a.re);
            }
        }
        for (rate, l) in &self.jumps {
            l.mul(rho, &mut self.x);
            l.mul_adj_add(&self.x, *rate, &mut self.y, out);
        }
    }
}

/// Classic fourth-order Runge–Kutta with preallocated stages.
pub(crate) struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
    n: usize,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![ZERO; n * n],
            k2: vec![ZERO; n * n],
            k3: vec![ZERO; n * n],
            k4: vec![ZERO; n * n],
            tmp: vec![ZERO; n * n],
            n,
        }
    }

    /// Advances `rho` by `h`. `drives(τ)` gives the envelopes at offset τ ∈ [0, h]
    /// from the start of the step. Returns the Hermiticity error before the
    /// state is re-symmetrized.
    pub fn step(
        &mut self,
        lv: &mut Liouvillian,
        rho: &mut [C64],
        h: f64,
        drives: impl Fn(f64) -> (C64, C64),
        constant: bool,
    ) -> f64 {
        let set = |lv: &mut Liouvillian, tau: f64| {
            if !constant {
                let (q, r) = drives(tau);
                lv.set_drives(q, r);
            }
        };
        set(lv, 0.0);
        lv.apply(rho, &mut self.k1);
        axpy(&mut self.tmp, rho, &self.k1, h / 2.0);
        set(lv, h / 2.0);
        lv.apply(&self.tmp, &mut self.k2);
        axpy(&mut self.tmp, rho, &self.k2, h / 2.0);
        lv.apply(&self.tmp, &mut self.k3);
        axpy(&mut self.tmp, rho, &self.k3, h);
        set(lv, h);
        lv.apply(&self.tmp, &mut self.k4);
        let w = h / 6.0;
        for i in 0..rho.len() {
            rho[i] += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * w;
        }
        let n = self.n;
        let mut err = 0.0f64;
        for i in 0..n {
            for j in i..n {
                err = err.max((rho[i * n + j] - rho[j * n + i].conj()).norm_sqr());
            }
        }
        symmetrize_in_place(rho, n);
        err.sqrt()
    }
}

fn axpy(out: &mut [C64], x: &[C64], k: &[C64], h: f64) {
    for ((o, a), b) in out.iter_mut().zip(x).zip(k) {
        *o = a + b * h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::annihilation;

    fn dense_rhs(
        h: &ComplexMatrix,
        l: &ComplexMatrix,
        rate: f64,
        rho: &ComplexMatrix,
    ) -> ComplexMatrix {
        let comm = &(h * rho) - &(rho * h);
        let ld = l.adjoint();
        let ll = &ld * l;
        let d = &(&(l * rho) * &ld) - &(&(&ll * rho) + &(rho * &ll)).scale(C64::new(0.5, 0.0));
        &comm.scale(-I) + &d.scale(C64::new(rate, 0.0))
    }

    #[test]
    fn sparse_rhs_matches_dense() {
        let n = 5;
        let a = annihilation(n).unwrap();
        let h0 = ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(i as f64 * 0.7, 0.0)
            } else {
                ZERO
            }
        });
        let drive = &a.adjoint() + &a;
        let parts = [
            h0.clone(),
            drive.clone(),
            ComplexMatrix::zeros(n, n),
            ComplexMatrix::zeros(n, n),
            ComplexMatrix::zeros(n, n),
        ];
        let mut lv = Liouvillian::new(parts, vec![(0.3, a.clone())]);
        lv.set_drives(C64::new(0.4, 0.0), ZERO);
        let h = &h0 + &drive.scale(C64::new(0.4, 0.0));

        let psi: Vec<C64> = (0..n)
            .map(|i| C64::new(1.0 / (1.0 + i as f64), 0.1 * i as f64))
            .collect();
        let norm: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
        let rho = ComplexMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / norm);
        let want = dense_rhs(&h, &a, 0.3, &rho);
        let mut got = vec![ZERO; n * n];
        lv.apply(rho.as_slice(), &mut got);
        let got = ComplexMatrix::from_vec(n, n, got).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-13);
    }
}
