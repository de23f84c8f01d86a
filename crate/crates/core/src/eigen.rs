//! Eigenvalues of symmetric 3×3 matrices.
//!
//! The closed-form trigonometric solution is used on well-separated spectra.
//! When the scaled cubic discriminant is within `1e-13` of zero (a repeated
//! root, or an isotropic matrix) the kernel falls back to cyclic Jacobi.

use std::f64::consts::PI;

/// Symmetric matrix stored by its six independent entries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

const DEGENERATE_DISCRIMINANT: f64 = 1e-13;
const JACOBI_SWEEPS: usize = 10;

impl Sym3 {
    pub fn new(xx: f64, yy: f64, zz: f64, xy: f64, xz: f64, yz: f64) -> Self {
        Self { xx, yy, zz, xy, xz, yz }
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Self::new(a, b, c, 0.0, 0.0, 0.0)
    }

    pub fn to_array(&self) -> [[f64; 3]; 3] {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn det(&self) -> f64 {
        self.xx * (self.yy * self.zz - self.yz * self.yz)
            - self.xy * (self.xy * self.zz - self.yz * self.xz)
            + self.xz * (self.xy * self.yz - self.yy * self.xz)
    }

    /// Frobenius norm squared, `S:S`.
    pub fn frobenius_sq(&self) -> f64 {
        self.xx * self.xx
            + self.yy * self.yy
            + self.zz * self.zz
            + 2.0 * (self.xy * self.xy + self.xz * self.xz + self.yz * self.yz)
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        [
            self.xx * v[0] + self.xy * v[1] + self.xz * v[2],
            self.xy * v[0] + self.yy * v[1] + self.yz * v[2],
            self.xz * v[0] + self.yz * v[1] + self.zz * v[2],
        ]
    }

    /// Eigenvalues sorted ascending.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let off = self.xy * self.xy + self.xz * self.xz + self.yz * self.yz;
        if off == 0.0 {
            return sort3([self.xx, self.yy, self.zz]);
        }
        let mean = self.trace() / 3.0;
        let (a, b, c) = (self.xx - mean, self.yy - mean, self.zz - mean);
        let p2 = (a * a + b * b + c * c + 2.0 * off) / 6.0;
        let p = p2.sqrt();
        if p == 0.0 {
            return [mean; 3];
        }
        // B = (A - mean I) / p has eigenvalues 2cos(θ + 2πk/3), det B = 2cos 3θ.
        let shifted = Sym3::new(a / p, b / p, c / p, self.xy / p, self.xz / p, self.yz / p);
        let r = shifted.det() / 2.0;
        if 1.0 - r * r < DEGENERATE_DISCRIMINANT {
            return self.eigen_jacobi().0;
        }
        let phi = r.clamp(-1.0, 1.0).acos() / 3.0;
        let largest = mean + 2.0 * p * phi.cos();
        let smallest = mean + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
        let middle = 3.0 * mean - largest - smallest;
        sort3([smallest, middle, largest])
    }

    /// Cyclic Jacobi: sorted eigenvalues and matching unit eigenvectors
    /// (`vectors[k]` belongs to `values[k]`).
    pub fn eigen_jacobi(&self) -> ([f64; 3], [[f64; 3]; 3]) {
        let mut a = self.to_array();
        let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for _ in 0..JACOBI_SWEEPS {
            let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
            if off == 0.0 {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
        let values = [a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]];
        let mut vectors = [[0.0; 3]; 3];
        for (slot, &col) in order.iter().enumerate() {
            vectors[slot] = [v[0][col], v[1][col], v[2][col]];
        }
        (values, vectors)
    }
}

#[inline]
fn sort3(mut e: [f64; 3]) -> [f64; 3] {
    e.sort_by(f64::total_cmp);
    e
}
