//! Oracles shared by the integration tests. Everything here is built from
//! raw tensors with explicit loops, power iteration, characteristic
//! polynomials and product formulas; none of it calls the library's
//! eigensolver, contractor or transforms.

#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use serde_json::Value;
use wick_mps::{Complex64, ComplexMatrix};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn wick(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_wick-mps")).current_dir(dir).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

pub fn ok(dir: &Path, args: &[&str]) -> String {
    let r = wick(dir, args);
    assert_eq!(r.code, 0, "{args:?} failed: {}", r.stderr);
    r.stdout
}

pub fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn complex(v: &Value) -> Complex64 {
    c(v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

pub fn matrix(v: &Value) -> ComplexMatrix {
    let rows = v.as_array().unwrap();
    let cols = rows[0].as_array().unwrap().len();
    ComplexMatrix::from_fn(rows.len(), cols, |i, j| complex(&rows[i][j]))
}

/// `a ⊗ b` with row index `i·rows(b) + k`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    ComplexMatrix::from_fn(ra * rb, ca * cb, |r, s| a[(r / rb, s / cb)] * b[(r % rb, s % cb)])
}

/// Transfer matrix `Σ_st O_st Ā^s ⊗ A^t`.
pub fn transfer(tensors: &[ComplexMatrix], op: &ComplexMatrix) -> ComplexMatrix {
    let d = tensors[0].nrows();
    let mut e = ComplexMatrix::zeros(d * d, d * d);
    for (s, a) in tensors.iter().enumerate() {
        for (t, b) in tensors.iter().enumerate() {
            let w = op[(s, t)];
            if w != c(0.0, 0.0) {
                e += kron(&a.conjugate(), b) * w;
            }
        }
    }
    e
}

/// Lattice correlators `⟨l| O_N E^{g_{N−1}} ⋯ E^{g_1} O_1 |r⟩` with the
/// fixed points found by power iteration.
pub struct LatticeOracle {
    pub e: ComplexMatrix,
    pub left: ComplexMatrix,
    pub right: ComplexMatrix,
    pub tensors: Vec<ComplexMatrix>,
}

impl LatticeOracle {
    pub fn new(tensors: &[ComplexMatrix]) -> Self {
        let q = tensors.len();
        let e = transfer(tensors, &ComplexMatrix::identity(q, q));
        let n = e.nrows();
        let mut right = ComplexMatrix::from_element(n, 1, c(1.0, 0.3));
        let mut left = right.adjoint();
        for _ in 0..4000 {
            right = &e * &right;
            right /= Complex64::from(right.norm());
            left = &left * &e;
            left /= Complex64::from(left.norm());
        }
        let norm = (&left * &right)[(0, 0)];
        let lambda = (&left * &e * &right)[(0, 0)] / norm;
        Self { e: e / lambda, left: left / norm, right, tensors: tensors.to_vec() }
    }

    pub fn from_state(path: &Path) -> Self {
        let v = json(path);
        let tensors: Vec<ComplexMatrix> = v["tensors"].as_array().unwrap().iter().map(matrix).collect();
        Self::new(&tensors)
    }

    pub fn op(&self, physical: &ComplexMatrix) -> ComplexMatrix {
        transfer(&self.tensors, physical)
    }

    /// Correlator for operators already lifted to transfer space.
    pub fn value_lifted(&self, ops: &[&ComplexMatrix], gaps: &[usize]) -> Complex64 {
        let mut v = ops[0] * &self.right;
        for (op, &g) in ops[1..].iter().zip(gaps) {
            for _ in 0..g {
                v = &self.e * v;
            }
            v = *op * v;
        }
        (&self.left * v)[(0, 0)]
    }

    pub fn value(&self, ops: &[&ComplexMatrix], gaps: &[usize]) -> Complex64 {
        let lifted: Vec<ComplexMatrix> = ops.iter().map(|o| self.op(o)).collect();
        self.value_lifted(&lifted.iter().collect::<Vec<_>>(), gaps)
    }

    /// Stationary projector `|r⟩⟨l|`.
    pub fn stationary(&self) -> ComplexMatrix {
        &self.right * &self.left
    }
}

/// Eigenvalues from Faddeev–LeVerrier characteristic coefficients and
/// Durand–Kerner root polishing.
pub fn characteristic_roots(a: &ComplexMatrix) -> Vec<Complex64> {
    let n = a.nrows();
    let mut coeffs = vec![c(1.0, 0.0)];
    let mut m = ComplexMatrix::zeros(n, n);
    for k in 1..=n {
        m = a * &m + ComplexMatrix::identity(n, n) * coeffs[k - 1];
        coeffs.push(-(a * &m).trace() / k as f64);
    }
    let poly = |z: Complex64| coeffs.iter().fold(c(0.0, 0.0), |acc, &co| acc * z + co);
    let radius = 1.0 + a.iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64;
    let mut roots: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(0.5 * radius, 0.4 + k as f64)).collect();
    for _ in 0..5000 {
        for i in 0..n {
            let denom = (0..n).filter(|&j| j != i).fold(c(1.0, 0.0), |acc, j| acc * (roots[i] - roots[j]));
            let z = roots[i];
            roots[i] = z - poly(z) / denom;
        }
    }
    roots
}

/// Greedy nearest matching; returns the largest matched distance.
pub fn match_distance(found: &[Complex64], expected: &[Complex64]) -> f64 {
    if found.len() != expected.len() {
        return f64::INFINITY;
    }
    let mut pool = expected.to_vec();
    let mut worst: f64 = 0.0;
    for z in found {
        let (i, dist) = pool
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (w - z).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        worst = worst.max(dist);
        pool.remove(i);
    }
    worst
}

/// `(1 + A/m)^m` by `log₂ m` squarings.
fn product_formula(a: &ComplexMatrix, squarings: u32) -> ComplexMatrix {
    let m = (1u64 << squarings) as f64;
    let n = a.nrows();
    let mut p = ComplexMatrix::identity(n, n) + a / Complex64::from(m);
    for _ in 0..squarings {
        p = &p * &p;
    }
    p
}

/// `e^{A}` from the product formula, Richardson-combined over `m` and
/// `m/2` to cancel the leading `O(1/m)` error.
pub fn exp_product(a: &ComplexMatrix) -> ComplexMatrix {
    const SQUARINGS: u32 = 22;
    product_formula(a, SQUARINGS) * c(2.0, 0.0) - product_formula(a, SQUARINGS - 1)
}

/// `e^{A}` by Taylor series on `A / 2^s` followed by `s` squarings.
pub fn exp_taylor(a: &ComplexMatrix) -> ComplexMatrix {
    let norm = a.iter().map(|z| z.norm()).sum::<f64>();
    let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let scaled = a / Complex64::from(2f64.powi(s));
    let n = a.nrows();
    let mut term = ComplexMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &scaled / Complex64::from(k as f64);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Stationary projector of a generator by repeated squaring of `e^{T·10}`
/// with trace renormalization.
pub fn stationary_projector(t: &ComplexMatrix) -> ComplexMatrix {
    let mut p = exp_taylor(&(t * c(10.0, 0.0)));
    for _ in 0..30 {
        p = &p * &p;
        let tr = p.trace();
        p /= tr;
    }
    p
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
