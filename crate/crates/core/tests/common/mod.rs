//! Independent reference computations used by the integration tests. None of
//! these call into the library's numeric kernels.

#![allow(dead_code)]

use ssfad::synth::{GaussianStream, Prng};

/// Deterministic test data source.
pub struct Rng {
    prng: Prng,
    gauss: GaussianStream,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            prng: Prng::new(seed ^ 0x5EED),
            gauss: GaussianStream::new(Prng::new(seed.wrapping_mul(31).wrapping_add(7))),
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.prng.next_f64()
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.prng.next_u64() % n as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        self.gauss.next_gaussian()
    }

    pub fn vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}

/// Gauss-Jordan inverse with partial pivoting, row-major `n x n`.
pub fn invert(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x * n + col].abs().total_cmp(&m[y * n + col].abs()))
            .unwrap();
        for k in 0..n {
            m.swap(col * n + k, pivot * n + k);
            inv.swap(col * n + k, pivot * n + k);
        }
        let p = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for row in 0..n {
            if row != col {
                let f = m[row * n + col];
                for k in 0..n {
                    m[row * n + k] -= f * m[col * n + k];
                    inv[row * n + k] -= f * inv[col * n + k];
                }
            }
        }
    }
    inv
}

/// `v^T A^-1 v` through an explicit inverse.
pub fn quad_form_explicit(a: &[f64], n: usize, v: &[f64]) -> f64 {
    let inv = invert(a, n);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += v[i] * inv[i * n + j] * v[j];
        }
    }
    total
}

/// Cyclic Jacobi eigenvalues of a symmetric row-major matrix.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

/// Largest singular value of a row-major `rows x cols` matrix via Jacobi on
/// `R^T R`.
pub fn jacobi_spectral_norm(r: &[f64], rows: usize, cols: usize) -> f64 {
    let mut rtr = vec![0.0; cols * cols];
    for i in 0..cols {
        for j in 0..cols {
            rtr[i * cols + j] = (0..rows).map(|k| r[k * cols + i] * r[k * cols + j]).sum();
        }
    }
    jacobi_eigenvalues(&rtr, cols)
        .into_iter()
        .fold(0.0f64, f64::max)
        .max(0.0)
        .sqrt()
}

/// Mann-Whitney estimate of P(anomaly > background) with ties counted 1/2.
pub fn mann_whitney(scores: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(s, _)| *s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !l)
        .map(|(s, _)| *s)
        .collect();
    let mut total = 0.0;
    for p in &pos {
        for n in &neg {
            total += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    total / (pos.len() * neg.len()) as f64
}

/// ROC points by counting, for every candidate threshold, the pixels at or
/// above it. Thresholds: `+inf` then each distinct score descending.
pub fn brute_force_roc(scores: &[f64], labels: &[bool]) -> Vec<(f64, f64)> {
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut out = vec![(0.0, 0.0)];
    for t in thresholds {
        let tp = scores
            .iter()
            .zip(labels)
            .filter(|(s, &l)| l && **s >= t)
            .count() as f64;
        let fp = scores
            .iter()
            .zip(labels)
            .filter(|(s, &l)| !l && **s >= t)
            .count() as f64;
        out.push((fp / n_neg, tp / n_pos));
    }
    out
}

/// Random score/label set with both classes present and some ties.
pub fn random_scored_set(rng: &mut Rng, n: usize) -> (Vec<f64>, Vec<bool>) {
    loop {
        let labels: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.2).collect();
        let scores: Vec<f64> = labels
            .iter()
            .map(|&l| {
                let base = if l { 0.6 } else { 0.0 } + rng.normal();
                // quantize a share of scores to force ties
                if rng.uniform() < 0.3 {
                    (base * 4.0).round() / 4.0
                } else {
                    base
                }
            })
            .collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return (scores, labels);
        }
    }
}

/// Linear-interpolation quantile on an already sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
