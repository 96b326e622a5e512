//! Two-dimensional principal-component projection of embedding tables.

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};

const MAX_ITERS: usize = 10_000;
const TOL: f64 = 1e-13;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn remove_component(v: &mut [f64], u: &[f64]) {
    let p = dot(v, u);
    v.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
}

fn mat_vec(c: &[f64], d: usize, v: &[f64]) -> Vec<f64> {
    (0..d).map(|i| dot(&c[i * d..(i + 1) * d], v)).collect()
}

/// Leading eigenvector of the symmetric positive semidefinite `c`, kept
/// orthogonal to `avoid`. Falls back to a unit vector orthogonal to `avoid`
/// when the remaining spectrum is zero.
fn power_iteration(c: &[f64], d: usize, start: &[f64], avoid: &[&[f64]]) -> Vec<f64> {
    let mut v = start.to_vec();
    for u in avoid {
        remove_component(&mut v, u);
    }
    if normalize(&mut v) == 0.0 {
        v = fallback(d, avoid);
    }
    for _ in 0..MAX_ITERS {
        let mut next = mat_vec(c, d, &v);
        for u in avoid {
            remove_component(&mut next, u);
        }
        if normalize(&mut next) < 1e-300 {
            return v;
        }
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if diff < TOL {
            break;
        }
    }
    v
}

fn fallback(d: usize, avoid: &[&[f64]]) -> Vec<f64> {
    for axis in 0..d {
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        for u in avoid {
            remove_component(&mut v, u);
        }
        if normalize(&mut v) > 1e-6 {
            return v;
        }
    }
    vec![0.0; d]
}

/// Mean-centered projection onto the top two principal components, computed
/// by power iteration with deflation. Needs at least three points.
pub fn pca2d(rows: &[&[f64]]) -> Result<Vec<[f64; 2]>> {
    if rows.len() < 3 {
        return Err(Error::Invalid(format!(
            "PCA needs at least 3 points, got {}",
            rows.len()
        )));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Invalid("PCA rows must share a positive dimension".into()));
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(r.iter()).for_each(|(m, x)| *m += x / n);
    }
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = vec![0.0; d * d];
    for r in &centered {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += r[i] * r[j] / n;
            }
        }
    }
    // Start from the longest centered row, which lies in the data span.
    let start = centered
        .iter()
        .max_by(|a, b| dot(a, a).total_cmp(&dot(b, b)))
        .cloned()
        .unwrap_or_else(|| vec![1.0; d]);
    let v1 = power_iteration(&cov, d, &start, &[]);
    let residual = centered
        .iter()
        .map(|r| {
            let mut r = r.clone();
            remove_component(&mut r, &v1);
            r
        })
        .max_by(|a, b| dot(a, a).total_cmp(&dot(b, b)))
        .unwrap_or_else(|| vec![0.0; d]);
    let v2 = power_iteration(&cov, d, &residual, &[&v1]);
    Ok(centered.iter().map(|r| [dot(r, &v1), dot(r, &v2)]).collect())
}

pub fn pca2d_table(table: &EmbeddingTable) -> Result<Vec<(String, [f64; 2])>> {
    let rows: Vec<&[f64]> = (0..table.len()).map(|i| table.row(i)).collect();
    let coords = pca2d(&rows)?;
    Ok(table.ids().iter().cloned().zip(coords).collect())
}
