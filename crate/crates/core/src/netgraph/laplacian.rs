use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Laplacian and weighted incidence factorisation of an undirected weighted graph.
#[derive(Clone, Debug)]
pub struct Laplacian {
    /// `diag(row sums) - A`.
    pub laplacian: DMatrix<f64>,
    /// `n × q`, one column per undirected edge: `-1` at the lower index (source), `+1` at the higher (sink).
    pub incidence: DMatrix<f64>,
    /// Edge weights `a_ij`, aligned with the incidence columns.
    pub weights: Vec<f64>,
    /// 0-based `(source, sink)` pairs with `source < sink`.
    pub edges: Vec<(usize, usize)>,
}

/// Relative tolerance for the symmetry check on coupling matrices.
const SYMMETRY_TOL: f64 = 1e-12;

pub(crate) fn check_coupling(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidMatrix(format!(
            "coupling must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.amax().max(1.0);
    for i in 0..a.nrows() {
        if a[(i, i)] != 0.0 {
            return Err(Error::InvalidMatrix(format!(
                "nonzero diagonal at {}",
                i + 1
            )));
        }
        for j in 0..a.ncols() {
            if a[(i, j)] < 0.0 || !a[(i, j)].is_finite() {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({}, {}) = {} is not a nonnegative finite weight",
                    i + 1,
                    j + 1,
                    a[(i, j)]
                )));
            }
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidMatrix(format!(
                    "asymmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

pub fn laplacian_from_adjacency(a: &DMatrix<f64>) -> Result<Laplacian> {
    check_coupling(a)?;
    let n = a.nrows();
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if a[(i, j)] != 0.0 {
                edges.push((i, j));
                weights.push(a[(i, j)]);
            }
        }
    }
    let mut incidence = DMatrix::zeros(n, edges.len());
    for (e, &(i, j)) in edges.iter().enumerate() {
        incidence[(i, e)] = -1.0;
        incidence[(j, e)] = 1.0;
    }
    let mut laplacian = -a.clone();
    for i in 0..n {
        laplacian[(i, i)] = a.row(i).sum();
    }
    Ok(Laplacian {
        laplacian,
        incidence,
        weights,
        edges,
    })
}

/// Number of connected components of the undirected support of `a`.
pub(crate) fn component_count(a: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for u in 0..n {
                if !seen[u] && (a[(v, u)] != 0.0 || a[(u, v)] != 0.0) {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    count
}
