use serde::Serialize;

use super::model::ContactMode;
use crate::linalg::{null_space, sorted_eigenvalues, Matrix};
use crate::saltation::SaltationResult;

/// Eigenvalue of one diagonal block with a basis of its eigenspace.
/// Complex eigenvalues carry no basis.
#[derive(Debug, Clone, Serialize)]
pub struct EigenSpace {
    pub value: [f64; 2],
    pub multiplicity: usize,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SaltationStructure {
    pub identity_reset: bool,
    pub matching_dynamics: bool,
    pub equal_diagonal_blocks: bool,
    pub upper_right_zero: bool,
    pub upper_left: Vec<EigenSpace>,
    pub lower_right: Vec<EigenSpace>,
}

/// Structural properties expected for a transition type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExpectedProperties {
    pub identity_reset: bool,
    pub matching_dynamics: bool,
    pub equal_diagonal_blocks: bool,
}

pub fn expected_properties(
    from: ContactMode,
    to: ContactMode,
    mu_s: f64,
    mu_k: f64,
) -> Option<ExpectedProperties> {
    use ContactMode::*;
    let row = |r, f, d| ExpectedProperties {
        identity_reset: r,
        matching_dynamics: f,
        equal_diagonal_blocks: d,
    };
    Some(match (from, to) {
        (V, U) | (C, V) | (S, V) => row(true, true, true),
        (U, S) => row(false, false, true),
        (U, C) => row(false, false, false),
        (U, V) => row(false, false, true),
        (C, S) => {
            let eq = mu_s == mu_k;
            row(true, eq, eq)
        }
        (S, C) => row(true, false, false),
        _ => return None,
    })
}

fn scale(m: &Matrix) -> f64 {
    m.amax().max(1.0)
}

/// Eigenvalues of a block grouped into eigenspaces.
pub fn block_eigenspaces(block: &Matrix, tol: f64) -> Vec<EigenSpace> {
    let ev = sorted_eigenvalues(block);
    let mut out: Vec<EigenSpace> = Vec::new();
    for lam in ev {
        if let Some(group) = out
            .iter_mut()
            .find(|g| (g.value[0] - lam.re).abs() <= 1e-6 && (g.value[1] - lam.im).abs() <= 1e-6)
        {
            group.multiplicity += 1;
            continue;
        }
        let vectors = if lam.im.abs() <= tol {
            let n = block.nrows();
            let shifted = block - Matrix::identity(n, n) * lam.re;
            let ns = null_space(&shifted, 1e-7);
            (0..ns.ncols())
                .map(|j| {
                    let mut v: Vec<f64> = ns.column(j).iter().copied().collect();
                    // Sign convention: largest-magnitude entry positive.
                    let k = (0..v.len())
                        .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
                        .unwrap_or(0);
                    if v.get(k).is_some_and(|&x| x < 0.0) {
                        v.iter_mut().for_each(|x| *x = -*x);
                    }
                    v
                })
                .collect()
        } else {
            Vec::new()
        };
        out.push(EigenSpace {
            value: [lam.re, if lam.im.abs() <= tol { 0.0 } else { lam.im }],
            multiplicity: 1,
            vectors,
        });
    }
    out
}

/// Block structure of a saltation matrix on a `[q; qdot]` state.
pub fn analyze_structure(s: &SaltationResult, tol: f64) -> SaltationStructure {
    let n = s.xi.nrows();
    let m = n / 2;
    let xi = &s.xi;
    let ul = xi.view((0, 0), (m, m)).into_owned();
    let ur = xi.view((0, m), (m, n - m)).into_owned();
    let lr = xi.view((m, m), (n - m, n - m)).into_owned();
    let identity_reset = s.dxr.shape() == (n, n)
        && (&s.dxr - Matrix::identity(n, n)).amax() <= tol * scale(&s.dxr);
    let matching_dynamics = s.f_minus.len() == s.f_plus.len()
        && (&s.f_plus - &s.f_minus).amax() <= tol * s.f_minus.amax().max(1.0);
    SaltationStructure {
        identity_reset,
        matching_dynamics,
        equal_diagonal_blocks: n % 2 == 0 && (&ul - &lr).amax() <= tol * scale(xi),
        upper_right_zero: ur.amax() <= tol * scale(xi),
        upper_left: block_eigenspaces(&ul, 1e-12),
        lower_right: block_eigenspaces(&lr, 1e-12),
    }
}
