//! Interference-free subspaces for every (AP, UE) pair.
//!
//! The precoder of UE `k` at AP `m` is restricted to the null space of the
//! stacked channels of the other UEs at that AP, which cancels multi-user
//! interference locally without any exchange between APs.

use crate::error::{Error, Result};
use crate::model::{ChannelSet, SensingGeometry};
use crate::{CMatrix, CVector};

/// Null-space bases and projected channels, indexed `[m][k]`.
#[derive(Debug, Clone)]
pub struct NullspaceData {
    /// Orthonormal basis `P_{m,k}`, `Ntx x r_{m,k}`.
    pub basis: Vec<Vec<CMatrix>>,
    /// `Pᴴ h_{m,k}`.
    pub h_hat: Vec<Vec<CVector>>,
    /// `Pᴴ a(θ_m)`.
    pub a_hat: Vec<Vec<CVector>>,
}

impl NullspaceData {
    pub fn dim(&self, m: usize, k: usize) -> usize {
        self.basis[m][k].ncols()
    }

    /// Full-dimension precoder `P_{m,k} x` from null-space coordinates.
    pub fn lift(&self, m: usize, k: usize, coords: &CVector) -> CVector {
        &self.basis[m][k] * coords
    }
}

/// Rows `h_{m,i}ᴴ` for every `i != k`, in ascending `i`.
pub fn interference_matrix(channels: &ChannelSet, m: usize, k: usize) -> CMatrix {
    let row = &channels.h[m];
    let ntx = row.first().map_or(0, |h| h.len());
    let others: Vec<&CVector> = row.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, h)| h).collect();
    CMatrix::from_fn(others.len(), ntx, |r, c| others[r][c].conj())
}

/// Orthonormal basis of `{x : H x = 0}`.
///
/// The SVD runs on `H` padded with zero rows to a square matrix so that the
/// full set of right singular vectors is available; the padding leaves the
/// null space unchanged. Singular values at or below
/// `max(rows, cols) · ε · σ_max` count as zero.
pub fn nullspace_basis(h: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = h.shape();
    if rows == 0 {
        return Ok(CMatrix::identity(cols, cols));
    }
    let size = rows.max(cols);
    let mut padded = CMatrix::zeros(size, cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(h);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = size as f64 * f64::EPSILON * sigma_max;

    let null_rows: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= tol)
        .collect();
    if null_rows.is_empty() {
        return Err(Error::NullspaceEmpty { m: 0, k: 0 });
    }
    // Row i of Vᴴ is v_iᴴ.
    Ok(CMatrix::from_fn(cols, null_rows.len(), |r, c| v_t[(null_rows[c], r)].conj()))
}

/// Projects every channel and target steering vector into its (m, k)
/// interference null space.
pub fn project(channels: &ChannelSet, geometry: &SensingGeometry) -> Result<NullspaceData> {
    let (m_count, k_count) = (channels.num_tx(), channels.num_ue());
    let mut basis = Vec::with_capacity(m_count);
    let mut h_hat = Vec::with_capacity(m_count);
    let mut a_hat = Vec::with_capacity(m_count);
    for m in 0..m_count {
        let mut bm = Vec::with_capacity(k_count);
        let mut hm = Vec::with_capacity(k_count);
        let mut am = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let p = nullspace_basis(&interference_matrix(channels, m, k)).map_err(|e| match e {
                Error::NullspaceEmpty { .. } => Error::NullspaceEmpty { m, k },
                other => other,
            })?;
            hm.push(p.ad_mul(&channels.h[m][k]));
            am.push(p.ad_mul(&geometry.a_tx[m]));
            bm.push(p);
        }
        basis.push(bm);
        h_hat.push(hm);
        a_hat.push(am);
    }
    Ok(NullspaceData { basis, h_hat, a_hat })
}

/// Largest `|h_{m,i}ᴴ P_{m,k}|` over all `i != k`, relative to `‖h_{m,i}‖`.
pub fn max_leakage(channels: &ChannelSet, data: &NullspaceData) -> f64 {
    let mut worst: f64 = 0.0;
    for (m, row) in channels.h.iter().enumerate() {
        for k in 0..row.len() {
            for (_, h) in row.iter().enumerate().filter(|&(i, _)| i != k) {
                let leak = data.basis[m][k].ad_mul(h).norm();
                worst = worst.max(leak / h.norm().max(f64::MIN_POSITIVE));
            }
        }
    }
    worst
}
