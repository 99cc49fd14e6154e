//! Exact-operator-free dynamic mode decomposition.
//!
//! The best-fit operator `A = X2 X1⁺` is never formed. Instead `X1` is
//! truncated by SVD, `A` is projected onto the leading left singular vectors
//! (`Ã = Uᵀ X2 V Σ⁻¹`), and the projected modes `Φ = U W` are built from the
//! eigenvectors of `Ã`. Amplitudes come from the pseudo-inverse of `Φ`
//! applied to the first snapshot.

use std::cmp::Ordering;

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values at or below `RATIO_FLOOR * σ₁` are treated as zero.
pub const RATIO_FLOOR: f64 = 1e-12;
/// Absolute floor: a matrix whose largest singular value is below this has no energy.
pub const ABS_FLOOR: f64 = 1e-300;
/// `W` with `σ_min / σ_max` below this is considered defective.
pub const DEFECTIVE_CONDITION: f64 = 1e-10;

/// How many singular triplets to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum TruncationRule {
    FixedRank(usize),
    /// Smallest rank whose cumulative squared singular values reach this fraction.
    EnergyFraction(f64),
    /// Keep `σ_k / σ_1 > value`.
    SingularValueRatio(f64),
}

impl Default for TruncationRule {
    fn default() -> Self {
        TruncationRule::EnergyFraction(0.9999)
    }
}

impl TruncationRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TruncationRule::FixedRank(0) => Err(Error::InvalidTruncation("fixed rank must be positive".into())),
            TruncationRule::EnergyFraction(f) if !(f > 0.0 && f <= 1.0) => Err(Error::InvalidTruncation(format!(
                "energy fraction {f} is outside (0, 1]"
            ))),
            TruncationRule::SingularValueRatio(r) if !(r > 0.0 && r < 1.0) => Err(Error::InvalidTruncation(format!(
                "singular value ratio {r} is outside (0, 1)"
            ))),
            _ => Ok(()),
        }
    }

    /// Returns `(rank, clamped)` for non-increasing singular values `s`.
    fn select(&self, s: &[f64]) -> (usize, bool) {
        let available = numerical_rank(s);
        match *self {
            TruncationRule::FixedRank(k) => (k.min(available), k > available),
            TruncationRule::EnergyFraction(f) => {
                let total: f64 = s.iter().map(|x| x * x).sum();
                let mut acc = 0.0;
                let mut r = s.len();
                for (k, x) in s.iter().enumerate() {
                    acc += x * x;
                    if acc >= f * total {
                        r = k + 1;
                        break;
                    }
                }
                (r.min(available), false)
            }
            TruncationRule::SingularValueRatio(ratio) => {
                let r = s.iter().take_while(|&&x| x / s[0] > ratio).count();
                (r.min(available).max(1), false)
            }
        }
    }
}

fn numerical_rank(s: &[f64]) -> usize {
    let floor = (s[0] * RATIO_FLOOR).max(ABS_FLOOR);
    s.iter().take_while(|&&x| x > floor).count()
}

/// Rank-`r` truncated SVD `X ≈ U Σ Vᵀ`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: Mat<f64>,
    /// Kept singular values, strictly positive and non-increasing.
    pub s: Vec<f64>,
    pub v: Mat<f64>,
    /// Full spectrum before truncation.
    pub singular_values: Vec<f64>,
    /// The rule asked for more triplets than were numerically available.
    pub rank_clamped: bool,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Fraction of `‖X‖²_F` captured by the kept triplets.
    pub fn kept_energy(&self) -> f64 {
        let total: f64 = self.singular_values.iter().map(|x| x * x).sum();
        self.s.iter().map(|x| x * x).sum::<f64>() / total
    }
}

pub fn svd_truncated(x: MatRef<'_, f64>, rule: &TruncationRule) -> Result<TruncatedSvd> {
    rule.validate()?;
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::ShapeMismatch("cannot decompose an empty matrix".into()));
    }
    if !x.is_all_finite() {
        return Err(Error::InvalidParameter("snapshot matrix has non-finite entries".into()));
    }
    let svd = x.thin_svd().map_err(|_| Error::SvdFailed)?;
    let singular_values: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    if singular_values.first().is_none_or(|&s| s <= ABS_FLOOR) {
        return Err(Error::NoSignalEnergy);
    }
    let (r, rank_clamped) = rule.select(&singular_values);
    Ok(TruncatedSvd {
        u: svd.U().subcols(0, r).to_owned(),
        s: singular_values[..r].to_vec(),
        v: svd.V().subcols(0, r).to_owned(),
        singular_values,
        rank_clamped,
    })
}

/// `Ã = Uᵀ X2 V Σ⁻¹`.
pub fn reduced_operator(svd: &TruncatedSvd, x2: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if x2.nrows() != svd.u.nrows() || x2.ncols() != svd.v.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "X2 is {}x{}, expected {}x{}",
            x2.nrows(),
            x2.ncols(),
            svd.u.nrows(),
            svd.v.nrows()
        )));
    }
    let mut a = svd.u.transpose() * x2 * &svd.v;
    for (j, s) in svd.s.iter().enumerate() {
        for i in 0..a.nrows() {
            a[(i, j)] /= s;
        }
    }
    if !a.is_all_finite() {
        return Err(Error::InvalidParameter("reduced operator is not finite".into()));
    }
    Ok(a)
}

/// Eigenpairs of the reduced operator lifted to the snapshot space.
#[derive(Debug, Clone)]
pub struct EigenModes {
    /// Unit-norm eigenvectors of `Ã`, one per column.
    pub w: Mat<C64>,
    pub eigenvalues: Vec<C64>,
    /// `Φ = U W`.
    pub modes: Mat<C64>,
}

pub fn eig_modes(a_tilde: MatRef<'_, f64>, u: MatRef<'_, f64>) -> Result<EigenModes> {
    let r = a_tilde.nrows();
    if a_tilde.ncols() != r {
        return Err(Error::ShapeMismatch(format!(
            "reduced operator is {}x{}",
            r,
            a_tilde.ncols()
        )));
    }
    if u.ncols() != r {
        return Err(Error::ShapeMismatch(format!(
            "U has {} columns, operator rank is {r}",
            u.ncols()
        )));
    }
    let evd = a_tilde.eigen().map_err(|_| Error::EigenFailed)?;
    let eigenvalues: Vec<C64> = evd.S().column_vector().iter().copied().collect();
    if eigenvalues.iter().any(|l| !(l.re.is_finite() && l.im.is_finite())) {
        return Err(Error::EigenFailed);
    }
    let mut w = evd.U().to_owned();
    for j in 0..r {
        let norm = w.col(j).norm_l2();
        if norm > 0.0 {
            for i in 0..r {
                w[(i, j)] /= norm;
            }
        }
    }

    let sv = w.singular_values().map_err(|_| Error::SvdFailed)?;
    let condition = sv.last().copied().unwrap_or(0.0) / sv[0];
    if !(condition >= DEFECTIVE_CONDITION) {
        return Err(Error::DefectiveOperator { rank: r, condition });
    }

    let modes = lift(u, w.as_ref());
    Ok(EigenModes { w, eigenvalues, modes })
}

/// `U W` with real `U`, computed on real and imaginary parts separately so
/// that conjugate columns of `W` give exactly conjugate columns of the result.
fn lift(u: MatRef<'_, f64>, w: MatRef<'_, C64>) -> Mat<C64> {
    let w_re = Mat::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)].re);
    let w_im = Mat::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)].im);
    let re = u * &w_re;
    let im = u * &w_im;
    Mat::from_fn(u.nrows(), w.ncols(), |i, j| C64::new(re[(i, j)], im[(i, j)]))
}

/// Pseudo-inverse amplitudes `b = Φ⁺ x1`.
pub fn amplitudes(modes: MatRef<'_, C64>, x1: &[f64]) -> Result<Vec<C64>> {
    if modes.nrows() != x1.len() {
        return Err(Error::ShapeMismatch(format!(
            "x1 has {} entries, modes have {} rows",
            x1.len(),
            modes.nrows()
        )));
    }
    let r = modes.ncols();
    if r == 0 {
        return Ok(Vec::new());
    }
    let svd = modes.thin_svd().map_err(|_| Error::SvdFailed)?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let cutoff = s[0] * f64::EPSILON * modes.nrows().max(r) as f64;
    let (uu, vv) = (svd.U(), svd.V());
    // b = V Σ⁺ Uᴴ x1
    let mut coeff = vec![C64::new(0.0, 0.0); s.len()];
    for (k, c) in coeff.iter_mut().enumerate() {
        if s[k] > cutoff {
            let dot: C64 = (0..x1.len()).map(|i| uu[(i, k)].conj() * x1[i]).sum();
            *c = dot / s[k];
        }
    }
    Ok((0..r)
        .map(|i| (0..s.len()).map(|k| vv[(i, k)] * coeff[k]).sum())
        .collect())
}

/// Output of [`dmd`]. Modes are sorted by descending `|b_k|·‖Φ_k‖`, then
/// descending `|λ_k|`, then non-negative imaginary part first.
#[derive(Debug, Clone)]
pub struct DmdResult {
    pub modes: Mat<C64>,
    pub eigenvalues: Vec<C64>,
    pub amplitudes: Vec<C64>,
    /// Seconds per step of the analysed snapshot sequence.
    pub dt: f64,
    pub singular_values: Vec<f64>,
    pub rank_clamped: bool,
    /// `Ã`, kept for residual diagnostics.
    pub reduced_operator: Mat<f64>,
    /// `W`, columns in the same order as `eigenvalues`.
    pub eigenvectors: Mat<C64>,
}

impl DmdResult {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mode_norm(&self, k: usize) -> f64 {
        self.modes.col(k).norm_l2()
    }

    /// Index of the exact complex conjugate of mode `k`, if present.
    pub fn conjugate_of(&self, k: usize) -> Option<usize> {
        conjugate_partners(&self.eigenvalues)[k]
    }

    /// `x_j = Σ_k Φ_k λ_k^{j-1} b_k` for 1-based snapshot index `j`.
    ///
    /// # Panics
    /// If `j == 0`.
    pub fn reconstruct(&self, j: usize) -> Vec<C64> {
        assert!(j >= 1, "snapshot index is 1-based");
        let coeff: Vec<C64> = self
            .eigenvalues
            .iter()
            .zip(&self.amplitudes)
            .map(|(l, b)| l.powu((j - 1) as u32) * b)
            .collect();
        (0..self.modes.nrows())
            .map(|i| coeff.iter().enumerate().map(|(k, c)| self.modes[(i, k)] * c).sum())
            .collect()
    }

    /// Real part of the reconstruction for snapshots `1..=n` as an `m × n` matrix.
    pub fn reconstruct_snapshots(&self, n: usize) -> Mat<f64> {
        let r = self.rank();
        let mut coeff_re = Mat::<f64>::zeros(r, n);
        let mut coeff_im = Mat::<f64>::zeros(r, n);
        for k in 0..r {
            let mut c = self.amplitudes[k];
            for j in 0..n {
                coeff_re[(k, j)] = c.re;
                coeff_im[(k, j)] = c.im;
                c *= self.eigenvalues[k];
            }
        }
        let phi_re = Mat::from_fn(self.modes.nrows(), r, |i, k| self.modes[(i, k)].re);
        let phi_im = Mat::from_fn(self.modes.nrows(), r, |i, k| self.modes[(i, k)].im);
        &phi_re * &coeff_re - &phi_im * &coeff_im
    }

    /// `‖Ã w_k − λ_k w_k‖₂ / ‖Ã‖₂` for every mode.
    pub fn eigen_residuals(&self) -> Vec<f64> {
        let a = &self.reduced_operator;
        let r = a.nrows();
        let norm = a.singular_values().ok().and_then(|s| s.first().copied()).unwrap_or(0.0);
        (0..r)
            .map(|k| {
                let res: f64 = (0..r)
                    .map(|i| {
                        let aw: C64 = (0..r).map(|l| self.eigenvectors[(l, k)] * a[(i, l)]).sum();
                        (aw - self.eigenvalues[k] * self.eigenvectors[(i, k)]).norm_sqr()
                    })
                    .sum::<f64>()
                    .sqrt();
                if norm > 0.0 {
                    res / norm
                } else {
                    res
                }
            })
            .collect()
    }
}

/// For each eigenvalue, the index of its exact complex conjugate (non-real only).
pub fn conjugate_partners(eigs: &[C64]) -> Vec<Option<usize>> {
    let mut out = vec![None; eigs.len()];
    for k in 0..eigs.len() {
        if eigs[k].im == 0.0 || out[k].is_some() {
            continue;
        }
        if let Some(p) = (0..eigs.len()).find(|&p| p != k && out[p].is_none() && eigs[p] == eigs[k].conj()) {
            out[k] = Some(p);
            out[p] = Some(k);
        }
    }
    out
}

/// Full decomposition of the shifted pair `(X1, X2)` sampled every `dt` seconds.
pub fn dmd(x1: MatRef<'_, f64>, x2: MatRef<'_, f64>, rule: &TruncationRule, dt: f64) -> Result<DmdResult> {
    if x1.ncols() == 0 || x1.nrows() == 0 {
        return Err(Error::TooFewSnapshots(x1.ncols() + 1));
    }
    if x1.nrows() != x2.nrows() || x1.ncols() != x2.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "X1 is {}x{} but X2 is {}x{}",
            x1.nrows(),
            x1.ncols(),
            x2.nrows(),
            x2.ncols()
        )));
    }
    let svd = svd_truncated(x1, rule)?;
    let a_tilde = reduced_operator(&svd, x2)?;
    let eig = eig_modes(a_tilde.as_ref(), svd.u.as_ref())?;
    let first: Vec<f64> = (0..x1.nrows()).map(|i| x1[(i, 0)]).collect();
    let mut b = amplitudes(eig.modes.as_ref(), &first)?;

    // real data: conjugate modes carry conjugate amplitudes
    let partners = conjugate_partners(&eig.eigenvalues);
    for (k, p) in partners.iter().enumerate() {
        if let Some(p) = *p {
            if k < p {
                let avg = (b[k] + b[p].conj()) * 0.5;
                b[k] = avg;
                b[p] = avg.conj();
            }
        }
    }

    let r = eig.eigenvalues.len();
    let weight: Vec<f64> = (0..r).map(|k| b[k].norm() * eig.modes.col(k).norm_l2()).collect();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| {
        weight[j]
            .total_cmp(&weight[i])
            .then(eig.eigenvalues[j].norm().total_cmp(&eig.eigenvalues[i].norm()))
            .then((eig.eigenvalues[i].im < 0.0).cmp(&(eig.eigenvalues[j].im < 0.0)))
            .then(i.cmp(&j))
    });

    let modes = Mat::from_fn(eig.modes.nrows(), r, |i, k| eig.modes[(i, order[k])]);
    let eigenvectors = Mat::from_fn(r, r, |i, k| eig.w[(i, order[k])]);
    Ok(DmdResult {
        modes,
        eigenvalues: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        amplitudes: order.iter().map(|&k| b[k]).collect(),
        dt,
        singular_values: svd.singular_values,
        rank_clamped: svd.rank_clamped,
        reduced_operator: a_tilde,
        eigenvectors,
    })
}

/// Like [`dmd`], but on a defective reduced operator retries with one rank less.
pub fn dmd_reducing_rank(
    x1: MatRef<'_, f64>,
    x2: MatRef<'_, f64>,
    rule: &TruncationRule,
    dt: f64,
) -> Result<DmdResult> {
    let mut rule = *rule;
    loop {
        match dmd(x1, x2, &rule, dt) {
            Err(Error::DefectiveOperator { rank, .. }) if rank > 1 => rule = TruncationRule::FixedRank(rank - 1),
            other => return other,
        }
    }
}

/// Orders complex numbers by (re, im); used for multiset comparisons in tests.
pub fn cmp_complex(a: &C64, b: &C64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}
