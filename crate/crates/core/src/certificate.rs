//! Quadratic-constraint blocks, the stability LMI and certificate verification.
//!
//! Ordering conventions (0-based): the Lipschitz-split signal `χ ∈ R^{mn}` stores the
//! entry for input `i` and state `j` at `i·n + j`; the sector-split signal
//! `ξ ∈ R^{n(n+m)}` stores row `i`, column `j` of the NPV Jacobian at `i·(n+m) + j`.
//! Both orders agree with the selectors `Q = I_m ⊗ 1_{1×n}` and `R = I_n ⊗ 1_{1×(n+m)}`,
//! so `u_ρ = Q χ` and `ζ_K = R ξ`. Multipliers `γ` (m×n) and `Λ` (n×(n+m)) are stored
//! as matrices indexed like the signals they weight.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_shape, Error, Result};
use crate::linalg::{inverse, max_eig, min_eig, spectral_norm, symmetrize};
use crate::model::{linearize, PlantModel, SafePolytope};
use crate::sector::SectorBound;

/// Relative margin for "negative definite": `λ_max(M) ≤ −1e-7·max(1, ‖M‖₂)`.
pub const LMI_REL_MARGIN: f64 = 1e-7;

/// Minimum eigenvalue accepted for `P ≻ 0`.
pub const P_MIN_EIG: f64 = 1e-9;

/// Nonnegative multipliers of the Lipschitz and sector quadratic constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct QcMultipliers {
    /// `γ_{ij}`, input `i`, state `j` (m × n).
    pub gamma: DMatrix<f64>,
    /// `Λ_{ij}`, NPV row `i`, column `j` (n × (n+m)).
    pub lambda: DMatrix<f64>,
}

impl QcMultipliers {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { gamma: DMatrix::zeros(m, n), lambda: DMatrix::zeros(n, n + m) }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.gamma.iter().chain(self.lambda.iter()).all(|&v| v >= 0.0)
    }

    /// Column sums `Γ_j = Σ_i γ_{ij}`.
    pub fn gamma_column_sums(&self) -> DVector<f64> {
        DVector::from_iterator(self.gamma.ncols(), self.gamma.column_iter().map(|c| c.sum()))
    }
}

/// `I_m ⊗ 1_{1×n}`.
pub fn input_selector(m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::<f64>::identity(m, m).kronecker(&DMatrix::from_element(1, n, 1.0))
}

/// `I_n ⊗ 1_{1×(n+m)}`.
pub fn npv_selector(n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::<f64>::identity(n, n).kronecker(&DMatrix::from_element(1, n + m, 1.0))
}

/// `[L²·diag(Γ_j), 0; 0, −diag(γ)]` over `(x, χ)`.
pub fn lipschitz_qc_matrix(lipschitz: f64, gamma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !(lipschitz >= 0.0) {
        return Err(Error::InvalidInput(format!("Lipschitz bound {lipschitz} must be nonnegative")));
    }
    if gamma.iter().any(|&g| !(g >= 0.0)) {
        return Err(Error::InvalidInput("Lipschitz multipliers must be nonnegative".into()));
    }
    let (m, n) = gamma.shape();
    let mut out = DMatrix::zeros(n + m * n, n + m * n);
    for j in 0..n {
        out[(j, j)] = lipschitz * lipschitz * gamma.column(j).sum();
    }
    for i in 0..m {
        for j in 0..n {
            let k = n + i * n + j;
            out[(k, k)] = -gamma[(i, j)];
        }
    }
    Ok(out)
}

/// Blocks of the sector quadratic constraint over `(x, χ, ξ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorQcBlocks {
    pub m_x: DMatrix<f64>,
    pub m_chi: DMatrix<f64>,
    pub m_xi: DMatrix<f64>,
    pub n_x: DMatrix<f64>,
    pub n_chi: DMatrix<f64>,
}

impl SectorQcBlocks {
    /// The full symmetric constraint matrix `[M_x 0 N_x; * M_χ N_χ; * * M_ξ]`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let (n, mn, nx) = (self.m_x.nrows(), self.m_chi.nrows(), self.m_xi.nrows());
        let mut out = DMatrix::zeros(n + mn + nx, n + mn + nx);
        out.view_mut((0, 0), (n, n)).copy_from(&self.m_x);
        out.view_mut((n, n), (mn, mn)).copy_from(&self.m_chi);
        out.view_mut((n + mn, n + mn), (nx, nx)).copy_from(&self.m_xi);
        out.view_mut((0, n + mn), (n, nx)).copy_from(&self.n_x);
        out.view_mut((n + mn, 0), (nx, n)).copy_from(&self.n_x.transpose());
        out.view_mut((n, n + mn), (mn, nx)).copy_from(&self.n_chi);
        out.view_mut((n + mn, n), (nx, mn)).copy_from(&self.n_chi.transpose());
        out
    }
}

pub fn sector_qc_blocks(sector: &SectorBound, lambda: &DMatrix<f64>) -> Result<SectorQcBlocks> {
    let (n, m) = (sector.state_dim(), sector.input_dim());
    check_shape("sector multipliers", lambda.shape(), (n, n + m))?;
    if lambda.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidInput("sector multipliers must be nonnegative".into()));
    }
    let w = n + m;
    let center = |i: usize, j: usize| 0.5 * (sector.lower[(i, j)] + sector.upper[(i, j)]);
    let radius = |i: usize, j: usize| sector.lower[(i, j)].abs().max(sector.upper[(i, j)].abs());
    let spread = |i: usize, j: usize| {
        let (c, r) = (center(i, j), radius(i, j));
        r * r - c * c
    };

    let mut m_x = DMatrix::zeros(n, n);
    for j in 0..n {
        m_x[(j, j)] = (0..n).map(|i| lambda[(i, j)] * spread(i, j)).sum();
    }
    let mut u_diag = DMatrix::zeros(m, m);
    for j in 0..m {
        u_diag[(j, j)] = (0..n).map(|i| lambda[(i, n + j)] * spread(i, n + j)).sum();
    }
    let q = input_selector(m, n);
    let m_chi = q.transpose() * u_diag * &q;

    let mut m_xi = DMatrix::zeros(n * w, n * w);
    let mut n_x = DMatrix::zeros(n, n * w);
    let mut d_u = DMatrix::zeros(m, n * w);
    for i in 0..n {
        for j in 0..w {
            m_xi[(i * w + j, i * w + j)] = -lambda[(i, j)];
        }
        for j in 0..n {
            n_x[(j, i * w + j)] = lambda[(i, j)] * center(i, j);
        }
        for j in 0..m {
            d_u[(j, i * w + n + j)] = lambda[(i, n + j)] * center(i, n + j);
        }
    }
    let n_chi = q.transpose() * d_u;
    Ok(SectorQcBlocks { m_x, m_chi, m_xi, n_x, n_chi })
}

/// The stability LMI over `(x, χ, ξ)`:
/// `[V, 0, N_x + P R; 0, M_χ − diag(γ), N_χ; *, *, M_ξ]` with
/// `V = M_x + L²·diag(Γ) + P A₀,K + A₀,Kᵀ P`. Negative definiteness certifies stability.
pub fn stability_lmi(
    a0k: &DMatrix<f64>,
    p: &DMatrix<f64>,
    blocks: &SectorQcBlocks,
    lipschitz: f64,
    gamma: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a0k.nrows();
    check_shape("A0K", a0k.shape(), (n, n))?;
    check_shape("P", p.shape(), (n, n))?;
    check_shape("M_x", blocks.m_x.shape(), (n, n))?;
    let mn = blocks.m_chi.nrows();
    let m = gamma.nrows();
    check_shape("gamma", gamma.shape(), (m, n))?;
    if mn != m * n {
        return Err(Error::Dimension(format!("M_chi has size {mn}, expected {}", m * n)));
    }
    let nx = blocks.m_xi.nrows();
    if nx != n * (n + m) {
        return Err(Error::Dimension(format!("M_xi has size {nx}, expected {}", n * (n + m))));
    }
    let lip = lipschitz_qc_matrix(lipschitz, gamma)?;
    let r = npv_selector(n, m);

    let mut out = DMatrix::zeros(n + mn + nx, n + mn + nx);
    let v = &blocks.m_x + lip.view((0, 0), (n, n)) + p * a0k + a0k.transpose() * p;
    out.view_mut((0, 0), (n, n)).copy_from(&v);
    let chi = &blocks.m_chi + lip.view((n, n), (mn, mn));
    out.view_mut((n, n), (mn, mn)).copy_from(&chi);
    out.view_mut((n + mn, n + mn), (nx, nx)).copy_from(&blocks.m_xi);
    let coupling = &blocks.n_x + p * &r;
    out.view_mut((0, n + mn), (n, nx)).copy_from(&coupling);
    out.view_mut((n + mn, 0), (nx, n)).copy_from(&coupling.transpose());
    out.view_mut((n, n + mn), (mn, nx)).copy_from(&blocks.n_chi);
    out.view_mut((n + mn, n), (nx, mn)).copy_from(&blocks.n_chi.transpose());
    Ok(out)
}

/// Basis of the signal space left once zero-width sector entries are pinned:
/// such an entry forces `ξ_p = c·x_j` (state column) or `ξ_p = c·u_j` with `u = Qχ`
/// (input column), so its quadratic constraint holds with equality and the LMI only
/// needs to hold on that subspace. Columns are `x`, `χ`, then one per entry of positive
/// width in `ξ` order.
pub fn signal_basis(sector: &SectorBound) -> DMatrix<f64> {
    let (n, m) = (sector.state_dim(), sector.input_dim());
    let w = n + m;
    let (mn, full) = (m * n, n + m * n + n * w);
    let free: Vec<usize> = (0..n * w).filter(|&p| sector.lower[(p / w, p % w)] != sector.upper[(p / w, p % w)]).collect();
    let mut t = DMatrix::zeros(full, n + mn + free.len());
    for d in 0..n + mn {
        t[(d, d)] = 1.0;
    }
    let mut next = n + mn;
    for p in 0..n * w {
        let (i, j) = (p / w, p % w);
        let row = n + mn + p;
        if sector.lower[(i, j)] != sector.upper[(i, j)] {
            t[(row, next)] = 1.0;
            next += 1;
        } else if j < n {
            t[(row, j)] = sector.lower[(i, j)];
        } else {
            for k in 0..n {
                t[(row, n + (j - n) * n + k)] = sector.lower[(i, j)];
            }
        }
    }
    t
}

/// `Tᵀ M T` with `T` from [`signal_basis`].
pub fn reduce_lmi(sector: &SectorBound, full: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let t = signal_basis(sector);
    check_shape("stability LMI", full.shape(), (t.nrows(), t.nrows()))?;
    Ok(symmetrize(&(t.transpose() * full * &t)))
}

/// Largest `σ` with `{x | xᵀPx ≤ σ}` inside `{x | a_iᵀx ≤ b_i}`:
/// `σ = min_i b_i² / (a_iᵀ P⁻¹ a_i)`.
pub fn max_level(p: &DMatrix<f64>, polytope: &SafePolytope) -> Result<f64> {
    let n = polytope.dim();
    check_shape("P", p.shape(), (n, n))?;
    if !(min_eig(p) > 0.0) {
        return Err(Error::InvalidInput("P not PD".into()));
    }
    let pinv = inverse(&symmetrize(p))?;
    let a = polytope.normals();
    let b = polytope.offsets();
    let mut sigma = f64::INFINITY;
    for i in 0..polytope.num_faces() {
        let ai = a.row(i).transpose();
        let q = (ai.transpose() * &pinv * &ai)[(0, 0)];
        if !(q > 0.0) {
            return Err(Error::InvalidInput(format!("face {i} has a zero normal")));
        }
        sigma = sigma.min(b[i] * b[i] / q);
    }
    Ok(sigma)
}

/// `(K, L, P, multipliers, σ)` witnessing robust stability on the level set
/// `{xᵀPx ≤ σ}` inside the safe polytope scaled by `scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityCertificate {
    pub gain: DMatrix<f64>,
    pub lipschitz: f64,
    pub p: DMatrix<f64>,
    pub multipliers: QcMultipliers,
    pub level: f64,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

/// Negative definiteness with the relative margin [`LMI_REL_MARGIN`].
pub fn is_negative_definite(m: &DMatrix<f64>) -> bool {
    max_eig(m) <= -LMI_REL_MARGIN * spectral_norm(m).max(1.0)
}

/// Assembles the stability LMI for a certificate against a sector, restricted to the
/// signal subspace of [`signal_basis`].
pub fn certificate_lmi(model: &dyn PlantModel, cert: &StabilityCertificate, sector: &SectorBound) -> Result<DMatrix<f64>> {
    let lin0 = linearize(model, &vec![0.0; model.param_dim()])?;
    let a0k = lin0.closed_loop(&cert.gain)?;
    let blocks = sector_qc_blocks(sector, &cert.multipliers.lambda)?;
    reduce_lmi(sector, &stability_lmi(&a0k, &cert.p, &blocks, cert.lipschitz, &cert.multipliers.gamma)?)
}

/// Checks `P ≻ 0`, the stability LMI and containment of the level set in the scaled
/// safe polytope. `sector` must have been computed for the certificate's gain,
/// Lipschitz budget and scaled domain.
pub fn verify_certificate(
    model: &dyn PlantModel,
    cert: &StabilityCertificate,
    sector: &SectorBound,
    safe: &SafePolytope,
) -> Result<Verdict> {
    let n = model.state_dim();
    check_shape("P", cert.p.shape(), (n, n))?;
    if !cert.multipliers.is_nonnegative() {
        return Ok(Verdict::Invalid("negative multiplier".into()));
    }
    if (&cert.p - cert.p.transpose()).amax() > 1e-9 * cert.p.amax().max(1.0) {
        return Ok(Verdict::Invalid("P not symmetric".into()));
    }
    if !(min_eig(&cert.p) >= P_MIN_EIG) {
        return Ok(Verdict::Invalid("P not PD".into()));
    }
    if !(cert.level > 0.0) {
        return Ok(Verdict::Invalid("level must be positive".into()));
    }
    let lmi = certificate_lmi(model, cert, sector)?;
    if !is_negative_definite(&lmi) {
        return Ok(Verdict::Invalid("LMI not negative definite".into()));
    }
    let domain = safe.scaled(cert.scale)?;
    let sigma_max = max_level(&cert.p, &domain)?;
    if cert.level > sigma_max * (1.0 + 1e-9) {
        return Ok(Verdict::Invalid(format!(
            "ellipsoid not contained in domain (level {} > {})",
            cert.level, sigma_max
        )));
    }
    Ok(Verdict::Valid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearPlant;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn lipschitz_qc_examples() {
        assert_eq!(lipschitz_qc_matrix(2.0, &scalar(1.0)).unwrap(), DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, -1.0]));
        let g = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let m = lipschitz_qc_matrix(1.0, &g).unwrap();
        assert_eq!(m, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0])));
        let g = DMatrix::from_row_slice(2, 2, &[0.5, 2.0, 1.5, 3.0]);
        let m = lipschitz_qc_matrix(0.0, &g).unwrap();
        assert_eq!(m, DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, -0.5, -2.0, -1.5, -3.0])));
        assert!(lipschitz_qc_matrix(1.0, &scalar(-1.0)).is_err());
    }

    #[test]
    fn sector_blocks_examples() {
        let s = SectorBound::from_bounds(
            DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let lam = DMatrix::from_row_slice(1, 2, &[0.7, 0.3]);
        let b = sector_qc_blocks(&s, &lam).unwrap();
        assert_eq!(b.m_x, scalar(0.7));
        assert_eq!(b.m_chi, scalar(0.0));
        assert_eq!(b.m_xi, DMatrix::from_diagonal(&DVector::from_vec(vec![-0.7, -0.3])));
        assert_eq!(b.n_x, DMatrix::zeros(1, 2));
        assert_eq!(b.n_chi, DMatrix::zeros(1, 2));

        let zero = sector_qc_blocks(&s, &DMatrix::zeros(1, 2)).unwrap();
        assert!(zero.matrix().iter().all(|&v| v == 0.0));

        let s = SectorBound::from_bounds(
            DMatrix::from_row_slice(1, 2, &[0.5, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.5, 0.0]),
        )
        .unwrap();
        let b = sector_qc_blocks(&s, &DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        assert_relative_eq!(b.m_x[(0, 0)], 1.25, epsilon = 1e-15);
        assert_eq!(b.n_x, DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
    }

    #[test]
    fn sector_qc_is_nonnegative_on_sector_signals() {
        // ξ_ij = δ_ij z_j with δ_ij in the sector, z = (x, Qχ): the form is ≥ 0
        let (n, m) = (2, 1);
        let lower = DMatrix::from_row_slice(2, 3, &[-0.5, 0.1, 0.8, -1.0, -0.2, 0.0]);
        let upper = DMatrix::from_row_slice(2, 3, &[0.5, 0.6, 1.2, 0.3, 0.4, 0.0]);
        let s = SectorBound::from_bounds(lower.clone(), upper.clone()).unwrap();
        let lam = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, 2.0, 0.3, 1.7, 0.9]);
        let qc = sector_qc_blocks(&s, &lam).unwrap().matrix();
        let q = input_selector(m, n);
        let mut seed = 7u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..500 {
            let x = DVector::from_fn(n, |_, _| 2.0 * rnd() - 1.0);
            let chi = DVector::from_fn(m * n, |_, _| 2.0 * rnd() - 1.0);
            let u = &q * &chi;
            let z: Vec<f64> = x.iter().chain(u.iter()).copied().collect();
            let mut xi = DVector::zeros(n * (n + m));
            for i in 0..n {
                for j in 0..n + m {
                    let d = lower[(i, j)] + rnd() * (upper[(i, j)] - lower[(i, j)]);
                    xi[i * (n + m) + j] = d * z[j];
                }
            }
            let v = DVector::from_iterator(n + m * n + n * (n + m), x.iter().chain(chi.iter()).chain(xi.iter()).copied());
            assert!((v.transpose() * &qc * &v)[(0, 0)] >= -1e-12);
        }
    }

    #[test]
    fn scalar_lmi_reduces_to_lyapunov() {
        let s = SectorBound::from_bounds(DMatrix::zeros(1, 2), DMatrix::zeros(1, 2)).unwrap();
        let blocks = sector_qc_blocks(&s, &DMatrix::zeros(1, 2)).unwrap();
        let lmi = stability_lmi(&scalar(-3.0), &scalar(2.0), &blocks, 0.0, &scalar(0.0)).unwrap();
        assert_eq!(lmi.shape(), (4, 4));
        assert_eq!(lmi[(0, 0)], -12.0);
        let lmi = stability_lmi(&scalar(1.0), &scalar(1.0), &blocks, 0.0, &scalar(0.0)).unwrap();
        assert_eq!(lmi[(0, 0)], 2.0);
        assert!(!is_negative_definite(&lmi));
    }

    #[test]
    fn lmi_quadratic_form_matches_expansion() {
        // zᵀ M z = 2xᵀP(Ax + Rξ) + Lipschitz QC + sector QC
        let (n, m) = (2, 1);
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.2, -2.0]);
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]);
        let s = SectorBound::from_bounds(
            DMatrix::from_row_slice(2, 3, &[-0.1, 0.0, 0.9, -0.3, 0.2, -0.1]),
            DMatrix::from_row_slice(2, 3, &[0.1, 0.4, 1.1, 0.3, 0.5, 0.1]),
        )
        .unwrap();
        let lam = DMatrix::from_row_slice(2, 3, &[0.4, 1.0, 0.2, 0.6, 0.7, 0.1]);
        let gamma = DMatrix::from_row_slice(1, 2, &[0.3, 0.8]);
        let blocks = sector_qc_blocks(&s, &lam).unwrap();
        let lmi = stability_lmi(&a, &p, &blocks, 1.3, &gamma).unwrap();
        let lip = lipschitz_qc_matrix(1.3, &gamma).unwrap();
        let qc = blocks.matrix();
        let r = npv_selector(n, m);
        let total = n + m * n + n * (n + m);
        let v = DVector::from_fn(total, |i, _| ((i * 37 % 11) as f64 - 5.0) / 3.0);
        let x = v.rows(0, n).into_owned();
        let xi = v.rows(n + m * n, n * (n + m)).into_owned();
        let xc = v.rows(0, n + m * n).into_owned();
        let expected = 2.0 * (x.transpose() * &p * (&a * &x + &r * &xi))[(0, 0)]
            + (xc.transpose() * &lip * &xc)[(0, 0)]
            + (v.transpose() * &qc * &v)[(0, 0)];
        assert_relative_eq!((v.transpose() * &lmi * &v)[(0, 0)], expected, epsilon = 1e-10);
    }

    #[test]
    fn pinned_entries_reduce_the_signal_space() {
        // ẋ = −x + u with K = 0: the input column is exactly 1, the state column is 0
        let s = SectorBound::from_bounds(DMatrix::from_row_slice(1, 2, &[0.0, 1.0]), DMatrix::from_row_slice(1, 2, &[0.0, 1.0])).unwrap();
        let t = signal_basis(&s);
        assert_eq!(t.shape(), (4, 2));
        // ξ = (0·x, 1·χ)
        assert_eq!(t, DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]));
        let plant = LinearPlant::fixed(scalar(-1.0), scalar(1.0)).unwrap();
        let x = SafePolytope::new(DMatrix::from_row_slice(2, 1, &[1.0, -1.0]), DVector::from_vec(vec![1.0, 1.0])).unwrap();
        // V̇ = −2x² + 2xu with |u| ≤ L|x|: stable for L < 1, and the reduced LMI says so
        let cert = |l: f64, g: f64| StabilityCertificate {
            gain: scalar(0.0),
            lipschitz: l,
            p: scalar(1.0),
            multipliers: QcMultipliers { gamma: scalar(g), lambda: DMatrix::zeros(1, 2) },
            level: 0.5,
            scale: 1.0,
        };
        assert!(verify_certificate(&plant, &cert(0.5, 1.0), &s, &x).unwrap().is_valid());
        for g in [0.1, 0.5, 1.0, 2.0, 10.0] {
            assert!(!verify_certificate(&plant, &cert(1.0, g), &s, &x).unwrap().is_valid());
        }
    }

    #[test]
    fn max_level_examples() {
        let unit_box = SafePolytope::from_vertices_2d(&[[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]).unwrap();
        assert_relative_eq!(max_level(&DMatrix::identity(2, 2), &unit_box).unwrap(), 1.0, epsilon = 1e-12);
        let rect = SafePolytope::from_vertices_2d(&[[1.0, 2.0], [-1.0, 2.0], [-1.0, -2.0], [1.0, -2.0]]).unwrap();
        let p = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        assert_relative_eq!(max_level(&p, &rect).unwrap(), 4.0, epsilon = 1e-12);
        let strip = SafePolytope::from_vertices_2d(&[[1.0, 10.0], [-1.0, 10.0], [-1.0, -10.0], [1.0, -10.0]]).unwrap();
        let half = strip.scaled(0.5).unwrap();
        assert_relative_eq!(max_level(&DMatrix::identity(2, 2), &half).unwrap(), 0.25, epsilon = 1e-12);
        assert!(max_level(&-DMatrix::<f64>::identity(2, 2), &unit_box).is_err());
    }

    fn scalar_setup(a: f64) -> (LinearPlant, SafePolytope, SectorBound, StabilityCertificate) {
        let plant = LinearPlant::fixed(scalar(a), scalar(0.0)).unwrap();
        let x = SafePolytope::new(DMatrix::from_row_slice(2, 1, &[1.0, -1.0]), DVector::from_vec(vec![1.0, 1.0])).unwrap();
        // zero B: input column of the sector is 0
        let s = SectorBound::from_bounds(DMatrix::zeros(1, 2), DMatrix::zeros(1, 2)).unwrap();
        let cert = StabilityCertificate {
            gain: scalar(0.0),
            lipschitz: 0.0,
            p: scalar(1.0),
            multipliers: QcMultipliers { gamma: scalar(1.0), lambda: DMatrix::from_element(1, 2, 10.0) },
            level: 0.5,
            scale: 1.0,
        };
        (plant, x, s, cert)
    }

    #[test]
    fn scalar_certificates() {
        let (plant, x, s, cert) = scalar_setup(-1.0);
        assert_eq!(verify_certificate(&plant, &cert, &s, &x).unwrap(), Verdict::Valid);
        let (plant, x, s, cert) = scalar_setup(1.0);
        assert_eq!(
            verify_certificate(&plant, &cert, &s, &x).unwrap(),
            Verdict::Invalid("LMI not negative definite".into())
        );
        let (plant, x, s, mut cert) = scalar_setup(-1.0);
        cert.level = 1.5;
        assert!(!verify_certificate(&plant, &cert, &s, &x).unwrap().is_valid());
        cert.level = 0.5;
        cert.p = scalar(0.0);
        assert_eq!(verify_certificate(&plant, &cert, &s, &x).unwrap(), Verdict::Invalid("P not PD".into()));
    }
}
