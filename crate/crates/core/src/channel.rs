//! Exact algebra of the two-spin total-spin measurement.
//!
//! The projectors onto total spin 1 and 0 of a nearest-neighbor pair, in the
//! basis (uu, ud, du, dd), are
//!
//! ```text
//!      | 1  0    0   0 |        | 0   0    0   0 |
//! P1 = | 0  1/2  1/2 0 |   P0 = | 0   1/2 -1/2 0 |
//!      | 0  1/2  1/2 0 |        | 0  -1/2  1/2 0 |
//!      | 0  0    0   1 |        | 0   0    0   1 | -> 0
//! ```
//!
//! All channel algebra here is over exact rationals: the sign cancellation
//! that makes the outcome-summed doubled operator non-negative must hold
//! exactly, not to a tolerance. Floating point enters only at the boundary
//! to the dense oracle and the stochastic engine.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::lattice::Lattice;

type Q = Ratio<i64>;

fn q(num: i64, den: i64) -> Q {
    Ratio::new(num, den)
}

/// Basis states of a spin pair, ordered (uu, ud, du, dd). The first arrow is
/// the spin at the bond's origin site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairState {
    UpUp = 0,
    UpDown = 1,
    DownUp = 2,
    DownDown = 3,
}

pub const PAIR_STATES: [PairState; 4] = [
    PairState::UpUp,
    PairState::UpDown,
    PairState::DownUp,
    PairState::DownDown,
];

impl PairState {
    pub fn index(self) -> usize {
        self as usize
    }

    /// Spins (sigma_a, sigma_b) of the pair state.
    pub fn spins(self) -> (i8, i8) {
        match self {
            PairState::UpUp => (1, 1),
            PairState::UpDown => (1, -1),
            PairState::DownUp => (-1, 1),
            PairState::DownDown => (-1, -1),
        }
    }

    pub fn from_spins(a: i8, b: i8) -> Self {
        match (a > 0, b > 0) {
            (true, true) => PairState::UpUp,
            (true, false) => PairState::UpDown,
            (false, true) => PairState::DownUp,
            (false, false) => PairState::DownDown,
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            PairState::UpDown => PairState::DownUp,
            PairState::DownUp => PairState::UpDown,
            other => other,
        }
    }
}

/// A 4x4 projector over exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairProjector {
    entries: [[Q; 4]; 4],
}

impl PairProjector {
    pub fn entry(&self, row: PairState, col: PairState) -> Q {
        self.entries[row.index()][col.index()]
    }

    pub fn entry_ij(&self, i: usize, j: usize) -> Q {
        self.entries[i][j]
    }

    pub fn matmul(&self, other: &PairProjector) -> PairProjector {
        let mut out = [[q(0, 1); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = q(0, 1);
                for k in 0..4 {
                    acc += self.entries[i][k] * other.entries[k][j];
                }
                out[i][j] = acc;
            }
        }
        PairProjector { entries: out }
    }

    pub fn add(&self, other: &PairProjector) -> PairProjector {
        let mut out = [[q(0, 1); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = self.entries[i][j] + other.entries[i][j];
            }
        }
        PairProjector { entries: out }
    }

    pub fn is_identity(&self) -> bool {
        (0..4).all(|i| (0..4).all(|j| self.entries[i][j] == if i == j { q(1, 1) } else { q(0, 1) }))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..4).all(|i| (0..4).all(|j| self.entries[i][j] == self.entries[j][i]))
    }

    /// Dense f64 form for the oracle boundary.
    pub fn to_f64(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = to_f64(self.entries[i][j]);
            }
        }
        out
    }
}

fn to_f64(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// The total-spin projectors (P0, P1) of a nearest-neighbor pair.
pub fn projectors() -> (PairProjector, PairProjector) {
    let h = q(1, 2);
    let p0 = PairProjector {
        entries: [
            [q(0, 1), q(0, 1), q(0, 1), q(0, 1)],
            [q(0, 1), h, -h, q(0, 1)],
            [q(0, 1), -h, h, q(0, 1)],
            [q(0, 1), q(0, 1), q(0, 1), q(0, 1)],
        ],
    };
    let p1 = PairProjector {
        entries: [
            [q(1, 1), q(0, 1), q(0, 1), q(0, 1)],
            [q(0, 1), h, h, q(0, 1)],
            [q(0, 1), h, h, q(0, 1)],
            [q(0, 1), q(0, 1), q(0, 1), q(1, 1)],
        ],
    };
    (p0, p1)
}

/// The outcome-summed superoperator on the doubled pair space,
/// `entry[(n,n'),(m,m')] = P1[n,m] P1[n',m'] + P0[n,m] P0[n',m']`.
/// Row index is `(n, n')`, column index `(m, m')`, packed as `4n + n'`.
#[derive(Debug, Clone)]
pub struct DoubledSuperoperator {
    entries: Box<[[Q; 16]; 16]>,
}

pub fn doubled_superoperator() -> DoubledSuperoperator {
    let (p0, p1) = projectors();
    let mut entries = Box::new([[q(0, 1); 16]; 16]);
    for n in 0..4 {
        for np in 0..4 {
            for m in 0..4 {
                for mp in 0..4 {
                    entries[4 * n + np][4 * m + mp] = p1.entry_ij(n, m) * p1.entry_ij(np, mp)
                        + p0.entry_ij(n, m) * p0.entry_ij(np, mp);
                }
            }
        }
    }
    DoubledSuperoperator { entries }
}

impl DoubledSuperoperator {
    pub fn entry(&self, n: PairState, np: PairState, m: PairState, mp: PairState) -> Q {
        self.entries[4 * n.index() + np.index()][4 * m.index() + mp.index()]
    }

    pub fn entry_ij(&self, row: usize, col: usize) -> Q {
        self.entries[row][col]
    }

    /// All 256 entries are non-negative: the sign problem of the
    /// outcome-resolved weights cancels in the outcome sum.
    pub fn all_non_negative(&self) -> bool {
        self.entries
            .iter()
            .all(|row| row.iter().all(|&e| e >= q(0, 1)))
    }

    /// Exact column sums of the diagonal rows: 1 on diagonal columns
    /// (m = m'), 0 elsewhere. This is trace preservation of the channel.
    pub fn trace_preserving(&self) -> bool {
        for m in 0..4 {
            for mp in 0..4 {
                let sum: Q = (0..4).map(|n| self.entries[4 * n + n][4 * m + mp]).sum();
                let expect = if m == mp { q(1, 1) } else { q(0, 1) };
                if sum != expect {
                    return false;
                }
            }
        }
        true
    }
}

/// Action of the outcome-summed channel on diagonal states: a transition
/// kernel over the four pair states. Parallel pairs are fixed points;
/// antiparallel pairs swap with probability 1/2.
#[derive(Debug, Clone)]
pub struct ClassicalKernel {
    rows: [[Q; 4]; 4],
}

/// Derives the classical kernel from the projectors and verifies, in exact
/// arithmetic, that the quantum channel maps each diagonal basis state to
/// the claimed diagonal distribution with no off-diagonal remainder.
/// Panics if the derivation check fails; that would mean the projector
/// tables are wrong.
pub fn classical_kernel() -> ClassicalKernel {
    let (p0, p1) = projectors();
    let mut rows = [[q(0, 1); 4]; 4];
    for (si, s) in PAIR_STATES.iter().enumerate() {
        // rho = |s><s|; channel output entry (m,m') = P1[m,s]P1[m',s] + P0[m,s]P0[m',s].
        for m in 0..4 {
            for mp in 0..4 {
                let val = p1.entry_ij(m, s.index()) * p1.entry_ij(mp, s.index())
                    + p0.entry_ij(m, s.index()) * p0.entry_ij(mp, s.index());
                if m == mp {
                    rows[si][m] = val;
                } else {
                    assert_eq!(
                        val,
                        q(0, 1),
                        "channel output of diagonal state {s:?} has off-diagonal terms"
                    );
                }
            }
        }
        let sum: Q = rows[si].iter().copied().sum();
        assert_eq!(sum, q(1, 1), "kernel row for {s:?} does not sum to 1");
    }
    let kernel = ClassicalKernel { rows };
    // Frozen expectation: parallel states fixed, antiparallel states swap
    // with probability 1/2.
    for s in PAIR_STATES {
        match s {
            PairState::UpDown | PairState::DownUp => {
                assert_eq!(kernel.probability(s, s), q(1, 2));
                assert_eq!(kernel.probability(s, s.swapped()), q(1, 2));
            }
            _ => assert_eq!(kernel.probability(s, s), q(1, 1)),
        }
    }
    kernel
}

impl ClassicalKernel {
    pub fn probability(&self, from: PairState, to: PairState) -> Q {
        self.rows[from.index()][to.index()]
    }

    pub fn probability_f64(&self, from: PairState, to: PairState) -> f64 {
        to_f64(self.probability(from, to))
    }

    /// Kernel conserves the pair magnetization sigma_a + sigma_b exactly.
    pub fn conserves_pair_magnetization(&self) -> bool {
        PAIR_STATES.iter().all(|&from| {
            PAIR_STATES.iter().all(|&to| {
                let (fa, fb) = from.spins();
                let (ta, tb) = to.spins();
                self.probability(from, to) == q(0, 1) || fa + fb == ta + tb
            })
        })
    }

    /// Doubly stochastic: columns sum to one as well, so the uniform
    /// distribution on each magnetization sector is stationary.
    pub fn is_doubly_stochastic(&self) -> bool {
        (0..4).all(|j| (0..4).map(|i| self.rows[i][j]).sum::<Q>() == q(1, 1))
    }
}

/// The Lindblad generator `L(rho) = gamma * sum_bonds (sum_o P_o rho P_o - rho)`
/// over the full Hilbert space of a small lattice, applied matrix-free.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    gamma: f64,
    dim: usize,
    bonds: Vec<(usize, usize)>,
}

/// Dense matrices up to this many sites are allowed in the oracle.
pub const ORACLE_SITE_CAP: usize = 10;

/// Dense superoperators are exponentiated exactly only up to this dimension
/// (dim^2 where dim is the Hilbert-space dimension).
pub const SUPEROP_DENSE_CAP: usize = 4096;

pub fn lindblad_generator(lat: &Lattice, gamma: f64) -> Result<LindbladGenerator> {
    let n = lat.n_sites();
    if n > ORACLE_SITE_CAP {
        return Err(Error::size(format!(
            "Lindblad generator limited to {ORACLE_SITE_CAP} sites, got {n}"
        )));
    }
    Ok(LindbladGenerator {
        gamma,
        dim: 1 << n,
        bonds: lat.bonds().iter().map(|b| (b.a, b.b)).collect(),
    })
}

impl LindbladGenerator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `L(rho)`, accumulating `P1 rho P1 + P0 rho P0 - rho` per bond.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for &(a, b) in &self.bonds {
            let measured = apply_pair_channel(rho, a, b);
            out += measured - rho;
        }
        out * Complex64::new(self.gamma, 0.0)
    }

    /// Dense real-symmetric matrix of the generator acting on vec(rho) in
    /// column-major convention. Only available while dim^2 stays within the
    /// dense cap.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let sdim = self.dim * self.dim;
        if sdim > SUPEROP_DENSE_CAP {
            return Err(Error::size(format!(
                "dense superoperator dimension {sdim} exceeds cap {SUPEROP_DENSE_CAP}"
            )));
        }
        let (p0, p1) = projectors();
        let mut gen = DMatrix::<f64>::zeros(sdim, sdim);
        for &(a, b) in &self.bonds {
            let p0_full = embed_pair_operator(self.dim, a, b, &p0.to_f64());
            let p1_full = embed_pair_operator(self.dim, a, b, &p1.to_f64());
            // vec(P rho P) = (P (x) P) vec(rho) for symmetric P.
            gen += p0_full.kronecker(&p0_full) + p1_full.kronecker(&p1_full);
            for i in 0..sdim {
                gen[(i, i)] -= 1.0;
            }
        }
        Ok(gen * self.gamma)
    }
}

/// `P1 rho P1 + P0 rho P0` for the bond (a, b), computed by 4x4 block
/// conjugation on the embedded pair subspace.
pub fn apply_pair_channel(
    rho: &DMatrix<Complex64>,
    site_a: usize,
    site_b: usize,
) -> DMatrix<Complex64> {
    let (p0, p1) = projectors();
    let p0 = p0.to_f64();
    let p1 = p1.to_f64();
    let dim = rho.nrows();
    let rest = rest_indices(dim, site_a, site_b);
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    let mut block = [[Complex64::ZERO; 4]; 4];
    for &row_base in &rest {
        for &col_base in &rest {
            for (ri, r) in pair_indices(row_base, site_a, site_b)
                .into_iter()
                .enumerate()
            {
                for (ci, c) in pair_indices(col_base, site_a, site_b)
                    .into_iter()
                    .enumerate()
                {
                    block[ri][ci] = rho[(r, c)];
                }
            }
            let transformed = conjugate_block(&block, &p1, &p0);
            for (ri, r) in pair_indices(row_base, site_a, site_b)
                .into_iter()
                .enumerate()
            {
                for (ci, c) in pair_indices(col_base, site_a, site_b)
                    .into_iter()
                    .enumerate()
                {
                    out[(r, c)] = transformed[ri][ci];
                }
            }
        }
    }
    out
}

/// `P rho P` for a single projector on the bond (a, b).
pub fn apply_pair_projector(
    rho: &DMatrix<Complex64>,
    site_a: usize,
    site_b: usize,
    proj: &[[f64; 4]; 4],
) -> DMatrix<Complex64> {
    let dim = rho.nrows();
    let rest = rest_indices(dim, site_a, site_b);
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    let mut block = [[Complex64::ZERO; 4]; 4];
    for &row_base in &rest {
        for &col_base in &rest {
            for (ri, r) in pair_indices(row_base, site_a, site_b)
                .into_iter()
                .enumerate()
            {
                for (ci, c) in pair_indices(col_base, site_a, site_b)
                    .into_iter()
                    .enumerate()
                {
                    block[ri][ci] = rho[(r, c)];
                }
            }
            let transformed = conjugate_single(&block, proj);
            for (ri, r) in pair_indices(row_base, site_a, site_b)
                .into_iter()
                .enumerate()
            {
                for (ci, c) in pair_indices(col_base, site_a, site_b)
                    .into_iter()
                    .enumerate()
                {
                    out[(r, c)] = transformed[ri][ci];
                }
            }
        }
    }
    out
}

/// Apply a symmetric 4x4 operator to a state vector on the (a, b) pair
/// subspace, in place.
pub fn apply_pair_to_vector(
    psi: &mut nalgebra::DVector<f64>,
    site_a: usize,
    site_b: usize,
    op: &[[f64; 4]; 4],
) {
    let dim = psi.len();
    for base in rest_indices(dim, site_a, site_b) {
        let idx = pair_indices(base, site_a, site_b);
        let old = [psi[idx[0]], psi[idx[1]], psi[idx[2]], psi[idx[3]]];
        for r in 0..4 {
            let mut acc = 0.0;
            for c in 0..4 {
                acc += op[r][c] * old[c];
            }
            psi[idx[r]] = acc;
        }
    }
}

/// Dense embedding of a 4x4 pair operator into the full Hilbert space.
pub fn embed_pair_operator(
    dim: usize,
    site_a: usize,
    site_b: usize,
    op: &[[f64; 4]; 4],
) -> DMatrix<f64> {
    let mut out = DMatrix::<f64>::zeros(dim, dim);
    for base in rest_indices(dim, site_a, site_b) {
        let idx = pair_indices(base, site_a, site_b);
        for r in 0..4 {
            for c in 0..4 {
                out[(idx[r], idx[c])] = op[r][c];
            }
        }
    }
    out
}

/// Basis indices with all combinations of the pair bits, given a base index
/// where both pair bits are clear. Order matches (uu, ud, du, dd): bit set
/// means spin up.
#[inline]
fn pair_indices(base: usize, site_a: usize, site_b: usize) -> [usize; 4] {
    let ba = 1usize << site_a;
    let bb = 1usize << site_b;
    [base | ba | bb, base | ba, base | bb, base]
}

/// All basis indices with the two pair bits clear.
fn rest_indices(dim: usize, site_a: usize, site_b: usize) -> Vec<usize> {
    let ba = 1usize << site_a;
    let bb = 1usize << site_b;
    (0..dim).filter(|i| i & ba == 0 && i & bb == 0).collect()
}

fn conjugate_block(
    block: &[[Complex64; 4]; 4],
    p1: &[[f64; 4]; 4],
    p0: &[[f64; 4]; 4],
) -> [[Complex64; 4]; 4] {
    let mut out = conjugate_single(block, p1);
    let with_p0 = conjugate_single(block, p0);
    for r in 0..4 {
        for c in 0..4 {
            out[r][c] += with_p0[r][c];
        }
    }
    out
}

fn conjugate_single(block: &[[Complex64; 4]; 4], p: &[[f64; 4]; 4]) -> [[Complex64; 4]; 4] {
    // P B P with real symmetric P.
    let mut tmp = [[Complex64::ZERO; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            let mut acc = Complex64::ZERO;
            for k in 0..4 {
                acc += p[r][k] * block[k][c];
            }
            tmp[r][c] = acc;
        }
    }
    let mut out = [[Complex64::ZERO; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            let mut acc = Complex64::ZERO;
            for k in 0..4 {
                acc += tmp[r][k] * p[k][c];
            }
            out[r][c] = acc;
        }
    }
    out
}
