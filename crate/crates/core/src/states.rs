//! Target-state families and closed-form reference values.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, DensityMatrix, PSD_TOL};

/// Name of the pseudo-random generator used for every seeded draw in the crate.
/// Seeds are expanded with `SeedableRng::seed_from_u64`.
pub const PRNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.3, seed_from_u64)";

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Distance used as loss and as reported figure of merit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    Trace,
    HilbertSchmidt,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Trace => "trace",
            LossKind::HilbertSchmidt => "hs",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "trace" | "tr" => Ok(LossKind::Trace),
            "hs" | "hilbert-schmidt" | "hilbertschmidt" => Ok(LossKind::HilbertSchmidt),
            other => Err(Error::Parse(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Isotropic,
    Werner,
    Horodecki3x3,
    NoisyGhz,
    NoisyW,
    RandomTwoQubit,
    BellAnsatz,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Isotropic => "isotropic",
            Family::Werner => "werner",
            Family::Horodecki3x3 => "horodecki",
            Family::NoisyGhz => "ghz",
            Family::NoisyW => "w",
            Family::RandomTwoQubit => "random",
            Family::BellAnsatz => "bell-ansatz",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "isotropic" | "iso" => Ok(Family::Isotropic),
            "werner" => Ok(Family::Werner),
            "horodecki" | "horodecki3x3" => Ok(Family::Horodecki3x3),
            "ghz" | "noisy-ghz" => Ok(Family::NoisyGhz),
            "w" | "noisy-w" => Ok(Family::NoisyW),
            "random" | "random-two-qubit" => Ok(Family::RandomTwoQubit),
            "bell-ansatz" | "ansatz" => Ok(Family::BellAnsatz),
            other => Err(Error::Parse(format!("unknown family {other:?}"))),
        }
    }
}

/// Parameters of the two-qubit Bell closest-state ansatz; `a` is real, `b` and `c` complex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnsatzParams {
    pub a: f64,
    pub b: Complex64,
    pub c: Complex64,
}

/// A concrete member of a state family.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    pub family: Family,
    /// Local dimension for bipartite families, party count for GHZ/W.
    pub dim: usize,
    pub q: f64,
    pub seed: u64,
    pub ansatz: Option<AnsatzParams>,
}

impl FamilySpec {
    pub fn new(family: Family, dim: usize, q: f64) -> Self {
        Self {
            family,
            dim,
            q,
            seed: 0,
            ansatz: None,
        }
    }

    pub fn with_q(&self, q: f64) -> Self {
        Self { q, ..self.clone() }
    }

    /// Local dimensions of the state this spec builds.
    pub fn dims(&self) -> Vec<usize> {
        match self.family {
            Family::Isotropic | Family::Werner => vec![self.dim, self.dim],
            Family::Horodecki3x3 => vec![3, 3],
            Family::NoisyGhz | Family::NoisyW => vec![2; self.dim],
            Family::RandomTwoQubit | Family::BellAnsatz => vec![2, 2],
        }
    }

    pub fn build(&self) -> Result<DensityMatrix> {
        match self.family {
            Family::Isotropic => isotropic(self.dim, self.q),
            Family::Werner => werner(self.dim, self.q),
            Family::Horodecki3x3 => horodecki_3x3(self.q),
            Family::NoisyGhz => noisy_mix(&ghz(self.dim)?, self.q),
            Family::NoisyW => noisy_mix(&w_state(self.dim)?, self.q),
            Family::RandomTwoQubit => random_two_qubit(self.seed),
            Family::BellAnsatz => {
                let p = self.ansatz.ok_or_else(|| {
                    Error::InvalidParameter("bell-ansatz family needs (a, b, c)".into())
                })?;
                bell_ansatz_state(p.a, p.b, p.c)
            }
        }
    }
}

fn check_q(q: f64, lo: f64, hi: f64) -> Result<()> {
    if !(lo..=hi).contains(&q) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("q = {q} outside [{lo}, {hi}]")));
    }
    Ok(())
}

fn check_local_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("local dimension {d} < 2")));
    }
    Ok(())
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Projector onto `(1/sqrt d) sum_i |i>|i>`.
pub fn max_entangled(d: usize) -> Result<DensityMatrix> {
    check_local_dim(d)?;
    let mut v = vec![real(0.0); d * d];
    for i in 0..d {
        v[i * d + i] = real(1.0 / (d as f64).sqrt());
    }
    Ok(DensityMatrix::new_unchecked(ComplexMatrix::outer(&v), vec![d, d]))
}

/// `(1-q)/d^2 I + q |phi+><phi+|`.
pub fn isotropic(d: usize, q: f64) -> Result<DensityMatrix> {
    check_local_dim(d)?;
    check_q(q, 0.0, 1.0)?;
    let n = d * d;
    let mut m = ComplexMatrix::identity(n).scale((1.0 - q) / n as f64);
    m.add_scaled(q, max_entangled(d)?.matrix());
    Ok(DensityMatrix::new_unchecked(m, vec![d, d]))
}

/// Flip operator `F|i,j> = |j,i>` on `C^d ⊗ C^d`.
pub fn flip_operator(d: usize) -> ComplexMatrix {
    let n = d * d;
    let mut f = ComplexMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            f[(j * d + i, i * d + j)] = real(1.0);
        }
    }
    f
}

/// Werner state mixing the normalised symmetric and antisymmetric projectors.
pub fn werner(d: usize, q: f64) -> Result<DensityMatrix> {
    check_local_dim(d)?;
    check_q(q, 0.0, 1.0)?;
    let n = d * d;
    let id = ComplexMatrix::identity(n);
    let flip = flip_operator(d);
    let p_sym = (&id + &flip).scale(0.5);
    let p_as = (&id - &flip).scale(0.5);
    let df = d as f64;
    let mut m = p_sym.scale((1.0 - q) * 2.0 / (df * (df + 1.0)));
    m.add_scaled(q * 2.0 / (df * (df - 1.0)), &p_as);
    Ok(DensityMatrix::new_unchecked(m, vec![d, d]))
}

/// Two-qutrit family with a PPT-entangled window, `beta_± = 5/2 ± q`.
pub fn horodecki_3x3(q: f64) -> Result<DensityMatrix> {
    check_q(q, 0.0, 2.5)?;
    let beta_minus = 2.5 - q;
    let beta_plus = 2.5 + q;
    let mut m = ComplexMatrix::zeros(9, 9);
    for &i in &[0, 4, 8] {
        for &j in &[0, 4, 8] {
            m[(i, j)] = real(2.0);
        }
    }
    for &i in &[1, 5, 6] {
        m[(i, i)] = real(beta_minus);
    }
    for &i in &[2, 3, 7] {
        m[(i, i)] = real(beta_plus);
    }
    Ok(DensityMatrix::new_unchecked(m.scale(1.0 / 21.0), vec![3, 3]))
}

fn check_parties(n: usize) -> Result<()> {
    if !(3..=4).contains(&n) {
        return Err(Error::InvalidParameter(format!("party count {n} not in {{3, 4}}")));
    }
    Ok(())
}

/// `(|0...0> + |1...1>)/sqrt 2` on `n` qubits.
pub fn ghz(n: usize) -> Result<DensityMatrix> {
    check_parties(n)?;
    let dim = 1 << n;
    let mut v = vec![real(0.0); dim];
    v[0] = real(std::f64::consts::FRAC_1_SQRT_2);
    v[dim - 1] = real(std::f64::consts::FRAC_1_SQRT_2);
    Ok(DensityMatrix::new_unchecked(ComplexMatrix::outer(&v), vec![2; n]))
}

/// Uniform superposition of the `n` single-excitation basis states.
pub fn w_state(n: usize) -> Result<DensityMatrix> {
    check_parties(n)?;
    let dim = 1 << n;
    let mut v = vec![real(0.0); dim];
    for k in 0..n {
        v[1 << k] = real(1.0 / (n as f64).sqrt());
    }
    Ok(DensityMatrix::new_unchecked(ComplexMatrix::outer(&v), vec![2; n]))
}

/// `q * state + (1 - q) * I / D`.
pub fn noisy_mix(state: &DensityMatrix, q: f64) -> Result<DensityMatrix> {
    check_q(q, 0.0, 1.0)?;
    let n = state.side();
    let mut m = ComplexMatrix::identity(n).scale((1.0 - q) / n as f64);
    m.add_scaled(q, state.matrix());
    Ok(DensityMatrix::new_unchecked(m, state.dims().to_vec()))
}

/// Two-qubit state drawn from the Hilbert-Schmidt measure: `G G^dagger / Tr(G G^dagger)`
/// with `G` a 4x4 matrix of i.i.d. standard complex normals.
pub fn random_two_qubit(seed: u64) -> Result<DensityMatrix> {
    random_hilbert_schmidt(4, vec![2, 2], seed)
}

pub fn random_hilbert_schmidt(side: usize, dims: Vec<usize>, seed: u64) -> Result<DensityMatrix> {
    linalg::check_dims(&dims, side)?;
    let mut rng = rng_from_seed(seed);
    let g = ComplexMatrix::from_fn(side, side, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let gg = g.matmul(&g.adjoint());
    let tr = gg.trace().re;
    let m = gg.scale(1.0 / tr).hermitian_part();
    DensityMatrix::new(m, dims)
}

/// The two-qubit matrix
///
/// ```text
/// [ 1/2-a   c     c*    a    ]
/// [ c*      a     b    -c*   ]
/// [ c       b*    a    -c    ]
/// [ a      -c    -c*   1/2-a ]
/// ```
///
/// Errors with [`Error::NotPsd`] when the parameters give a non-positive matrix.
pub fn bell_ansatz_matrix(a: f64, b: Complex64, c: Complex64) -> ComplexMatrix {
    let cc = c.conj();
    let h = real(0.5 - a);
    let ar = real(a);
    let rows = [
        [h, c, cc, ar],
        [cc, ar, b, -cc],
        [c, b.conj(), ar, -c],
        [ar, -c, -cc, h],
    ];
    ComplexMatrix::from_fn(4, 4, |i, j| rows[i][j])
}

pub fn bell_ansatz_state(a: f64, b: Complex64, c: Complex64) -> Result<DensityMatrix> {
    let m = bell_ansatz_matrix(a, b, c);
    let min = linalg::min_eigenvalue(&m)?;
    if min < -PSD_TOL {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(DensityMatrix::new_unchecked(m, vec![2, 2]))
}

/// Closed-form distance to the closest separable state, zero below the threshold.
pub fn reference_distance(family: Family, d: usize, q: f64, loss: LossKind) -> Result<f64> {
    check_local_dim(d)?;
    let df = d as f64;
    let value = match (family, loss) {
        (Family::Isotropic, LossKind::HilbertSchmidt) => {
            (df * df - 1.0).sqrt() / df * (q - 1.0 / (df + 1.0))
        }
        (Family::Isotropic, LossKind::Trace) => (df * df - 1.0) / (df * df) * (q - 1.0 / (df + 1.0)),
        (Family::Werner, LossKind::HilbertSchmidt) => 2.0 / (df * df - 1.0).sqrt() * (q - 0.5),
        (Family::Werner, LossKind::Trace) => q - 0.5,
        (f, l) => {
            return Err(Error::Unsupported(format!(
                "no closed-form {l} distance for family {f}"
            )))
        }
    };
    Ok(value.max(0.0))
}

/// Largest `q` for which the family is separable.
///
/// For isotropic states this is `1/(d+1)`: the state is separable exactly when
/// its fidelity with `|phi+>` is at most `1/d`, which is the same point where
/// the closed-form distances above vanish.
pub fn known_threshold(family: Family, d: usize) -> Result<f64> {
    match family {
        Family::Isotropic => {
            check_local_dim(d)?;
            Ok(1.0 / (d as f64 + 1.0))
        }
        Family::Werner => Ok(0.5),
        Family::Horodecki3x3 => Ok(0.5),
        other => Err(Error::Unsupported(format!("no known threshold for family {other}"))),
    }
}
