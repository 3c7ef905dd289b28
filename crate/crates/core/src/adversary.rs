//! Coalition knowledge and substitution attacks.
//!
//! A coalition watching `H` in-edges learns `A G = C`, where `A` is the
//! `k x (M+1)` key matrix (column `m` = coefficients of `P_m`), `G` stacks
//! the observed `[tracking, data, data^q, ..., data^(q^(M-1))]` columns and
//! `C` the observed tag coefficients. Members holding verifier keys add
//! `X A = P` with `X` the Vandermonde rows of their public points.
//!
//! This module enumerates the keys consistent with such a view, builds the
//! explicit homogeneous solutions `r * (a ⊗ b)`, and runs substitution
//! experiments against an honest verifier outside the coalition.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authcode::{AuthError, KeyMaterial, Packet, Scheme, SchemeParams, SourceKey};
use crate::gf::{BaseElem, ExtElem, ExtField, Field, GfError};
use crate::linalg::{self, AffineSolution, Matrix};
use crate::netcode::{self, EdgeSpec, NetError, Network, NetworkFile, NodeSpec, PropagateOptions, Role, SessionState};
use crate::poly;

/// Default bound on brute-force enumeration states.
pub const DEFAULT_MAX_ENUM: u128 = 1 << 24;
/// Environment variable overriding [`DEFAULT_MAX_ENUM`].
pub const MAX_ENUM_ENV: &str = "NCAUTH_MAX_ENUM";
/// Largest `q^(M-1)` accepted by [`lemma2_sparse_cofactor`].
pub const MAX_COFACTOR_DEGREE: u64 = 1 << 12;

#[derive(Debug, Error)]
pub enum AdvError {
    #[error("brute force needs {states} states, above the cap of {cap}; use linear-algebra mode or raise {MAX_ENUM_ENV}")]
    CapExceeded { states: u128, cap: u128 },
    #[error("coalition holds K = {got} keys, construction needs K <= k - 1 = {max}")]
    TooManyKeys { got: usize, max: usize },
    #[error("H = {h} observed columns exceed M = {m}")]
    TooManyEdges { h: usize, m: usize },
    #[error("every observed column has zero tracking symbol")]
    DegenerateTracking,
    #[error("observed column {0} is not of the form t(1, g, g^q, ...)")]
    NotFrobeniusColumn(usize),
    #[error("q^(M-1) = {0} is too large for the cofactor construction")]
    DegreeTooLarge(u64),
    #[error("constructed matrix fails its defining equations")]
    Construction,
    #[error("bad experiment parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Field(#[from] GfError),
}

/// Brute-force cap from [`MAX_ENUM_ENV`], or the default.
pub fn enum_cap() -> u128 {
    std::env::var(MAX_ENUM_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_MAX_ENUM)
}

/// What a coalition knows after one or more observations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoalitionView {
    pub k: usize,
    pub m: usize,
    /// Verifier indices (1-based) of the held keys.
    pub held: Vec<usize>,
    /// `(M+1) x H`.
    pub gmat: Matrix<ExtElem>,
    /// `k x H`.
    pub cmat: Matrix<ExtElem>,
    /// `K x k`.
    pub xmat: Matrix<ExtElem>,
    /// `K x (M+1)`.
    pub pmat: Matrix<ExtElem>,
}

impl CoalitionView {
    /// Builds the view from observed packets and held `(index, x_i, evals)`.
    pub fn from_observations(scheme: &Scheme, packets: &[&Packet], held: &[(usize, ExtElem, Vec<ExtElem>)]) -> Self {
        let field = scheme.field();
        let SchemeParams { k, m, .. } = scheme.params();
        let gmat = Matrix::from_fn(m + 1, packets.len(), |row, col| {
            let p = packets[col];
            if row == 0 {
                field.embed_base(p.tracking)
            } else {
                field.frobenius_iter(p.data, row - 1)
            }
        });
        let cmat = Matrix::from_fn(k, packets.len(), |j, col| packets[col].tag[j]);
        let points: Vec<ExtElem> = held.iter().map(|h| h.1).collect();
        let xmat = linalg::vandermonde(field, &points, k);
        let pmat = Matrix::from_rows(held.iter().map(|h| h.2.clone()).collect());
        let pmat = if held.is_empty() { Matrix::filled(0, m + 1, ExtElem::ZERO) } else { pmat };
        CoalitionView { k, m, held: held.iter().map(|h| h.0).collect(), gmat, cmat, xmat, pmat }
    }

    /// Number of observed columns `H`.
    pub fn h(&self) -> usize {
        self.gmat.cols()
    }

    /// Number of held verifier keys `K`.
    pub fn key_count(&self) -> usize {
        self.xmat.rows()
    }

    /// Appends the columns of another observation of the same key.
    pub fn merge_observation(&mut self, other: &CoalitionView) {
        self.gmat = self.gmat.hcat(&other.gmat);
        self.cmat = self.cmat.hcat(&other.cmat);
    }

    /// Same view with `C = 0` and `P = 0`.
    pub fn homogeneous(&self) -> Self {
        let mut v = self.clone();
        v.cmat = Matrix::filled(self.cmat.rows(), self.cmat.cols(), ExtElem::ZERO);
        v.pmat = Matrix::filled(self.pmat.rows(), self.pmat.cols(), ExtElem::ZERO);
        v
    }

    /// `A G = C` and `X A = P`.
    pub fn is_consistent(&self, field: &ExtField, a: &Matrix<ExtElem>) -> bool {
        linalg::mat_mul(field, &self.xmat, a) == self.pmat && linalg::mat_mul(field, a, &self.gmat) == self.cmat
    }

    /// Both systems flattened into one, unknown `A[j][m]` at `j (M+1) + m`.
    pub fn linear_system(&self) -> (Matrix<ExtElem>, Vec<ExtElem>) {
        let (k, w) = (self.k, self.m + 1);
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for j in 0..k {
            for col in 0..self.h() {
                let mut row = vec![ExtElem::ZERO; k * w];
                for m in 0..w {
                    row[j * w + m] = self.gmat[(m, col)];
                }
                rows.push(row);
                rhs.push(self.cmat[(j, col)]);
            }
        }
        for i in 0..self.key_count() {
            for m in 0..w {
                let mut row = vec![ExtElem::ZERO; k * w];
                for j in 0..k {
                    row[j * w + m] = self.xmat[(i, j)];
                }
                rows.push(row);
                rhs.push(self.pmat[(i, m)]);
            }
        }
        let system = if rows.is_empty() { Matrix::filled(0, k * w, ExtElem::ZERO) } else { Matrix::from_rows(rows) };
        (system, rhs)
    }
}

/// Assembles the view of `members` (node indices) from a propagated session.
///
/// Observed columns are the members' in-edges, member by member in file
/// order. A verifying member contributes its verifier key.
pub fn collect_view(net: &Network, state: &SessionState, scheme: &Scheme, keys: &KeyMaterial, members: &[usize]) -> CoalitionView {
    let assignment = net.verifier_assignment();
    let packets: Vec<&Packet> = members.iter().flat_map(|&m| net.in_edges(m).iter().map(|&e| &state.packets[e])).collect();
    let held: Vec<(usize, ExtElem, Vec<ExtElem>)> = members
        .iter()
        .filter_map(|&m| assignment[m])
        .map(|v| (v, keys.points.point(v), keys.verifier(v).evals.clone()))
        .collect();
    CoalitionView::from_observations(scheme, &packets, &held)
}

/// How to enumerate consistent keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnumMode {
    /// Test every `k x (M+1)` matrix.
    BruteForce,
    /// Solve the linear system; list the affine space when small enough.
    Linear,
}

/// Keys consistent with a view.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyCandidateSet {
    /// `q^l`.
    pub order: u64,
    /// Dimension of the solution space over GF(q^l); `None` when empty.
    pub dimension: Option<usize>,
    /// Explicit list when it was enumerated.
    pub keys: Option<Vec<Matrix<ExtElem>>>,
}

impl KeyCandidateSet {
    /// `(q^l)^dimension`, or 0 for an inconsistent view.
    pub fn cardinality(&self) -> Option<u128> {
        match self.dimension {
            None => Some(0),
            Some(d) => (self.order as u128).checked_pow(d as u32),
        }
    }
}

fn matrix_from_index(field: &ExtField, rows: usize, cols: usize, mut index: u128) -> Matrix<ExtElem> {
    let order = field.order() as u128;
    let mut out = Matrix::filled(rows, cols, ExtElem::ZERO);
    for j in 0..rows {
        for m in 0..cols {
            out[(j, m)] = ExtElem((index % order) as u32);
            index /= order;
        }
    }
    out
}

/// Every key matrix consistent with `view`.
pub fn enumerate_consistent_keys(field: &ExtField, view: &CoalitionView, mode: EnumMode, cap: u128) -> Result<KeyCandidateSet, AdvError> {
    let (k, w) = (view.k, view.m + 1);
    let order = field.order();
    match mode {
        EnumMode::BruteForce => {
            let states = (order as u128)
                .checked_pow((k * w) as u32)
                .filter(|&s| s <= cap)
                .ok_or(AdvError::CapExceeded { states: (order as u128).saturating_pow((k * w) as u32), cap })?;
            let keys: Vec<Matrix<ExtElem>> = (0..states)
                .map(|i| matrix_from_index(field, k, w, i))
                .filter(|a| view.is_consistent(field, a))
                .collect();
            let dimension = match keys.len() {
                0 => None,
                n => Some(log_exact(n as u128, order as u128).ok_or(AdvError::Construction)?),
            };
            Ok(KeyCandidateSet { order, dimension, keys: Some(keys) })
        }
        EnumMode::Linear => {
            let (system, rhs) = view.linear_system();
            let Some(sol) = linalg::solve(field, &system, &rhs) else {
                return Ok(KeyCandidateSet { order, dimension: None, keys: Some(Vec::new()) });
            };
            let dim = sol.dimension();
            let keys = (order as u128)
                .checked_pow(dim as u32)
                .filter(|&n| n <= cap)
                .map(|n| (0..n).map(|i| affine_point(field, &sol, i, k, w)).collect());
            Ok(KeyCandidateSet { order, dimension: Some(dim), keys })
        }
    }
}

fn log_exact(mut n: u128, base: u128) -> Option<usize> {
    let mut e = 0;
    while n > 1 {
        if !n.is_multiple_of(base) {
            return None;
        }
        n /= base;
        e += 1;
    }
    Some(e)
}

/// Element `index` of `particular + span(kernel)`, in mixed-radix order.
fn affine_point(field: &ExtField, sol: &AffineSolution<ExtElem>, mut index: u128, k: usize, w: usize) -> Matrix<ExtElem> {
    let order = field.order() as u128;
    let mut v = sol.particular.clone();
    for basis in &sol.kernel {
        let r = ExtElem((index % order) as u32);
        index /= order;
        for (x, &b) in v.iter_mut().zip(basis) {
            *x = field.add(*x, field.mul(r, b));
        }
    }
    Matrix::from_fn(k, w, |j, m| v[j * w + m])
}

fn random_affine_point(field: &ExtField, sol: &AffineSolution<ExtElem>, rng: &mut ChaCha8Rng, k: usize, w: usize) -> Matrix<ExtElem> {
    let mut v = sol.particular.clone();
    for basis in &sol.kernel {
        let r = ExtElem(rng.random_range(0..field.order()) as u32);
        for (x, &b) in v.iter_mut().zip(basis) {
            *x = field.add(*x, field.mul(r, b));
        }
    }
    Matrix::from_fn(k, w, |j, m| v[j * w + m])
}

// ---------------------------------------------------------------------------
// Explicit homogeneous solutions
// ---------------------------------------------------------------------------

/// `a ⊗ b` for `a(x) = Π(x - α_i)` and `b(y) = Π(y - β_j)`.
///
/// Every row `(1, α_i, ..., α_i^Q)` annihilates it from the left and every
/// column `(1, β_j, ..., β_j^R)` from the right.
pub fn lemma1_outer_product<F: Field>(field: &F, alphas: &[F::Elem], betas: &[F::Elem]) -> Matrix<F::Elem> {
    let a = poly::from_roots(field, alphas);
    let b = poly::from_roots(field, betas);
    Matrix::from_fn(a.len(), b.len(), |i, j| field.mul(a[i], b[j]))
}

/// A polynomial `b(y) = d(y) c(y)` with `d(y) = Π(y - γ_i)` whose support
/// lies in `{0, 1, q, ..., q^(M-1)}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseCofactor {
    pub d: Vec<ExtElem>,
    pub c: Vec<ExtElem>,
    /// Dense coefficients of `d c`, length `q^(M-1) + 1`.
    pub b_dense: Vec<ExtElem>,
    /// `(b_0, b_1, b_q, ..., b_(q^(M-1)))`.
    pub b: Vec<ExtElem>,
}

/// Exponents `0, 1, q, ..., q^(M-1)`.
pub fn sparse_support(q: u64, m: usize) -> Vec<u64> {
    std::iter::once(0).chain((0..m).map(|j| q.pow(j as u32))).collect()
}

/// Finds the monic `c(y)` of largest degree making `Π(y - γ_i) c(y)`
/// sparse, by taking a kernel vector of the banded product matrix with the
/// `M + 1` unconstrained rows removed.
pub fn lemma2_sparse_cofactor(field: &ExtField, gammas: &[ExtElem], m: usize) -> Result<SparseCofactor, AdvError> {
    let h = gammas.len();
    if h > m {
        return Err(AdvError::TooManyEdges { h, m });
    }
    let q = field.q();
    let top = q
        .checked_pow(m.saturating_sub(1) as u32)
        .filter(|&t| t <= MAX_COFACTOR_DEGREE)
        .ok_or(AdvError::DegreeTooLarge(q.saturating_pow(m.saturating_sub(1) as u32)))? as usize;
    let support = sparse_support(q, m);
    let d = poly::from_roots(field, gammas);
    let cols = top - h + 1;
    let rows: Vec<Vec<ExtElem>> = (0..=top)
        .filter(|r| !support.contains(&(*r as u64)))
        .map(|r| (0..cols).map(|c| if r >= c && r - c <= h { d[r - c] } else { ExtElem::ZERO }).collect())
        .collect();
    let c = if rows.is_empty() {
        let mut c = vec![ExtElem::ZERO; cols];
        c[cols - 1] = ExtElem::ONE;
        c
    } else {
        let kernel = linalg::kernel(field, &Matrix::from_rows(rows));
        // Each basis vector has its own free column as highest nonzero entry.
        kernel.into_iter().max_by_key(|v| v.iter().rposition(|&x| x != ExtElem::ZERO)).ok_or(AdvError::Construction)?
    };
    let c = poly::trim(field, c);
    let mut b_dense = poly::mul(field, &d, &c);
    b_dense.resize(top + 1, ExtElem::ZERO);
    if b_dense.iter().enumerate().any(|(i, &x)| x != ExtElem::ZERO && !support.contains(&(i as u64))) {
        return Err(AdvError::Construction);
    }
    let b = support.iter().map(|&i| b_dense[i as usize]).collect();
    Ok(SparseCofactor { d, c, b_dense, b })
}

/// `q^l` explicit solutions of `A G = 0`, `X A = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lemma3Family {
    /// `γ_i` read off the normalised observed columns.
    pub gammas: Vec<ExtElem>,
    /// Coefficients of `Π(x - x_i)` over held points, padded to `k`.
    pub a: Vec<ExtElem>,
    pub cofactor: SparseCofactor,
    /// `a ⊗ b`.
    pub base: Matrix<ExtElem>,
}

impl Lemma3Family {
    /// `{r A : r in GF(q^l)}`.
    pub fn members(&self, field: &ExtField) -> Vec<Matrix<ExtElem>> {
        field
            .elements()
            .map(|r| Matrix::from_fn(self.base.rows(), self.base.cols(), |i, j| field.mul(r, self.base[(i, j)])))
            .collect()
    }
}

/// Reduces `G` to columns `(1, γ, γ^q, ..., γ^(q^(M-1)))` and returns the
/// `γ`s. All-zero columns are dropped; a column with zero tracking first
/// gets the lowest-index column with nonzero tracking added to it; then
/// each column is divided by its tracking value.
pub fn frobenius_columns(field: &ExtField, gmat: &Matrix<ExtElem>) -> Result<Vec<ExtElem>, AdvError> {
    let cols: Vec<Vec<ExtElem>> =
        (0..gmat.cols()).map(|c| gmat.column(c)).filter(|c| c.iter().any(|&x| x != ExtElem::ZERO)).collect();
    if cols.is_empty() {
        return Ok(Vec::new());
    }
    let pivot = cols.iter().position(|c| c[0] != ExtElem::ZERO).ok_or(AdvError::DegenerateTracking)?;
    let mut gammas = Vec::with_capacity(cols.len());
    for (i, col) in cols.iter().enumerate() {
        let col: Vec<ExtElem> =
            if col[0] == ExtElem::ZERO { col.iter().zip(&cols[pivot]).map(|(&x, &y)| field.add(x, y)).collect() } else { col.clone() };
        let inv = field.inv(col[0])?;
        let norm: Vec<ExtElem> = col.iter().map(|&x| field.mul(x, inv)).collect();
        let gamma = norm.get(1).copied().unwrap_or(ExtElem::ZERO);
        for (row, &v) in norm.iter().enumerate().skip(1) {
            if v != field.frobenius_iter(gamma, row - 1) {
                return Err(AdvError::NotFrobeniusColumn(i));
            }
        }
        gammas.push(gamma);
    }
    Ok(gammas)
}

/// Builds `A = a ⊗ b` solving the homogeneous coalition system.
pub fn lemma3_family(field: &ExtField, view: &CoalitionView) -> Result<Lemma3Family, AdvError> {
    let (k, m) = (view.k, view.m);
    if view.key_count() + 1 > k {
        return Err(AdvError::TooManyKeys { got: view.key_count(), max: k - 1 });
    }
    let gammas = frobenius_columns(field, &view.gmat)?;
    if gammas.len() > m {
        return Err(AdvError::TooManyEdges { h: gammas.len(), m });
    }
    let points: Vec<ExtElem> = if k == 1 { Vec::new() } else { (0..view.key_count()).map(|i| view.xmat[(i, 1)]).collect() };
    let mut a = poly::from_roots(field, &points);
    a.resize(k, ExtElem::ZERO);
    let cofactor = lemma2_sparse_cofactor(field, &gammas, m)?;
    let base = Matrix::from_fn(k, m + 1, |i, j| field.mul(a[i], cofactor.b[j]));
    if !view.homogeneous().is_consistent(field, &base) {
        return Err(AdvError::Construction);
    }
    Ok(Lemma3Family { gammas, a, cofactor, base })
}

// ---------------------------------------------------------------------------
// Substitution experiment
// ---------------------------------------------------------------------------

/// Global vectors on the coalition's observed edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalVectors {
    /// Edge `i` carries source packet `i mod n`.
    Unit,
    /// Uniform GF(q) vectors.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Brute-force key enumeration; exact probability over all candidates.
    Exact,
    /// Linear-algebra candidates sampled uniformly per trial.
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionParams {
    pub p: u64,
    pub e: u32,
    pub l: u32,
    pub k: usize,
    pub m: usize,
    /// Verifier keys held by the coalition (`K`).
    pub coalition_keys: usize,
    /// In-edges observed per session (`H` for a single session).
    pub h: usize,
    /// Source messages per session.
    pub n: usize,
    /// Sessions observed under the same key.
    pub observations: usize,
    pub vectors: GlobalVectors,
    pub mode: ExperimentMode,
    pub trials: usize,
}

/// Outcome of a substitution experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct SubstitutionOutcome {
    pub params: SubstitutionParams,
    pub trials: usize,
    pub successes: usize,
    /// Mean over trials of the fraction of accepted (world key, candidate)
    /// pairs; `None` when some candidate set was too large to list.
    pub exact_probability: Option<Ratio<u64>>,
    /// Largest candidate set seen.
    pub candidate_count: u128,
    pub mode: ExperimentMode,
}

impl SubstitutionOutcome {
    pub fn frequency(&self) -> f64 {
        self.successes as f64 / self.trials.max(1) as f64
    }

    pub fn report(&self) -> SubstitutionReport {
        SubstitutionReport {
            params: self.params.clone(),
            trials: self.trials,
            successes: self.successes,
            frequency: self.frequency(),
            exact_probability: self.exact_probability.map(|r| r.to_string()),
            candidate_count: self.candidate_count.to_string(),
            mode: self.mode,
        }
    }
}

/// JSON form of [`SubstitutionOutcome`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubstitutionReport {
    pub params: SubstitutionParams,
    pub trials: usize,
    pub successes: usize,
    pub frequency: f64,
    pub exact_probability: Option<String>,
    pub candidate_count: String,
    pub mode: ExperimentMode,
}

/// One attack instance: the scheme, the true key and what the coalition saw.
#[derive(Clone, Debug)]
pub struct AttackInstance {
    pub scheme: Scheme,
    pub keys: KeyMaterial,
    pub view: CoalitionView,
    /// All observed data symbols.
    pub observed: Vec<ExtElem>,
    /// Verifier index of the honest target.
    pub target: usize,
}

/// Star network: `S` feeds `h` edges into `C1` and `n` unit edges into the
/// target `T`. `C1..CK` hold verifier keys `1..K`; `T` holds `K + 1`.
pub fn attack_network(params: &SubstitutionParams, vectors: &[Vec<BaseElem>]) -> Result<Network, NetError> {
    let members = params.coalition_keys.max(1);
    let mut nodes = vec![NodeSpec { id: "S".into(), role: Role::Source, verifying: false }];
    nodes.extend(
        (1..=members).map(|i| NodeSpec { id: format!("C{i}"), role: Role::Intermediate, verifying: i <= params.coalition_keys }),
    );
    nodes.push(NodeSpec { id: "T".into(), role: Role::Destination, verifying: true });
    let mut edges: Vec<EdgeSpec> = vectors
        .iter()
        .enumerate()
        .map(|(i, g)| EdgeSpec { id: format!("c{}", i + 1), from: "S".into(), to: "C1".into(), coeffs: g.clone() })
        .collect();
    edges.extend((0..params.n).map(|j| EdgeSpec {
        id: format!("t{}", j + 1),
        from: "S".into(),
        to: "T".into(),
        coeffs: (0..params.n).map(|i| BaseElem(u32::from(i == j))).collect(),
    }));
    Network::from_file(NetworkFile { n: params.n, nodes, edges, destinations: None, intermediates: None })
}

fn check_params(p: &SubstitutionParams) -> Result<(), AdvError> {
    if p.n == 0 || p.observations == 0 {
        return Err(AdvError::Params("n and observations must be at least 1".into()));
    }
    let order = (p.p as u128).checked_pow(p.e * p.l).unwrap_or(u128::MAX);
    if ((p.n * p.observations) as u128) > order {
        return Err(AdvError::Params(format!("{} distinct messages do not fit in a field of {order} elements", p.n * p.observations)));
    }
    Ok(())
}

/// Draws a fresh key and lets the coalition observe `observations` sessions.
pub fn attack_instance(params: &SubstitutionParams, field: &ExtField, rng: &mut ChaCha8Rng) -> Result<AttackInstance, AdvError> {
    check_params(params)?;
    let base = field.base();
    let v = params.coalition_keys + 1;
    let scheme = Scheme::new(SchemeParams { k: params.k, v, m: params.m }, field.clone())?;
    let keys = scheme.keygen(rng.random());
    let target = v;
    let mut pool: Vec<u64> = (0..field.order()).collect();
    let mut view: Option<CoalitionView> = None;
    let mut observed = Vec::new();
    for _ in 0..params.observations {
        let msgs: Vec<ExtElem> = (0..params.n)
            .map(|_| {
                let i = rng.random_range(0..pool.len());
                ExtElem(pool.swap_remove(i) as u32)
            })
            .collect();
        let vectors: Vec<Vec<BaseElem>> = (0..params.h)
            .map(|i| match params.vectors {
                GlobalVectors::Unit => (0..params.n).map(|j| BaseElem(u32::from(j == i % params.n))).collect(),
                GlobalVectors::Random => (0..params.n).map(|_| BaseElem(rng.random_range(0..base.order()) as u32)).collect(),
            })
            .collect();
        let net = attack_network(params, &vectors)?;
        let sources: Vec<Packet> = msgs.iter().map(|&s| scheme.source_packet(&keys.source, s)).collect();
        let state = netcode::propagate(&net, &scheme, &sources, Some(&keys), &PropagateOptions::default())?;
        let members: Vec<usize> = (1..=params.coalition_keys.max(1)).collect();
        let v = collect_view(&net, &state, &scheme, &keys, &members);
        observed.extend(net.in_edges(1).iter().map(|&e| state.packets[e].data));
        match view.as_mut() {
            Some(acc) => acc.merge_observation(&v),
            None => view = Some(v),
        }
    }
    Ok(AttackInstance { scheme, keys, view: view.expect("at least one observation"), observed, target })
}

/// `(1, s, s^q, ..., s^(q^(M-1)))`.
pub fn message_column(field: &ExtField, s: ExtElem, m: usize) -> Vec<ExtElem> {
    std::iter::once(ExtElem::ONE).chain((0..m).map(|i| field.frobenius_iter(s, i))).collect()
}

/// First element `s'` (in code order) whose column `(1, s', s'^q, ...)` is
/// outside the span of the observed columns, so its tag is not a
/// combination of observed tags.
pub fn forged_message(field: &ExtField, view: &CoalitionView) -> Option<ExtElem> {
    let r = linalg::rank(field, &view.gmat);
    field.elements().find(|&s| {
        let col = message_column(field, s, view.m);
        let ext = view.gmat.hcat(&Matrix::from_fn(view.m + 1, 1, |i, _| col[i]));
        linalg::rank(field, &ext) > r
    })
}

/// Target's verdict on `[1 | s' | tag from candidate]` when the true key is `world`.
fn forgery_accepted(scheme: &Scheme, world: &SourceKey, candidate: &SourceKey, s: ExtElem, x: ExtElem, target: usize) -> bool {
    let pkt = scheme.source_packet(candidate, s);
    let vk = crate::authcode::VerifierKey { index: target, evals: world.evaluate(scheme.field(), x) };
    scheme.verify_edge(&pkt, &vk, x).accepted
}

/// Runs `trials` independent substitution attacks.
///
/// Each trial draws a key, lets the coalition observe, lists or samples the
/// consistent keys, picks one uniformly and forges a tag for
/// [`forged_message`]. Success means the target verifier accepts. When the
/// candidate set is listed, every (world key, candidate) pair is also
/// checked, since each consistent key is equally likely to be the real one.
pub fn run_substitution_experiment(params: &SubstitutionParams, seed: u64, cap: u128) -> Result<SubstitutionOutcome, AdvError> {
    let field = ExtField::generate(params.p, params.e, params.l, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k, w) = (params.k, params.m + 1);
    let mut successes = 0;
    let mut exact_sum = Some(Ratio::from_integer(0u64));
    let mut candidate_count = 0u128;
    for _ in 0..params.trials {
        let inst = attack_instance(params, &field, &mut rng)?;
        let s = forged_message(&field, &inst.view).ok_or_else(|| AdvError::Params("every message is a combination of observed ones".into()))?;
        let x = inst.keys.points.point(inst.target);
        let world = &inst.keys.source;
        let mode = match params.mode {
            ExperimentMode::Exact => EnumMode::BruteForce,
            ExperimentMode::Empirical => EnumMode::Linear,
        };
        let set = enumerate_consistent_keys(&field, &inst.view, mode, cap)?;
        let count = set.cardinality().unwrap_or(u128::MAX);
        candidate_count = candidate_count.max(count);
        let candidate = match &set.keys {
            Some(list) => list[rng.random_range(0..list.len())].clone(),
            None => {
                let (system, rhs) = inst.view.linear_system();
                let sol = linalg::solve(&field, &system, &rhs).ok_or(AdvError::Construction)?;
                random_affine_point(&field, &sol, &mut rng, k, w)
            }
        };
        if forgery_accepted(&inst.scheme, world, &SourceKey::from_matrix(&candidate), s, x, inst.target) {
            successes += 1;
        }
        exact_sum = match (exact_sum, &set.keys) {
            (Some(acc), Some(list)) if (list.len() as u128).pow(2) <= cap => {
                let keys: Vec<SourceKey> = list.iter().map(SourceKey::from_matrix).collect();
                let accepted = keys
                    .iter()
                    .map(|wk| keys.iter().filter(|ck| forgery_accepted(&inst.scheme, wk, ck, s, x, inst.target)).count() as u64)
                    .sum::<u64>();
                Some(acc + Ratio::new(accepted, (list.len() as u64).pow(2)))
            }
            _ => None,
        };
    }
    let exact_probability = exact_sum.filter(|_| params.trials > 0).map(|s| s / Ratio::from_integer(params.trials as u64));
    Ok(SubstitutionOutcome { params: params.clone(), trials: params.trials, successes, exact_probability, candidate_count, mode: params.mode })
}
