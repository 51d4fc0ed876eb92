//! Graph topologies with trap nodes, and the two generators built from them:
//! the non-Hermitian CTQW Hamiltonian and the classical CTRW transfer matrix.
//!
//! Node indices are 1-based everywhere in the public surface.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// How the diagonal of the trap-free Hamiltonian is filled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalMode {
    /// Constant 2 on every node, including chain ends.
    UniformTwo,
    /// Weighted vertex degree: each row of the trap-free matrix sums to zero.
    #[default]
    VertexDegree,
}

impl std::str::FromStr for DiagonalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_two" => Ok(DiagonalMode::UniformTwo),
            "vertex_degree" => Ok(DiagonalMode::VertexDegree),
            other => Err(Error::Validation(format!("unknown diagonal mode {other:?}"))),
        }
    }
}

/// Off-diagonal coupling pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coupling {
    /// Nearest-neighbour chain, coupling -1.
    Nearest,
    /// All pairs coupled by -1/|j-k|^exponent along a chain.
    PowerLaw { exponent: f64 },
    /// Arbitrary undirected graph, coupling -1 per listed bond.
    Graph { edges: Vec<[usize; 2]> },
}

/// Ordered, duplicate-free set of 1-based trap node indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct TrapSet(Vec<usize>);

impl TrapSet {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("duplicate trap node {}", w[0])));
        }
        if indices.first() == Some(&0) {
            return Err(Error::NodeOutOfRange { index: 0, n: 0 });
        }
        Ok(TrapSet(indices))
    }

    pub fn empty() -> Self {
        TrapSet(Vec::new())
    }

    /// Traps at both ends of an `n`-node chain.
    pub fn chain_ends(n: usize) -> Self {
        if n == 1 {
            TrapSet(vec![1])
        } else {
            TrapSet(vec![1, n])
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.0.binary_search(&node).is_ok()
    }

    /// Zero-based indices, for matrix access.
    pub fn zero_based(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&m| m - 1)
    }

    /// Zero-based indices of the nodes in `1..=n` that are not traps.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        (1..=n).filter(|&j| !self.contains(j)).map(|j| j - 1).collect()
    }

    fn check_within(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&m) if m > n => Err(Error::NodeOutOfRange { index: m, n }),
            _ => Ok(()),
        }
    }
}

impl TryFrom<Vec<usize>> for TrapSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        TrapSet::new(v)
    }
}

impl From<TrapSet> for Vec<usize> {
    fn from(t: TrapSet) -> Self {
        t.0
    }
}

/// Graph topology, trap placement and trap strength. Both generators are
/// derived from this value on demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct HamiltonianSpec {
    pub n: usize,
    pub gamma: f64,
    pub traps: TrapSet,
    pub diagonal: DiagonalMode,
    pub coupling: Coupling,
}

#[derive(Deserialize)]
struct RawSpec {
    n: usize,
    gamma: f64,
    traps: Option<TrapSet>,
    #[serde(default)]
    diagonal: DiagonalMode,
    #[serde(default = "nearest")]
    coupling: Coupling,
}

fn nearest() -> Coupling {
    Coupling::Nearest
}

impl TryFrom<RawSpec> for HamiltonianSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let spec = HamiltonianSpec {
            traps: raw.traps.unwrap_or_else(|| TrapSet::chain_ends(raw.n)),
            n: raw.n,
            gamma: raw.gamma,
            diagonal: raw.diagonal,
            coupling: raw.coupling,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Nearest-neighbour chain with traps on nodes 1 and `n`.
pub fn build_chain(n: usize, gamma: f64, diagonal: DiagonalMode) -> Result<HamiltonianSpec> {
    if n < 2 {
        return Err(Error::InvalidSize(format!(
            "chain needs at least 2 nodes for end traps, got {n}"
        )));
    }
    let spec = HamiltonianSpec {
        n,
        gamma,
        traps: TrapSet::chain_ends(n),
        diagonal,
        coupling: Coupling::Nearest,
    };
    spec.validate()?;
    Ok(spec)
}

/// Chain with all-pairs couplings -1/|j-k|^exponent and end traps.
///
/// With [`DiagonalMode::VertexDegree`] the diagonal is the negative row sum of
/// the couplings, so the trap-free generator conserves probability.
pub fn build_long_range_chain(
    n: usize,
    exponent: f64,
    gamma: f64,
    diagonal: DiagonalMode,
) -> Result<HamiltonianSpec> {
    if n < 2 {
        return Err(Error::InvalidSize(format!(
            "chain needs at least 2 nodes for end traps, got {n}"
        )));
    }
    let spec = HamiltonianSpec {
        n,
        gamma,
        traps: TrapSet::chain_ends(n),
        diagonal,
        coupling: Coupling::PowerLaw { exponent },
    };
    spec.validate()?;
    Ok(spec)
}

/// Arbitrary undirected graph from a symmetric 0/1 adjacency matrix.
/// The diagonal is the vertex degree.
pub fn build_from_adjacency(
    adjacency: &DMatrix<f64>,
    traps: TrapSet,
    gamma: f64,
) -> Result<HamiltonianSpec> {
    let n = adjacency.nrows();
    if n == 0 || adjacency.ncols() != n {
        return Err(Error::Validation(format!(
            "adjacency must be square and non-empty, got {}x{}",
            adjacency.nrows(),
            adjacency.ncols()
        )));
    }
    let mut edges = Vec::new();
    for j in 0..n {
        if adjacency[(j, j)] != 0.0 {
            return Err(Error::Validation(format!("non-zero diagonal at node {}", j + 1)));
        }
        for k in 0..n {
            let a = adjacency[(j, k)];
            if a != 0.0 && a != 1.0 {
                return Err(Error::Validation(format!(
                    "non-binary entry {a} at ({}, {})",
                    j + 1,
                    k + 1
                )));
            }
            if a != adjacency[(k, j)] {
                return Err(Error::Validation(format!(
                    "asymmetric adjacency at ({}, {})",
                    j + 1,
                    k + 1
                )));
            }
            if k > j && a == 1.0 {
                edges.push([j + 1, k + 1]);
            }
        }
    }
    let spec = HamiltonianSpec {
        n,
        gamma,
        traps,
        diagonal: DiagonalMode::VertexDegree,
        coupling: Coupling::Graph { edges },
    };
    spec.validate()?;
    Ok(spec)
}

impl HamiltonianSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSize("graph has no nodes".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Validation(format!(
                "trap strength must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        self.traps.check_within(self.n)?;
        match &self.coupling {
            Coupling::Nearest => {}
            Coupling::PowerLaw { exponent } => {
                if !(*exponent > 1.0) {
                    return Err(Error::Divergence(*exponent));
                }
            }
            Coupling::Graph { edges } => {
                for &[a, b] in edges {
                    for idx in [a, b] {
                        if idx == 0 || idx > self.n {
                            return Err(Error::NodeOutOfRange { index: idx, n: self.n });
                        }
                    }
                    if a == b {
                        return Err(Error::Validation(format!("self-loop at node {a}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_traps(&self) -> usize {
        self.traps.len()
    }

    /// Trap nodes that actually absorb: none when Γ = 0.
    pub fn active_traps(&self) -> TrapSet {
        if self.gamma == 0.0 {
            TrapSet::empty()
        } else {
            self.traps.clone()
        }
    }

    /// Off-diagonal coupling matrix (zero diagonal, entries <= 0).
    pub fn couplings(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut c = DMatrix::zeros(n, n);
        match &self.coupling {
            Coupling::Nearest => {
                for j in 0..n.saturating_sub(1) {
                    c[(j, j + 1)] = -1.0;
                    c[(j + 1, j)] = -1.0;
                }
            }
            Coupling::PowerLaw { exponent } => {
                for j in 0..n {
                    for k in (j + 1)..n {
                        let v = -((k - j) as f64).powf(-exponent);
                        c[(j, k)] = v;
                        c[(k, j)] = v;
                    }
                }
            }
            Coupling::Graph { edges } => {
                for &[a, b] in edges {
                    c[(a - 1, b - 1)] = -1.0;
                    c[(b - 1, a - 1)] = -1.0;
                }
            }
        }
        c
    }

    /// Trap-free Hamiltonian H0 (equal to -T0).
    pub fn base_hamiltonian(&self) -> DMatrix<f64> {
        let mut h = self.couplings();
        for j in 0..self.n {
            h[(j, j)] = match self.diagonal {
                DiagonalMode::UniformTwo => 2.0,
                DiagonalMode::VertexDegree => -h.row(j).sum(),
            };
        }
        h
    }

    /// Diagonal of the trap projector P scaled by the trap strength.
    pub fn trap_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for m in self.traps.zero_based() {
            d[m] = self.gamma;
        }
        d
    }

    /// Same spec with node labels reversed, j -> n + 1 - j.
    pub fn mirrored(&self) -> HamiltonianSpec {
        let flip = |j: usize| self.n + 1 - j;
        let coupling = match &self.coupling {
            Coupling::Graph { edges } => Coupling::Graph {
                edges: edges.iter().map(|&[a, b]| [flip(a), flip(b)]).collect(),
            },
            other => other.clone(),
        };
        HamiltonianSpec {
            traps: TrapSet::new(self.traps.indices().iter().map(|&m| flip(m)).collect())
                .expect("mirror of a valid trap set is valid"),
            coupling,
            ..self.clone()
        }
    }
}

/// H = H0 - i Γ P. Complex symmetric; decaying spectrum for Γ > 0.
pub fn quantum_hamiltonian(spec: &HamiltonianSpec) -> DMatrix<C64> {
    let mut h = spec.base_hamiltonian().map(|x| C64::new(x, 0.0));
    for (j, g) in spec.trap_diagonal().into_iter().enumerate() {
        h[(j, j)].im -= g;
    }
    h
}

/// T = -H0 - Γ P.
pub fn classical_transfer_matrix(spec: &HamiltonianSpec) -> DMatrix<f64> {
    let mut t = -spec.base_hamiltonian();
    for (j, g) in spec.trap_diagonal().into_iter().enumerate() {
        t[(j, j)] -= g;
    }
    t
}
