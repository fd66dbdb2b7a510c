use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::{MdpError, Mode, ModeTag, Policy, TabularMdp};
use crate::linalg::solve_dense;
use crate::scalar::Real;

/// State marginals at or below this are treated as unvisited when recovering a policy.
pub const ZERO_MARGINAL: f64 = 1e-12;

const POLYTOPE_TOL: f64 = 1e-8;

/// Element of the occupancy polytope of some MDP, stored densely over `S x A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure<T> {
    num_states: usize,
    num_actions: usize,
    mode: ModeTag,
    values: Vec<T>,
}

impl<T: Real> OccupancyMeasure<T> {
    /// Wraps `values` after checking every polytope constraint of `mdp`.
    pub fn try_new(mdp: &TabularMdp<T>, values: Vec<T>) -> Result<Self, MdpError> {
        let violations = validate_occupancy(mdp, &values)?;
        if let Some(worst) = violations.iter().map(|v| v.magnitude()).reduce(f64::max) {
            return Err(MdpError::InvalidParameter(format!(
                "vector violates {} polytope constraints (worst residual {worst:e})",
                violations.len()
            )));
        }
        Ok(Self::from_parts(mdp.num_states(), mdp.num_actions(), mdp.mode().tag(), values))
    }

    pub(crate) fn from_parts(
        num_states: usize,
        num_actions: usize,
        mode: ModeTag,
        values: Vec<T>,
    ) -> Self {
        debug_assert_eq!(values.len(), num_states * num_actions);
        Self { num_states, num_actions, mode, values }
    }

    /// Convex combination `sum_i w_i d_i`; weights are assumed to sum to one.
    pub fn mixture(parts: &[(T, &OccupancyMeasure<T>)]) -> Self {
        let first = parts.first().expect("mixture of at least one occupancy").1;
        let mut values = vec![T::zero(); first.values.len()];
        for &(w, d) in parts {
            for (acc, &x) in values.iter_mut().zip(&d.values) {
                *acc += w * x;
            }
        }
        Self { values, ..first.clone() }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn mode(&self) -> ModeTag {
        self.mode
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, s: usize, a: usize) -> T {
        self.values[s * self.num_actions + a]
    }

    pub fn state_marginal(&self) -> Vec<T> {
        self.values.chunks(self.num_actions).map(|row| row.iter().copied().sum()).collect()
    }

    /// `r . d`, the expected per-step reward under this occupancy.
    pub fn dot(&self, r: &[T]) -> T {
        crate::scalar::dot(&self.values, r)
    }
}

/// A violated polytope constraint and the magnitude of its residual.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation<T> {
    Negative { state: usize, action: usize, value: T },
    Mass { residual: T },
    Flow { state: usize, residual: T },
}

impl<T: Real> Violation<T> {
    pub fn magnitude(&self) -> f64 {
        match *self {
            Violation::Negative { value, .. } => value.abs().to_f64_lossy(),
            Violation::Mass { residual } | Violation::Flow { residual, .. } => {
                residual.to_f64_lossy()
            }
        }
    }
}

/// Lists every constraint of the occupancy polytope of `mdp` that `d` violates.
pub fn validate_occupancy<T: Real>(
    mdp: &TabularMdp<T>,
    d: &[T],
) -> Result<Vec<Violation<T>>, MdpError> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    if d.len() != ns * na {
        return Err(MdpError::DimensionMismatch { expected: ns * na, got: d.len() });
    }
    let tol = T::tol(POLYTOPE_TOL);
    let mut out = Vec::new();
    for s in 0..ns {
        for a in 0..na {
            let value = d[s * na + a];
            if value < -tol || !value.is_finite() {
                out.push(Violation::Negative { state: s, action: a, value });
            }
        }
    }
    let mass: T = d.iter().copied().sum();
    if (mass - T::one()).abs() > tol {
        out.push(Violation::Mass { residual: (mass - T::one()).abs() });
    }
    let inflow = inflow(mdp, d);
    for s in 0..ns {
        let lhs: T = d[s * na..][..na].iter().copied().sum();
        let rhs = match mdp.mode() {
            Mode::Average => inflow[s],
            Mode::Discounted { gamma } => (T::one() - gamma) * mdp.initial()[s] + gamma * inflow[s],
        };
        let residual = (lhs - rhs).abs();
        if residual > tol {
            out.push(Violation::Flow { state: s, residual });
        }
    }
    Ok(out)
}

/// `sum_{s',a'} P(s | s', a') d(s', a')` for every `s`.
fn inflow<T: Real>(mdp: &TabularMdp<T>, d: &[T]) -> Vec<T> {
    let na = mdp.num_actions();
    let mut inflow = vec![T::zero(); mdp.num_states()];
    for (idx, &mass) in d.iter().enumerate() {
        if mass == T::zero() {
            continue;
        }
        for &(j, p) in mdp.successors(idx / na, idx % na) {
            inflow[j] += p * mass;
        }
    }
    inflow
}

/// Closed communicating classes of a row-major `n x n` chain.
pub fn recurrent_classes<T: Real>(chain: &[T], n: usize) -> Vec<Vec<usize>> {
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if chain[i * n + j] > T::zero() {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let sccs = kosaraju_scc(&graph);
    let mut component = vec![0; n];
    for (c, scc) in sccs.iter().enumerate() {
        for node in scc {
            component[node.index()] = c;
        }
    }
    sccs.into_iter()
        .enumerate()
        .filter(|(c, scc)| {
            scc.iter().all(|&node| {
                let i = node.index();
                (0..n).all(|j| chain[i * n + j] == T::zero() || component[j] == *c)
            })
        })
        .map(|(_, scc)| {
            let mut states: Vec<usize> = scc.into_iter().map(|node| node.index()).collect();
            states.sort_unstable();
            states
        })
        .collect()
}

/// Exact occupancy measure of `policy`, by a direct solve of the flow equations.
pub fn occupancy_of_policy<T: Real>(
    mdp: &TabularMdp<T>,
    policy: &Policy<T>,
) -> Result<OccupancyMeasure<T>, MdpError> {
    mdp.check_policy(policy)?;
    let n = mdp.num_states();
    let chain = mdp.induced_chain(policy);
    let mut a = vec![T::zero(); n * n];
    let mut b = vec![T::zero(); n];
    match mdp.mode() {
        Mode::Discounted { gamma } => {
            // (I - gamma P^T) rho = (1 - gamma) d0
            for s in 0..n {
                for j in 0..n {
                    let id = if s == j { T::one() } else { T::zero() };
                    a[s * n + j] = id - gamma * chain[j * n + s];
                }
                b[s] = (T::one() - gamma) * mdp.initial()[s];
            }
        }
        Mode::Average => {
            let classes = recurrent_classes(&chain, n).len();
            if classes != 1 {
                return Err(MdpError::AverageModeNotUnichain { classes });
            }
            // (P^T - I) rho = 0 with the last balance equation replaced by sum(rho) = 1.
            for s in 0..n - 1 {
                for j in 0..n {
                    let id = if s == j { T::one() } else { T::zero() };
                    a[s * n + j] = chain[j * n + s] - id;
                }
            }
            for j in 0..n {
                a[(n - 1) * n + j] = T::one();
            }
            b[n - 1] = T::one();
        }
    }
    let rho = solve_dense(a, b, T::epsilon() * T::lit(16.0)).ok_or(MdpError::SingularSystem)?;
    let na = mdp.num_actions();
    let mut values = vec![T::zero(); n * na];
    for s in 0..n {
        let mass = rho[s].max(T::zero());
        for act in 0..na {
            values[s * na + act] = mass * policy.prob(s, act);
        }
    }
    Ok(OccupancyMeasure::from_parts(n, na, mdp.mode().tag(), values))
}

/// Recovers `pi(a|s) = d(s,a) / sum_a d(s,a)`, uniform on unvisited states.
pub fn policy_of_occupancy<T: Real>(d: &OccupancyMeasure<T>) -> Policy<T> {
    let na = d.num_actions();
    let uniform = T::one() / T::from_usize_lossy(na);
    let mut probs = Vec::with_capacity(d.values.len());
    for row in d.values.chunks(na) {
        let marginal: T = row.iter().copied().sum();
        if marginal > T::lit(ZERO_MARGINAL) {
            probs.extend(row.iter().map(|&x| x.max(T::zero()) / marginal));
        } else {
            probs.extend(std::iter::repeat_n(uniform, na));
        }
    }
    Policy::new(d.num_states(), na, probs).expect("normalized rows")
}
