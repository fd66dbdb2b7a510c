//! Skill-discovery objective over `Z` per-skill occupancies.
//!
//! With prior `p`, per-skill state marginals `d^z` and mixture
//! `m = sum_k p(k) d^k`, the objective is the mutual information
//! `I(z; s) = sum_z p(z) KL(d^z || m)`, equivalently
//! `E_{z, s ~ d^z}[log p(z|s) - log p(z)]` with `p(z|s) = p(z) d^z(s) / m(s)`.

use rand::Rng;

use super::{ConvexObjective, ObjectiveError, LOG_FLOOR};
use crate::scalar::Real;

/// Mixture mass below which a visited state is reported as unsupported.
pub const MIXTURE_FLOOR: f64 = 1e-12;

/// Prior plus per-skill state marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillSet<T> {
    prior: Vec<T>,
    marginals: Vec<Vec<T>>,
}

fn is_distribution<T: Real>(v: &[T]) -> bool {
    let sum: T = v.iter().copied().sum();
    v.iter().all(|&x| x >= T::zero()) && (sum - T::one()).abs() <= T::tol(1e-9)
}

impl<T: Real> SkillSet<T> {
    /// The prior must be strictly positive.
    pub fn new(prior: Vec<T>, marginals: Vec<Vec<T>>) -> Result<Self, ObjectiveError> {
        if prior.is_empty() || !is_distribution(&prior) || prior.iter().any(|&p| p <= T::zero()) {
            return Err(ObjectiveError::InvalidPrior);
        }
        if marginals.len() != prior.len() {
            return Err(ObjectiveError::DimensionMismatch {
                expected: prior.len(),
                got: marginals.len(),
            });
        }
        let n = marginals[0].len();
        for m in &marginals {
            if m.len() != n {
                return Err(ObjectiveError::DimensionMismatch { expected: n, got: m.len() });
            }
            if !is_distribution(m) {
                return Err(ObjectiveError::InvalidPrior);
            }
        }
        Ok(Self { prior, marginals })
    }

    /// Prior `u_i / sum_j u_j` with `u_i ~ U(0, 1)`.
    pub fn random_prior<R: Rng + ?Sized>(num_skills: usize, rng: &mut R) -> Vec<T> {
        let u: Vec<f64> = (0..num_skills).map(|_| rng.random::<f64>().max(f64::MIN_POSITIVE)).collect();
        let total: f64 = u.iter().sum();
        u.iter().map(|&x| T::lit(x / total)).collect()
    }

    pub fn uniform_prior(num_skills: usize) -> Vec<T> {
        vec![T::one() / T::from_usize_lossy(num_skills); num_skills]
    }

    pub fn prior(&self) -> &[T] {
        &self.prior
    }

    pub fn marginals(&self) -> &[Vec<T>] {
        &self.marginals
    }

    pub fn num_skills(&self) -> usize {
        self.prior.len()
    }

    pub fn num_states(&self) -> usize {
        self.marginals[0].len()
    }

    pub fn mixture(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.num_states()];
        for (p, dz) in self.prior.iter().zip(&self.marginals) {
            for (mi, &x) in m.iter_mut().zip(dz) {
                *mi += *p * x;
            }
        }
        m
    }

    /// `p(z | s)` for every skill, row-major `Z x S`. Unvisited states get the prior.
    pub fn posterior(&self) -> Result<Vec<Vec<T>>, ObjectiveError> {
        let m = self.mixture();
        let floor = T::lit(MIXTURE_FLOOR);
        let mut post = Vec::with_capacity(self.num_skills());
        for (p, dz) in self.prior.iter().zip(&self.marginals) {
            let mut row = Vec::with_capacity(self.num_states());
            for (s, (&x, &ms)) in dz.iter().zip(&m).enumerate() {
                if ms > floor {
                    row.push(*p * x / ms);
                } else if x > T::zero() {
                    return Err(ObjectiveError::ZeroMixtureState { state: s });
                } else {
                    row.push(*p);
                }
            }
            post.push(row);
        }
        Ok(post)
    }

    /// `sum_z p(z) KL(d^z || m)`.
    pub fn value_kl(&self) -> T {
        let m = self.mixture();
        let mut total = T::zero();
        for (p, dz) in self.prior.iter().zip(&self.marginals) {
            let kl: T = dz
                .iter()
                .zip(&m)
                .filter(|(&x, _)| x > T::zero())
                .map(|(&x, &ms)| x * (x / ms).ln())
                .sum();
            total += *p * kl;
        }
        total
    }

    /// `sum_z p(z) sum_s d^z(s) (log p(z|s) - log p(z))`.
    pub fn value_posterior(&self) -> Result<T, ObjectiveError> {
        let post = self.posterior()?;
        let mut total = T::zero();
        for ((p, dz), pz) in self.prior.iter().zip(&self.marginals).zip(&post) {
            let lp = p.ln();
            let inner: T = dz
                .iter()
                .zip(pz)
                .filter(|(&x, _)| x > T::zero())
                .map(|(&x, &q)| x * (q.ln() - lp))
                .sum();
            total += *p * inner;
        }
        Ok(total)
    }

    /// `sum_z p(z) (1 - p(z|s))` per state.
    pub fn correction_expectation(&self) -> Result<Vec<T>, ObjectiveError> {
        let post = self.posterior()?;
        Ok((0..self.num_states())
            .map(|s| {
                self.prior.iter().zip(&post).map(|(&p, q)| p * (T::one() - q[s])).sum()
            })
            .collect())
    }
}

/// Which per-skill reward the objective hands to the cost player.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillVariant {
    /// `log p(z|s) - log p(z)`.
    Mi,
    /// `log p(z|s) - log p(z) + 1 - p(z|s)`, the derivative of `KL(d^z || m)` in `d^z`.
    Full,
    /// `log p(z|s) - log p(z) - p(z|s)`.
    NoConst,
    /// `p(z) (log p(z|s) - log p(z))`, the derivative of the weighted sum.
    Exact,
}

/// Mutual information over `Z` stacked occupancies of an `S x A` MDP,
/// layout `[z][s][a]`.
#[derive(Debug, Clone)]
pub struct SkillObjective<T> {
    prior: Vec<T>,
    num_states: usize,
    num_actions: usize,
    variant: SkillVariant,
    maximize: bool,
    bound: T,
}

/// With `maximize`, the objective is `-I(z; s)` and is not convex.
pub fn diayn_objective<T: Real>(
    prior: Vec<T>,
    num_states: usize,
    num_actions: usize,
    variant: SkillVariant,
    maximize: bool,
) -> Result<SkillObjective<T>, ObjectiveError> {
    if prior.is_empty() || !is_distribution(&prior) || prior.iter().any(|&p| p <= T::zero()) {
        return Err(ObjectiveError::InvalidPrior);
    }
    let p_min = prior.iter().fold(T::one(), |m, &p| m.min(p));
    let bound = -T::lit(LOG_FLOOR).ln() - p_min.ln() + T::one();
    Ok(SkillObjective { prior, num_states, num_actions, variant, maximize, bound })
}

impl<T: Real> SkillObjective<T> {
    pub fn variant(&self) -> SkillVariant {
        self.variant
    }

    pub fn prior(&self) -> &[T] {
        &self.prior
    }

    fn block(&self) -> usize {
        self.num_states * self.num_actions
    }

    /// Per-skill state marginals of a stacked occupancy vector.
    pub fn skill_set(&self, d: &[T]) -> Result<SkillSet<T>, ObjectiveError> {
        let expected = self.prior.len() * self.block();
        if d.len() != expected {
            return Err(ObjectiveError::DimensionMismatch { expected, got: d.len() });
        }
        let marginals =
            d.chunks(self.block())
                .map(|dz| dz.chunks(self.num_actions).map(|r| r.iter().copied().sum()).collect())
                .collect();
        SkillSet::new(self.prior.clone(), marginals)
    }

    /// `I(z; s)` in nats.
    pub fn mutual_information(&self, d: &[T]) -> T {
        self.skill_set(d).map(|set| set.value_kl()).unwrap_or_else(|_| T::nan())
    }

    /// Per-skill state rewards `r_z(s)` of the configured variant, before any sign flip.
    pub fn skill_rewards(&self, d: &[T]) -> Result<Vec<Vec<T>>, ObjectiveError> {
        let set = self.skill_set(d)?;
        let post = set.posterior()?;
        let floor = T::lit(LOG_FLOOR);
        Ok(post
            .iter()
            .zip(&self.prior)
            .map(|(pz, &p)| {
                let lp = p.ln();
                pz.iter()
                    .map(|&q| {
                        let mi = q.max(floor).ln() - lp;
                        match self.variant {
                            SkillVariant::Mi => mi,
                            SkillVariant::Full => mi + T::one() - q,
                            SkillVariant::NoConst => mi - q,
                            SkillVariant::Exact => p * mi,
                        }
                    })
                    .collect()
            })
            .collect())
    }
}

impl<T: Real> ConvexObjective<T> for SkillObjective<T> {
    fn name(&self) -> &str {
        "diayn"
    }

    fn value(&self, d: &[T]) -> T {
        let mi = self.mutual_information(d);
        if self.maximize {
            -mi
        } else {
            mi
        }
    }

    fn gradient(&self, d: &[T]) -> Option<Vec<T>> {
        let rewards = self.skill_rewards(d).ok()?;
        let sign = if self.maximize { -T::one() } else { T::one() };
        let mut g = Vec::with_capacity(d.len());
        for rz in &rewards {
            for &r in rz {
                g.extend(std::iter::repeat_n(sign * r, self.num_actions));
            }
        }
        Some(g)
    }

    fn grad_bound(&self) -> T {
        self.bound
    }

    fn is_convex(&self) -> bool {
        !self.maximize
    }

    fn blocks(&self) -> usize {
        self.prior.len()
    }
}
