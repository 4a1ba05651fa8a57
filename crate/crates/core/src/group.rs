//! Finite groups given by multiplication tables, *-automorphisms of M_n
//! implemented by unitary conjugation, and group actions.

use crate::algebra::{self, AlgebraBasis, AlgebraError};
use crate::linalg::{LinalgError, Operator, Tolerance};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("not a group: {axiom}")]
    NotAGroup { axiom: String },
    #[error("element index {index} out of range (order {order})")]
    ElementOutOfRange { index: usize, order: usize },
    #[error("subgroup is not closed: {reason}")]
    NotASubgroup { reason: String },
}

#[derive(Debug, Error)]
pub enum ActionError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("expected {expected} unitaries, found {found}")]
    WrongUnitaryCount { expected: usize, found: usize },
    #[error("unitaries have mixed dimensions ({left} vs {right})")]
    MixedDimensions { left: usize, right: usize },
    #[error("identity element does not act trivially (deviation {deviation:.3e})")]
    IdentityNotTrivial { deviation: f64 },
    #[error("not a homomorphism at pair ({g},{h}) (deviation {deviation:.3e})")]
    NotHomomorphism { g: usize, h: usize, deviation: f64 },
}

/// Finite group on elements `0..order` with a validated multiplication table
/// `table[g][h] = g * h`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GroupJson", into = "GroupJson")]
pub struct FiniteGroup {
    order: usize,
    table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GroupJson {
    order: usize,
    table: Vec<Vec<usize>>,
}

impl TryFrom<GroupJson> for FiniteGroup {
    type Error = GroupError;
    fn try_from(j: GroupJson) -> Result<Self, GroupError> {
        if j.table.len() != j.order {
            return Err(GroupError::NotAGroup {
                axiom: format!("table has {} rows, order is {}", j.table.len(), j.order),
            });
        }
        FiniteGroup::from_table(j.table)
    }
}

impl From<FiniteGroup> for GroupJson {
    fn from(g: FiniteGroup) -> GroupJson {
        GroupJson { order: g.order, table: g.table }
    }
}

/// Order above which associativity is spot-checked instead of exhausted.
const EXHAUSTIVE_ASSOCIATIVITY_LIMIT: usize = 64;

impl FiniteGroup {
    /// Validates a multiplication table: Latin square, two-sided identity,
    /// inverses, and associativity (exhaustive up to order 64, sampled above).
    pub fn from_table(table: Vec<Vec<usize>>) -> Result<Self, GroupError> {
        let order = table.len();
        if order == 0 {
            return Err(GroupError::NotAGroup { axiom: "empty table".into() });
        }
        for (g, row) in table.iter().enumerate() {
            if row.len() != order {
                return Err(GroupError::NotAGroup {
                    axiom: format!("row {g} has {} entries, expected {order}", row.len()),
                });
            }
            for (&x, h) in row.iter().zip(0..) {
                if x >= order {
                    return Err(GroupError::NotAGroup {
                        axiom: format!("entry ({g},{h}) = {x} out of range"),
                    });
                }
            }
        }
        for g in 0..order {
            let mut seen_row = vec![false; order];
            let mut seen_col = vec![false; order];
            for h in 0..order {
                if std::mem::replace(&mut seen_row[table[g][h]], true) {
                    return Err(GroupError::NotAGroup {
                        axiom: format!("row {g} repeats element {}", table[g][h]),
                    });
                }
                if std::mem::replace(&mut seen_col[table[h][g]], true) {
                    return Err(GroupError::NotAGroup {
                        axiom: format!("column {g} repeats element {}", table[h][g]),
                    });
                }
            }
        }
        let identity = (0..order)
            .find(|&e| (0..order).all(|g| table[e][g] == g && table[g][e] == g))
            .ok_or_else(|| GroupError::NotAGroup { axiom: "no two-sided identity".into() })?;
        let mut inverse = vec![usize::MAX; order];
        for g in 0..order {
            let inv = (0..order)
                .find(|&h| table[g][h] == identity && table[h][g] == identity)
                .ok_or_else(|| GroupError::NotAGroup {
                    axiom: format!("element {g} has no two-sided inverse"),
                })?;
            inverse[g] = inv;
        }
        let check = |a: usize, b: usize, c: usize| table[table[a][b]][c] == table[a][table[b][c]];
        if order <= EXHAUSTIVE_ASSOCIATIVITY_LIMIT {
            for a in 0..order {
                for b in 0..order {
                    for c in 0..order {
                        if !check(a, b, c) {
                            return Err(GroupError::NotAGroup {
                                axiom: format!("associativity fails at ({a},{b},{c})"),
                            });
                        }
                    }
                }
            }
        } else {
            // Deterministic sample: a small multiplicative lattice of triples.
            let step = order / 17 + 1;
            for a in (0..order).step_by(step) {
                for b in (0..order).step_by(step) {
                    for c in (0..order).step_by(step) {
                        if !check(a, b, c) {
                            return Err(GroupError::NotAGroup {
                                axiom: format!("associativity fails at ({a},{b},{c})"),
                            });
                        }
                    }
                }
            }
        }
        Ok(Self { order, table, identity, inverse })
    }

    /// Cyclic group of the given order.
    pub fn cyclic(order: usize) -> Self {
        assert!(order >= 1, "cyclic group needs order >= 1");
        let table: Vec<Vec<usize>> =
            (0..order).map(|g| (0..order).map(|h| (g + h) % order).collect()).collect();
        Self::from_table(table).expect("cyclic table is a group")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.table[g][h]
    }

    pub fn inv(&self, g: usize) -> usize {
        self.inverse[g]
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order
    }

    /// Validates that the listed elements form a subgroup.
    pub fn check_subgroup(&self, elems: &[usize]) -> Result<(), GroupError> {
        for &g in elems {
            if g >= self.order {
                return Err(GroupError::ElementOutOfRange { index: g, order: self.order });
            }
        }
        if !elems.contains(&self.identity) {
            return Err(GroupError::NotASubgroup { reason: "missing identity".into() });
        }
        for &g in elems {
            if !elems.contains(&self.inverse[g]) {
                return Err(GroupError::NotASubgroup { reason: format!("missing inverse of {g}") });
            }
            for &h in elems {
                if !elems.contains(&self.table[g][h]) {
                    return Err(GroupError::NotASubgroup {
                        reason: format!("product {g}*{h} escapes the subset"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Maximal chain of nested subgroups of a cyclic group, as element lists:
    /// {e} = H_0 < H_1 < ... < H_k = G, growing by one prime factor per step.
    /// Returns `None` if the group is not cyclic (no generator).
    pub fn cyclic_subgroup_chain(&self) -> Option<Vec<Vec<usize>>> {
        let generator = (0..self.order).find(|&g| {
            let mut x = self.identity;
            let mut count = 0;
            loop {
                x = self.table[x][g];
                count += 1;
                if x == self.identity {
                    break;
                }
            }
            count == self.order
        })?;
        let mut chain = Vec::new();
        let mut d = 1usize;
        loop {
            // Subgroup of order d generated by generator^(order/d).
            let step = self.order / d;
            let mut elems = Vec::with_capacity(d);
            let mut x = self.identity;
            loop {
                elems.push(x);
                for _ in 0..step {
                    x = self.table[x][generator];
                }
                if x == self.identity {
                    break;
                }
            }
            elems.sort_unstable();
            chain.push(elems);
            if d == self.order {
                return Some(chain);
            }
            let quotient = self.order / d;
            let p = (2..=quotient).find(|k| quotient % k == 0).unwrap_or(quotient);
            d *= p;
        }
    }
}

/// *-automorphism of M_n implemented as conjugation a -> u a u^*.
#[derive(Clone, Debug)]
pub struct StarAutomorphism {
    u: Operator,
}

impl StarAutomorphism {
    /// Wraps a unitary after validating unitarity.
    pub fn from_unitary(mut u: Operator, tol: Tolerance) -> Result<Self, LinalgError> {
        u.ensure_unitary(tol)?;
        Ok(Self { u })
    }

    pub fn identity(dim: usize) -> Self {
        Self { u: Operator::identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    pub fn unitary(&self) -> &Operator {
        &self.u
    }

    pub fn apply(&self, a: &Operator) -> Operator {
        self.u.mul(a).mul(&self.u.adjoint())
    }

    pub fn inverse(&self) -> Self {
        Self { u: self.u.adjoint() }
    }

    /// Superoperator in row-major vectorization: vec(u a u^*) = (u kron conj(u)) vec(a).
    pub fn superoperator(&self) -> Operator {
        self.u.kronecker(&self.u.conjugate())
    }
}

/// Action of a finite group on M_n by *-automorphisms, one unitary per element.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "ActionJson")]
#[serde(try_from = "ActionJson")]
pub struct GroupAction {
    group: FiniteGroup,
    maps: Vec<StarAutomorphism>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct ActionJson {
    group: FiniteGroup,
    unitaries: Vec<Operator>,
}

impl From<GroupAction> for ActionJson {
    fn from(a: GroupAction) -> ActionJson {
        ActionJson {
            group: a.group,
            unitaries: a.maps.into_iter().map(|m| m.u).collect(),
        }
    }
}

impl TryFrom<ActionJson> for GroupAction {
    type Error = ActionError;
    fn try_from(j: ActionJson) -> Result<Self, ActionError> {
        GroupAction::new(j.group, j.unitaries, Tolerance::default())
    }
}

impl GroupAction {
    /// Builds an action from one unitary per group element, verifying that the
    /// identity acts trivially and that conjugations compose along the table
    /// (unitaries may differ by phases; conjugation removes them).
    pub fn new(
        group: FiniteGroup,
        unitaries: Vec<Operator>,
        tol: Tolerance,
    ) -> Result<Self, ActionError> {
        if unitaries.len() != group.order() {
            return Err(ActionError::WrongUnitaryCount {
                expected: group.order(),
                found: unitaries.len(),
            });
        }
        let dim = unitaries[0].dim();
        let mut maps = Vec::with_capacity(unitaries.len());
        for u in unitaries {
            if u.dim() != dim {
                return Err(ActionError::MixedDimensions { left: dim, right: u.dim() });
            }
            maps.push(StarAutomorphism::from_unitary(u, tol)?);
        }
        let id_dev = conjugation_distance_to_identity(maps[group.identity()].unitary());
        if id_dev > tol.threshold(1.0) {
            return Err(ActionError::IdentityNotTrivial { deviation: id_dev });
        }
        for g in group.elements() {
            for h in group.elements() {
                let w = maps[group.mul(g, h)]
                    .unitary()
                    .adjoint()
                    .mul(maps[g].unitary())
                    .mul(maps[h].unitary());
                let deviation = conjugation_distance_to_identity(&w);
                if deviation > tol.threshold(1.0) {
                    return Err(ActionError::NotHomomorphism { g, h, deviation });
                }
            }
        }
        Ok(Self { group, maps, dim })
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn map(&self, g: usize) -> &StarAutomorphism {
        &self.maps[g]
    }

    pub fn apply(&self, g: usize, a: &Operator) -> Operator {
        self.maps[g].apply(a)
    }

    pub fn apply_inverse(&self, g: usize, a: &Operator) -> Operator {
        self.maps[self.group.inv(g)].apply(a)
    }

    /// Uniform average (1/|G|) sum_g g(x).
    pub fn mean_over_group(&self, x: &Operator) -> Operator {
        let mut acc = Operator::zeros(self.dim);
        for g in self.group.elements() {
            acc = acc.add(&self.apply(g, x));
        }
        acc.scale(Complex64::new(1.0 / self.group.order() as f64, 0.0))
    }

    /// Fixed-point algebra F(G) = { x : g(x) = x for all g } as the joint
    /// eigenspace of the conjugation superoperators.
    pub fn fixed_point_algebra(&self, tol: Tolerance) -> Result<AlgebraBasis, AlgebraError> {
        let superops: Vec<Operator> = self.maps.iter().map(|m| m.superoperator()).collect();
        algebra::joint_fixed_space(&superops, self.dim, tol)
    }
}

/// Distance from conjugation-by-`w` to the identity automorphism: the max-norm
/// distance from `w` to the nearest scalar phase multiple of the identity.
fn conjugation_distance_to_identity(w: &Operator) -> f64 {
    let n = w.dim();
    // Best phase: the normalized trace direction; conjugation by w is trivial
    // iff w is a scalar, and the scalar nearest in HS norm is tr(w)/n.
    let c = w.trace() / (n as f64);
    let phase = if c.norm() > 0.0 { c / c.norm() } else { Complex64::new(1.0, 0.0) };
    // Scale-invariant: compare against phase with unit modulus since w is unitary.
    w.sub(&Operator::identity(n).scale(phase)).max_norm()
}
