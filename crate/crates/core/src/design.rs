//! Facility-cost design.
//!
//! Stacking the B-rows of all profiles gives a 0/1 matrix `B` with one
//! column per `(facility, load)` pair. A criterion `P` is the potential of
//! some congestion game exactly when `B · ξ = P` is solvable, and then `ξ`
//! (reshaped to `m × n`) is a valid cost table. The solvers here cover the
//! full system, systems where some facilities have fixed costs, systems
//! restricted to the profiles satisfying linear load constraints, and the
//! least-squares projection onto the span of independent columns of `B`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::congestion::{CostMatrix, PayoffTable, PerfTable};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::FbsModel;

/// The stacked system `B · ξ = P`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    facilities: usize,
    players: usize,
    bmat: DMatrix<f64>,
    pvec: DVector<f64>,
}

impl DesignSystem {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.bmat
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.pvec
    }

    pub fn facilities(&self) -> usize {
        self.facilities
    }

    pub fn players(&self) -> usize {
        self.players
    }

    /// Row `k` as 0/1 integers.
    pub fn row_bits(&self, k: usize) -> Vec<u8> {
        self.bmat.row(k).iter().map(|&x| x as u8).collect()
    }
}

pub fn build_design_system(model: &FbsModel, perf: &PerfTable) -> Result<DesignSystem> {
    perf.check_against(model)?;
    let ell = model.profile_count();
    let mut bmat = DMatrix::zeros(ell, model.cost_len());
    for p in model.profiles() {
        for (c, &bit) in model.b_row(&p).bits().iter().enumerate() {
            bmat[(p.index(), c)] = f64::from(bit);
        }
    }
    Ok(DesignSystem {
        facilities: model.facilities(),
        players: model.players(),
        bmat,
        pvec: DVector::from_row_slice(perf.values()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    Exact,
    Inconsistent,
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactDesign {
    /// Minimum-norm solution over the designable facilities, merged with any fixed rows.
    pub xi: CostMatrix,
    pub rank: usize,
    /// Nullspace dimension of the solved system: how many independent
    /// directions the costs can move without changing the potential.
    pub freedom: usize,
    /// `‖B · ξ − P‖∞` of the returned solution.
    pub residual: f64,
}

/// Least-squares closest congestion game.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosestGame {
    pub xi: CostMatrix,
    /// Potential of `xi`, i.e. the projection of `P` onto the kept columns.
    pub p0: PerfTable,
    /// `‖P − P0‖∞`.
    pub epsilon_hat: f64,
    /// Columns of `B` used for the fit (0-based, flattened cost order).
    pub kept: Vec<usize>,
    pub rank: usize,
    /// `‖B0ᵀ (P − B0 ξ0)‖∞`.
    pub normal_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignOutcome {
    Exact(ExactDesign),
    Inconsistent { rank: usize, residual: f64 },
    LeastSquares(ClosestGame),
}

impl DesignOutcome {
    pub fn kind(&self) -> OutcomeKind {
        match self {
            DesignOutcome::Exact(_) => OutcomeKind::Exact,
            DesignOutcome::Inconsistent { .. } => OutcomeKind::Inconsistent,
            DesignOutcome::LeastSquares(_) => OutcomeKind::LeastSquares,
        }
    }

    pub fn xi(&self) -> Option<&CostMatrix> {
        match self {
            DesignOutcome::Exact(e) => Some(&e.xi),
            DesignOutcome::LeastSquares(g) => Some(&g.xi),
            DesignOutcome::Inconsistent { .. } => None,
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            DesignOutcome::Exact(e) => e.rank,
            DesignOutcome::Inconsistent { rank, .. } => *rank,
            DesignOutcome::LeastSquares(g) => g.rank,
        }
    }

    /// Sup-norm residual against the right-hand side that was solved.
    pub fn residual(&self) -> f64 {
        match self {
            DesignOutcome::Exact(e) => e.residual,
            DesignOutcome::Inconsistent { residual, .. } => *residual,
            DesignOutcome::LeastSquares(g) => g.epsilon_hat,
        }
    }
}

impl From<ClosestGame> for DesignOutcome {
    fn from(g: ClosestGame) -> Self {
        DesignOutcome::LeastSquares(g)
    }
}

struct Solved {
    x: DVector<f64>,
    rank: usize,
    residual: f64,
    consistent: bool,
}

fn solve_columns(mat: &DMatrix<f64>, rhs: &DVector<f64>, tol: f64) -> Solved {
    let (x, rank) = linalg::min_norm_solve(mat, rhs, tol);
    let residual = linalg::sup_norm(&(mat * &x - rhs));
    let consistent = residual <= tol * (1.0 + linalg::sup_norm(rhs));
    Solved {
        x,
        rank,
        residual,
        consistent,
    }
}

fn exact_or_inconsistent(
    solved: Solved,
    unknowns: usize,
    xi: impl FnOnce(&DVector<f64>) -> CostMatrix,
) -> DesignOutcome {
    if solved.consistent {
        DesignOutcome::Exact(ExactDesign {
            xi: xi(&solved.x),
            rank: solved.rank,
            freedom: unknowns - solved.rank,
            residual: solved.residual,
        })
    } else {
        DesignOutcome::Inconsistent {
            rank: solved.rank,
            residual: solved.residual,
        }
    }
}

/// Solves the full design system. The system counts as consistent when the
/// minimum-norm least-squares solution has `‖Bξ − P‖∞ ≤ tol · (1 + ‖P‖∞)`.
pub fn solve_exact(sys: &DesignSystem, tol: f64) -> DesignOutcome {
    let solved = solve_columns(&sys.bmat, &sys.pvec, tol);
    exact_or_inconsistent(solved, sys.bmat.ncols(), |x| {
        CostMatrix::from_flat(sys.facilities, sys.players, x.iter().copied().collect())
            .expect("solution has m·n finite entries")
    })
}

/// Designs costs for the facilities not in `fixed`, whose cost rows are
/// given (`fixed[j]` is the length-`n` row of facility `j`, 0-based).
pub fn solve_partial(
    model: &FbsModel,
    perf: &PerfTable,
    fixed: &BTreeMap<usize, Vec<f64>>,
    tol: f64,
) -> Result<DesignOutcome> {
    let n = model.players();
    let m = model.facilities();
    for (&facility, row) in fixed {
        if facility >= m {
            return Err(Error::FixedFacilityOutOfRange {
                facility,
                facilities: m,
            });
        }
        if row.len() != n {
            return Err(Error::LengthMismatch {
                what: "fixed cost row",
                expected: n,
                actual: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "fixed cost row",
            });
        }
    }
    let sys = build_design_system(model, perf)?;

    let mut fixed_cols = Vec::new();
    let mut fixed_vals = Vec::new();
    let mut free_cols = Vec::new();
    for j in 0..m {
        let cols = j * n..(j + 1) * n;
        match fixed.get(&j) {
            Some(row) => {
                fixed_cols.extend(cols);
                fixed_vals.extend_from_slice(row);
            }
            None => free_cols.extend(cols),
        }
    }

    let fixed_part = linalg::take_columns(&sys.bmat, &fixed_cols);
    let reduced_rhs = &sys.pvec - fixed_part * DVector::from_vec(fixed_vals);
    let free_part = linalg::take_columns(&sys.bmat, &free_cols);
    let solved = solve_columns(&free_part, &reduced_rhs, tol);

    Ok(exact_or_inconsistent(solved, free_cols.len(), |x| {
        let mut flat = vec![0.0; m * n];
        for (&col, &v) in free_cols.iter().zip(x.iter()) {
            flat[col] = v;
        }
        for (&j, row) in fixed {
            flat[j * n..(j + 1) * n].copy_from_slice(row);
        }
        CostMatrix::from_flat(m, n, flat).expect("merged costs are finite")
    }))
}

/// `Σ_t coeffs[t] · r_t(a) < threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub threshold: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, threshold: f64) -> Result<Self> {
        if coeffs.iter().any(|x| !x.is_finite()) || threshold.is_nan() {
            return Err(Error::NonFinite { what: "constraint" });
        }
        Ok(Constraint { coeffs, threshold })
    }

    pub fn holds(&self, loads: &[usize]) -> bool {
        let lhs: f64 = self
            .coeffs
            .iter()
            .zip(loads)
            .map(|(k, &r)| k * r as f64)
            .sum();
        lhs < self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfilePartition {
    pub desirable: Vec<usize>,
    pub undesirable: Vec<usize>,
}

impl ProfilePartition {
    pub fn is_infeasible(&self) -> bool {
        self.desirable.is_empty()
    }
}

/// Splits the profiles into those whose loads satisfy every constraint and the rest.
pub fn desirable_profiles(
    model: &FbsModel,
    constraints: &[Constraint],
) -> Result<ProfilePartition> {
    for c in constraints {
        if c.coeffs.len() != model.facilities() {
            return Err(Error::LengthMismatch {
                what: "constraint coefficients",
                expected: model.facilities(),
                actual: c.coeffs.len(),
            });
        }
    }
    let (desirable, undesirable) = (0..model.profile_count()).partition(|&k| {
        let loads = model.loads_at(k);
        constraints.iter().all(|c| c.holds(&loads))
    });
    Ok(ProfilePartition {
        desirable,
        undesirable,
    })
}

/// Penalized game used when only desirable profiles are admissible.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedGame {
    /// Designed payoffs on desirable profiles, `c_star` elsewhere.
    /// Present only when the restricted system was solvable.
    pub payoffs: Option<PayoffTable>,
    pub c_star: Option<f64>,
    /// `P` on desirable profiles, `p_star` elsewhere.
    pub perf: PerfTable,
    pub p_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedDesign {
    pub outcome: DesignOutcome,
    pub partition: ProfilePartition,
    pub penalized: PenalizedGame,
}

fn penalty(max: f64) -> f64 {
    10.0 * (1.0 + max)
}

/// Solves the design system using only the rows of desirable profiles and
/// builds the penalized payoffs and criterion. Penalty constants are
/// `10 · (1 + max |value on desirable profiles|)`.
pub fn solve_restricted(
    model: &FbsModel,
    perf: &PerfTable,
    constraints: &[Constraint],
    tol: f64,
) -> Result<RestrictedDesign> {
    let partition = desirable_profiles(model, constraints)?;
    if partition.is_infeasible() {
        return Err(Error::NoDesirableProfiles);
    }
    let sys = build_design_system(model, perf)?;
    let rows = &partition.desirable;
    let sub = DMatrix::from_fn(rows.len(), sys.bmat.ncols(), |i, j| sys.bmat[(rows[i], j)]);
    let rhs = DVector::from_fn(rows.len(), |i, _| sys.pvec[rows[i]]);
    let solved = solve_columns(&sub, &rhs, tol);
    let outcome = exact_or_inconsistent(solved, sys.bmat.ncols(), |x| {
        CostMatrix::from_flat(sys.facilities, sys.players, x.iter().copied().collect())
            .expect("solution has m·n finite entries")
    });

    let p_star = penalty(rows.iter().fold(0.0, |m, &k| m.max(perf.get(k).abs())));
    let mut desirable = vec![false; model.profile_count()];
    for &k in rows {
        desirable[k] = true;
    }
    let penalized_perf = PerfTable::new(
        (0..model.profile_count())
            .map(|k| if desirable[k] { perf.get(k) } else { p_star })
            .collect(),
    )?;

    let (payoffs, c_star) = match outcome.xi() {
        Some(xi) => {
            let base = PayoffTable::from_costs(model, xi)?;
            let c_star = penalty(
                (0..model.players())
                    .flat_map(|i| rows.iter().map(move |&k| (i, k)))
                    .fold(0.0, |m, (i, k)| m.max(base.get(k, i).abs())),
            );
            let table = (0..model.players())
                .map(|i| {
                    (0..model.profile_count())
                        .map(|k| if desirable[k] { base.get(k, i) } else { c_star })
                        .collect()
                })
                .collect();
            (Some(PayoffTable::from_rows(model, table)?), Some(c_star))
        }
        None => (None, None),
    };

    Ok(RestrictedDesign {
        outcome,
        partition,
        penalized: PenalizedGame {
            payoffs,
            c_star,
            perf: penalized_perf,
            p_star,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisColumns {
    pub b0: DMatrix<f64>,
    pub kept: Vec<usize>,
}

/// Maximal set of linearly independent columns of `B`, chosen greedily from the left.
pub fn basis_columns(sys: &DesignSystem, tol: f64) -> BasisColumns {
    let kept = linalg::select_basis_columns(&sys.bmat, tol);
    BasisColumns {
        b0: linalg::take_columns(&sys.bmat, &kept),
        kept,
    }
}

/// Least-squares closest congestion game: `ξ0 = (B0ᵀB0)⁻¹ B0ᵀ P` on the
/// kept columns and zero on the dropped ones.
pub fn least_squares_design(model: &FbsModel, perf: &PerfTable, tol: f64) -> Result<ClosestGame> {
    let sys = build_design_system(model, perf)?;
    let BasisColumns { b0, kept } = basis_columns(&sys, tol);
    let coef = linalg::normal_equations_solve(&b0, &sys.pvec)
        .unwrap_or_else(|| linalg::min_norm_solve(&b0, &sys.pvec, tol).0);

    let mut flat = vec![0.0; model.cost_len()];
    for (&c, &v) in kept.iter().zip(coef.iter()) {
        flat[c] = v;
    }
    let xi_vec = DVector::from_column_slice(&flat);
    let p0_vec = &sys.bmat * &xi_vec;
    let normal_residual = linalg::sup_norm(&(b0.transpose() * (&sys.pvec - &b0 * &coef)));
    let p0 = PerfTable::new(p0_vec.iter().copied().collect())?;
    let epsilon_hat = perf.sup_distance(&p0);

    Ok(ClosestGame {
        xi: CostMatrix::from_flat(model.facilities(), model.players(), flat)?,
        p0,
        epsilon_hat,
        rank: kept.len(),
        kept,
        normal_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congestion::fixtures::*;
    use crate::congestion::{potential, verify_potential_identity};
    use crate::model::fixtures::worked_example;

    fn table_one() -> PerfTable {
        PerfTable::new(TABLE_ONE.to_vec()).unwrap()
    }

    fn improper() -> PerfTable {
        PerfTable::new(IMPROPER_PERF.to_vec()).unwrap()
    }

    #[test]
    fn trivial_systems() {
        let single = FbsModel::new(1, vec![vec![vec![0]]]).unwrap();
        let sys = build_design_system(&single, &PerfTable::new(vec![1.0]).unwrap()).unwrap();
        assert_eq!(sys.row_bits(0), vec![1]);

        let shared = FbsModel::new(1, vec![vec![vec![0]], vec![vec![0]]]).unwrap();
        let sys = build_design_system(&shared, &PerfTable::new(vec![3.0]).unwrap()).unwrap();
        assert_eq!(sys.matrix().nrows(), 1);
        assert_eq!(sys.row_bits(0), vec![1, 1]);

        assert!(build_design_system(&shared, &PerfTable::new(vec![]).unwrap()).is_err());
    }

    #[test]
    fn table_one_is_exact() {
        let model = worked_example();
        let sys = build_design_system(&model, &table_one()).unwrap();
        let out = solve_exact(&sys, 1e-9);
        let DesignOutcome::Exact(e) = &out else {
            panic!("expected exact, got {out:?}");
        };
        assert_eq!(e.rank, 12);
        assert_eq!(e.freedom, 3);
        let r = verify_potential_identity(&model, &e.xi, &table_one(), 1e-8).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn zero_criterion_gives_zero_costs() {
        let model = worked_example();
        let sys = build_design_system(&model, &PerfTable::new(vec![0.0; 18]).unwrap()).unwrap();
        let out = solve_exact(&sys, 1e-9);
        assert_eq!(out.kind(), OutcomeKind::Exact);
        assert!(out.xi().unwrap().flat().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn improper_criterion_is_inconsistent() {
        let model = worked_example();
        let sys = build_design_system(&model, &improper()).unwrap();
        let out = solve_exact(&sys, 1e-9);
        assert_eq!(out.kind(), OutcomeKind::Inconsistent);
        assert_eq!(out.rank(), 12);
        assert!(out.residual() > 0.5);
    }

    #[test]
    fn partial_with_nothing_fixed_matches_exact() {
        let model = worked_example();
        for perf in [table_one(), improper()] {
            let full = solve_exact(&build_design_system(&model, &perf).unwrap(), 1e-9);
            let part = solve_partial(&model, &perf, &BTreeMap::new(), 1e-9).unwrap();
            assert_eq!(full.kind(), part.kind());
            assert!((full.residual() - part.residual()).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_with_everything_fixed() {
        let model = worked_example();
        let xi = costs(&DESIGNED_COSTS);
        let fixed: BTreeMap<_, _> = (0..5).map(|j| (j, xi.row(j).to_vec())).collect();
        let out = solve_partial(&model, &table_one(), &fixed, 1e-9).unwrap();
        let DesignOutcome::Exact(e) = out else {
            panic!("expected exact");
        };
        assert_eq!(e.freedom, 0);
        assert_eq!(e.residual, 0.0);
        assert_eq!(e.xi, xi);
    }

    #[test]
    fn partial_with_first_facility_fixed() {
        let model = worked_example();
        let fixed = BTreeMap::from([(0, vec![11.0, 2.0, 4.0])]);
        let out = solve_partial(&model, &table_one(), &fixed, 1e-9).unwrap();
        let xi = out.xi().expect("exact").clone();
        assert_eq!(xi.row(0), &[11.0, 2.0, 4.0]);
        assert!(
            verify_potential_identity(&model, &xi, &table_one(), 1e-8)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn partial_rejects_bad_keys() {
        let model = worked_example();
        let bad_key = BTreeMap::from([(5, vec![0.0; 3])]);
        assert!(matches!(
            solve_partial(&model, &table_one(), &bad_key, 1e-9),
            Err(Error::FixedFacilityOutOfRange { .. })
        ));
        let bad_len = BTreeMap::from([(0, vec![0.0; 2])]);
        assert!(matches!(
            solve_partial(&model, &table_one(), &bad_len, 1e-9),
            Err(Error::LengthMismatch { .. })
        ));
    }

    fn first_facility_below_three() -> Constraint {
        Constraint::new(vec![1.0, 0.0, 0.0, 0.0, 0.0], 3.0).unwrap()
    }

    #[test]
    fn desirable_profile_partitions() {
        let model = worked_example();
        let all = desirable_profiles(&model, &[]).unwrap();
        assert_eq!(all.desirable.len(), 18);
        assert!(all.undesirable.is_empty());

        let part = desirable_profiles(&model, &[first_facility_below_three()]).unwrap();
        assert_eq!(part.undesirable, vec![0]);
        assert_eq!(part.desirable, (1..18).collect::<Vec<_>>());

        let none =
            desirable_profiles(&model, &[Constraint::new(vec![0.0; 5], 0.0).unwrap()]).unwrap();
        assert!(none.is_infeasible());
        assert_eq!(
            solve_restricted(
                &model,
                &table_one(),
                &[Constraint::new(vec![0.0; 5], 0.0).unwrap()],
                1e-9
            ),
            Err(Error::NoDesirableProfiles)
        );
    }

    #[test]
    fn restricted_without_constraints_matches_exact() {
        let model = worked_example();
        let r = solve_restricted(&model, &table_one(), &[], 1e-9).unwrap();
        let full = solve_exact(&build_design_system(&model, &table_one()).unwrap(), 1e-9);
        assert_eq!(r.outcome, full);
        assert_eq!(r.penalized.perf, table_one());
    }

    #[test]
    fn restricted_reproduces_criterion_on_desirable_profiles() {
        let model = worked_example();
        let r =
            solve_restricted(&model, &table_one(), &[first_facility_below_three()], 1e-9).unwrap();
        let xi = r.outcome.xi().expect("exact");
        for &k in &r.partition.desirable {
            let p = model.profile(k).unwrap();
            assert!((potential(&model, xi, &p).unwrap() - TABLE_ONE[k]).abs() < 1e-9);
        }
        assert_eq!(r.penalized.p_star, 10.0 * (1.0 + 33.0));
        assert_eq!(r.penalized.perf.get(0), r.penalized.p_star);
        let pay = r.penalized.payoffs.as_ref().unwrap();
        assert_eq!(pay.get(0, 1), r.penalized.c_star.unwrap());

        let omega_min = r
            .partition
            .desirable
            .iter()
            .map(|&k| TABLE_ONE[k])
            .fold(f64::INFINITY, f64::min);
        let expected: Vec<usize> = r
            .partition
            .desirable
            .iter()
            .copied()
            .filter(|&k| TABLE_ONE[k] == omega_min)
            .collect();
        assert_eq!(r.penalized.perf.argmin(), expected);
    }

    #[test]
    fn basis_of_worked_example_drops_last_facility() {
        let model = worked_example();
        let sys = build_design_system(&model, &table_one()).unwrap();
        let b = basis_columns(&sys, 1e-9);
        assert_eq!(b.kept, (0..12).collect::<Vec<_>>());
        assert_eq!(b.b0.ncols(), 12);
    }

    #[test]
    fn closest_game_of_consistent_criterion_is_itself() {
        let model = worked_example();
        let g = least_squares_design(&model, &table_one(), 1e-9).unwrap();
        assert!(g.epsilon_hat < 1e-9);
        for (a, b) in g.p0.values().iter().zip(TABLE_ONE) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn closest_game_of_improper_criterion() {
        let model = worked_example();
        let g = least_squares_design(&model, &improper(), 1e-9).unwrap();
        assert!((g.epsilon_hat - 0.8315).abs() < 1e-3);
        assert!(g.normal_residual < 1e-9 * (1.0 + 32.0));
        assert_eq!(&g.xi.flat()[12..], &[0.0, 0.0, 0.0]);
    }
}
