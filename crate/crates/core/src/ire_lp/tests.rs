use super::*;
use microlp::{ComparisonOp, OptimizationDirection, Problem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

fn raw_lp(rows: Vec<(Sense, BigRational)>, columns: Vec<Vec<(u32, i8)>>, objective: Vec<i8>) -> LpProblem {
    let model = WindowModel::new(1, BaseSpec::Empty, Decoration::Identity).unwrap();
    let rows = rows.into_iter().enumerate().map(|(i, (sense, rhs))| Row { kind: RowKind::Reduct(i as u64), sense, rhs }).collect();
    let cells = (0..columns.len() as u64).map(|d| Cell { base: 0, deco: d }).collect();
    LpProblem::from_parts(model, HardConstraints::default(), cells, rows, columns, objective)
}

#[test]
fn single_variable() {
    let lp = raw_lp(vec![(Sense::Eq, q(1, 1))], vec![vec![(0, 1)]], vec![]);
    let c = solve(&lp).unwrap();
    assert_eq!(c, Certificate::Feasible { x: vec![(0, q(1, 1))] });

    let lp = raw_lp(vec![(Sense::Eq, q(-1, 1))], vec![vec![(0, 1)]], vec![]);
    let c = solve(&lp).unwrap();
    let Certificate::Infeasible { y } = &c else { panic!("expected Farkas vector, got {c:?}") };
    assert!(y[0].is_negative());
    verify(&lp, &c).unwrap();
}

#[test]
fn tampered_certificates_are_rejected() {
    let lp = raw_lp(vec![(Sense::Eq, q(1, 1))], vec![vec![(0, 1)]], vec![1]);
    let good = solve(&lp).unwrap();
    verify(&lp, &good).unwrap();
    assert_eq!(good.value(), Some(&q(1, 1)));
    assert!(verify(&lp, &Certificate::Feasible { x: vec![(0, q(1, 2))] }).is_err());
    assert!(verify(&lp, &Certificate::Optimal { x: vec![(0, q(1, 1))], y: vec![q(1, 2)], value: q(1, 1) }).is_err());
    assert!(verify(&lp, &Certificate::Infeasible { y: vec![q(1, 1)] }).is_err());
}

/// A transportation problem with random integer supplies and demands and
/// random per-route caps, so some instances are infeasible.
fn transportation(rng: &mut ChaCha8Rng) -> (LpProblem, Vec<Vec<(usize, f64)>>, Vec<(ComparisonOp, f64)>) {
    let (m, k) = (rng.gen_range(1..4), rng.gen_range(1..4));
    let supply: Vec<i64> = (0..m).map(|_| rng.gen_range(0..6)).collect();
    let mut demand: Vec<i64> = (0..k).map(|_| rng.gen_range(0..6)).collect();
    if rng.gen_bool(0.6) {
        let gap = supply.iter().sum::<i64>() - demand.iter().sum::<i64>();
        demand[0] += gap.max(-demand[0]);
    }
    let mut rows = Vec::new();
    rows.extend(supply.iter().map(|s| (Sense::Eq, q(*s, 1))));
    rows.extend(demand.iter().map(|d| (Sense::Eq, q(*d, 1))));
    let mut columns = Vec::new();
    for i in 0..m {
        for j in 0..k {
            columns.push(vec![(i as u32, 1), ((m + j) as u32, 1)]);
        }
    }
    for route in 0..m * k {
        if rng.gen_bool(0.3) {
            let cap = rng.gen_range(0..3);
            columns[route].push((rows.len() as u32, 1));
            rows.push((Sense::Le, q(cap, 1)));
        }
    }
    let mut by_row = vec![Vec::new(); rows.len()];
    for (j, col) in columns.iter().enumerate() {
        for (i, a) in col {
            by_row[*i as usize].push((j, *a as f64));
        }
    }
    let senses = rows
        .iter()
        .map(|(s, b)| (if *s == Sense::Eq { ComparisonOp::Eq } else { ComparisonOp::Le }, ratio_f64(b)))
        .collect();
    (raw_lp(rows, columns, vec![]), by_row, senses)
}

#[test]
fn transportation_matches_float_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut feasible, mut infeasible) = (0, 0);
    for _ in 0..300 {
        let (lp, by_row, senses) = transportation(&mut rng);
        let mut reference = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..lp.num_cols()).map(|_| reference.add_var(0.0, (0.0, f64::INFINITY))).collect();
        for (row, (op, rhs)) in by_row.iter().zip(senses) {
            reference.add_constraint(row.iter().map(|(j, a)| (vars[*j], *a)).collect::<Vec<_>>(), op, rhs);
        }
        let expected = reference.solve().is_ok();
        let cert = solve_exact(&lp).unwrap();
        verify(&lp, &cert).unwrap();
        assert_eq!(cert.is_feasible(), expected);
        if expected {
            feasible += 1;
        } else {
            infeasible += 1;
        }
    }
    assert!(feasible > 50 && infeasible > 50, "{feasible} / {infeasible}");
}

#[test]
fn trivial_decoration_is_feasible() {
    for base in [BaseSpec::Empty, BaseSpec::IidMarks { p: q(1, 3) }, BaseSpec::IidPairs { p: q(1, 2) }] {
        for n in 1..=4 {
            let model = WindowModel::new(n, base.clone(), Decoration::Identity).unwrap();
            let lp = build_lp(&model, &HardConstraints::default(), false).unwrap();
            let cert = solve(&lp).unwrap();
            assert!(cert.is_feasible(), "{base:?} n={n}");
            let own = PatternDistribution::base_only(n, base.clone());
            own.check().unwrap();
            verify(&lp, &own.to_certificate(&lp).unwrap()).unwrap();
        }
    }
}

#[test]
fn linearization_of_the_empty_order() {
    for n in 1..=6 {
        let deco = Decoration::for_problem(&ProblemSpec::Linearization).unwrap();
        let model = WindowModel::new(n, BaseSpec::Empty, deco).unwrap();
        let lp = build_lp(&model, &HardConstraints::default(), false).unwrap();
        let cert = solve(&lp).unwrap();
        assert!(cert.is_feasible(), "n={n}");
        PatternDistribution::from_certificate(&lp, &cert).unwrap().check().unwrap();

        let uniform = PatternDistribution::uniform_orders(n);
        uniform.check().unwrap();
        verify(&lp, &uniform.to_certificate(&lp).unwrap()).unwrap();
    }
}

#[test]
fn marked_pairs_pass_the_distribution_check_only_when_shift_consistent() {
    let model = WindowModel::new(2, BaseSpec::Empty, Decoration::MarkedSet).unwrap();
    let w = |pairs: &[(u64, i64)]| PatternDistribution {
        model: model.clone(),
        weights: pairs.iter().map(|(d, k)| (Cell { base: 0, deco: *d }, q(*k, 4))).collect(),
    };
    // Alternating marks: {0} and {1} each with probability ½.
    w(&[(1, 2), (2, 2)]).check().unwrap();
    // Marks only on the left of the window are not shift consistent.
    assert!(w(&[(1, 4)]).check().is_err());
    assert!(w(&[(1, 2), (2, 1)]).check().is_err());
}

#[test]
fn density_curve() {
    let half = q(1, 2);
    let mut last = q(1, 1);
    for n in 1..=5 {
        let r = max_marked_density(&half, n).unwrap();
        verify(&r.lp, &r.certificate).unwrap();
        let bound = expected_max_homogeneous(&half, n).unwrap() / q(n as i64, 1);
        assert!(r.delta <= bound, "n={n}");
        assert!(r.delta <= last, "n={n}");
        if n <= 2 {
            assert_eq!(r.delta, q(1, 1));
        }
        last = r.delta;
    }
    assert_eq!(last, q(1597, 2560));
}

#[test]
fn expected_largest_homogeneous_set() {
    let half = q(1, 2);
    assert_eq!(expected_max_homogeneous(&half, 1).unwrap(), q(1, 1));
    assert_eq!(expected_max_homogeneous(&half, 2).unwrap(), q(2, 1));
    // Three pairs: monochromatic with probability ¼, else the largest set has size 2.
    assert_eq!(expected_max_homogeneous(&half, 3).unwrap(), q(9, 4));
    // With p = 1 every set is homogeneous.
    assert_eq!(expected_max_homogeneous(&q(1, 1), 4).unwrap(), q(4, 1));
}

#[test]
fn ramsey_density_obstruction_at_six() {
    let (lp, cert) = density_obstruction(&q(1, 2), &q(9, 10), 6, true).unwrap();
    assert_eq!(lp.model.n, 6);
    assert!(lp.hard.nonempty);
    assert!(matches!(cert, Certificate::Infeasible { .. }));
    verify(&lp, &cert).unwrap();
}

#[test]
fn density_obstruction_needs_a_small_enough_density() {
    // δ*(3) = 3/4, so 3/4 stays feasible on three windows.
    assert!(density_obstruction(&q(1, 2), &q(3, 4), 3, false).is_err());
    assert!(density_obstruction(&q(1, 2), &q(4, 5), 3, false).is_ok());
}

fn any_model() -> impl Strategy<Value = WindowModel> {
    (2usize..7, 0..4).prop_map(|(n, kind)| match kind {
        0 => WindowModel::new(n, BaseSpec::Empty, Decoration::LinearOrder).unwrap(),
        1 => WindowModel::new(n, BaseSpec::IidMarks { p: q(1, 2) }, Decoration::Identity).unwrap(),
        2 => WindowModel::new(n, BaseSpec::IidPairs { p: q(1, 2) }, Decoration::MarkedSet).unwrap(),
        _ => WindowModel::new(n, BaseSpec::Empty, Decoration::MarkedSet).unwrap(),
    })
}

proptest! {
    #[test]
    fn restrictions_commute(model in any_model(), pick in any::<prop::sample::Index>()) {
        let cells = model.cells(&HardConstraints::default()).unwrap();
        let c = cells[pick.index(cells.len())];
        let small = model.shrink().unwrap();
        let all_small = small.cells(&HardConstraints::default()).unwrap();
        prop_assert!(all_small.contains(&model.left(c)));
        prop_assert!(all_small.contains(&model.right(c)));
        if small.shrink().is_some() {
            prop_assert_eq!(small.left(model.right(c)), small.right(model.left(c)));
        }
    }
}
