use ndarray::Array2;
use proptest::prelude::*;

use dmrc_core::{brute_force_assignment, max_weight_assignment, AssignmentProblem};

fn weights(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-20i32..100, r * c).prop_map(move |v| Array2::from_shape_vec((r, c), v.into_iter().map(f64::from).collect()).unwrap())
    })
}

fn with_mult(max_rows: usize, max_cols: usize) -> impl Strategy<Value = AssignmentProblem> {
    weights(max_rows, max_cols).prop_flat_map(|w| {
        let cols = w.ncols();
        prop::collection::vec(1usize..=3, cols).prop_map(move |m| AssignmentProblem::with_multiplicity(w.clone(), m))
    })
}

fn check_feasible(problem: &AssignmentProblem, pairs: &[(usize, usize)]) -> Result<(), TestCaseError> {
    let (rows, cols) = problem.weights.dim();
    let mut row_used = vec![false; rows];
    let mut col_used = vec![0; cols];
    for &(r, c) in pairs {
        prop_assert!(!row_used[r]);
        row_used[r] = true;
        col_used[c] += 1;
        prop_assert!(col_used[c] <= problem.col_multiplicity[c]);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_exhaustive_oracle(problem in with_mult(6, 6)) {
        let got = max_weight_assignment(&problem);
        let want = brute_force_assignment(&problem).unwrap();
        prop_assert_eq!(got.total_weight, want.total_weight);
        check_feasible(&problem, &got.pairs)?;
    }

    #[test]
    fn multiplicity_equals_column_copies(problem in with_mult(5, 4)) {
        let expanded_cols: Vec<usize> = problem
            .col_multiplicity
            .iter()
            .enumerate()
            .flat_map(|(c, &m)| std::iter::repeat_n(c, m))
            .collect();
        let rows = problem.weights.nrows();
        let copied = Array2::from_shape_fn((rows, expanded_cols.len()), |(r, j)| problem.weights[[r, expanded_cols[j]]]);
        let a = max_weight_assignment(&problem).total_weight;
        let b = max_weight_assignment(&AssignmentProblem::unit(copied)).total_weight;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn positive_scaling_keeps_the_argmax(w in weights(6, 6), scale in 1u32..50) {
        let base = max_weight_assignment(&AssignmentProblem::unit(w.clone()));
        let scaled = max_weight_assignment(&AssignmentProblem::unit(&w * f64::from(scale)));
        prop_assert_eq!(scaled.total_weight, base.total_weight * f64::from(scale));
    }

    #[test]
    fn transpose_has_the_same_weight(w in weights(6, 6)) {
        let a = max_weight_assignment(&AssignmentProblem::unit(w.clone())).total_weight;
        let b = max_weight_assignment(&AssignmentProblem::unit(w.t().to_owned())).total_weight;
        prop_assert_eq!(a, b);
    }
}

#[test]
fn rectangular_wide_and_tall() {
    let w = Array2::from_shape_vec((1, 4), vec![1.0, 9.0, 3.0, 9.0]).unwrap();
    let a = max_weight_assignment(&AssignmentProblem::unit(w.clone()));
    assert_eq!(a.total_weight, 9.0);
    assert_eq!(a.pairs, vec![(0, 1)]);
    let b = max_weight_assignment(&AssignmentProblem::unit(w.t().to_owned()));
    assert_eq!(b.total_weight, 9.0);
    assert_eq!(b.pairs, vec![(1, 0)]);
}
