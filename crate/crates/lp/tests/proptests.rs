use bldgres_lp::{solve, LinearProgram, LpStatus};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Optimal solutions satisfy strong duality and complementary slackness.
    #[test]
    fn optimal_solutions_certify(
        costs in prop::collection::vec(-3.0f64..3.0, 3),
        rows in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 3), -1.0f64..4.0), 1..6),
    ) {
        let mut lp = LinearProgram::new();
        for (j, &c) in costs.iter().enumerate() {
            lp.add_var(format!("x{j}"), c, -2.0, 2.0);
        }
        for (a, b) in rows {
            lp.add_le(a.into_iter().enumerate().collect(), b);
        }
        let s = solve(&lp).unwrap();
        match s.status {
            LpStatus::Optimal => {
                let rep = s.certificates(&lp);
                prop_assert!(rep.primal_infeasibility < 1e-8);
                prop_assert!(rep.dual_infeasibility < 1e-8);
                prop_assert!(rep.complementarity < 1e-7);
                prop_assert!(rep.gap_ok(1e-7));
            }
            LpStatus::Infeasible => {
                prop_assert!(s.farkas.unwrap().margin(&lp) > 0.0);
            }
            other => prop_assert!(false, "unexpected status {:?}", other),
        }
    }
}
