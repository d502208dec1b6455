use std::collections::{BTreeSet, HashMap};

use forgespark_core::cfg::{FunctionAnalysis, GoalKind};
use forgespark_core::sbst::values::{constant_pool, ValueGen};
use forgespark_core::sbst::{fitness, GoalCoverage};
use forgespark_testkit::reference::{self, Owner, RVal, Stop};
use forgespark_testkit::{generate, GenConfig};
use minilang::interp::call_function;
use minilang::{compile, Outcome};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BUDGET: u64 = 3_000;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Zero fitness exactly for covered goals, and line coverage as seen by
    /// the search agrees with the reference interpreter's trace.
    #[test]
    fn fitness_zero_iff_covered(program_seed in 0u64..5_000, value_seed in any::<u64>()) {
        let g = generate(program_seed, &GenConfig::default());
        let typed = compile(&g.source).unwrap();
        let untyped = minilang::parse(&g.source).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(value_seed);
        for name in &g.functions {
            let decl = typed.function(name).unwrap();
            let fref = typed.function_ref(name).unwrap();
            let analysis = FunctionAnalysis::new(decl).unwrap();
            let pool = constant_pool(decl);
            let gen = ValueGen { program: &typed, pool: &pool };
            let args: Vec<_> = decl.params.iter().map(|p| gen.random(&p.ty, &mut rng)).collect();
            let exec = call_function(&typed, name, args.clone(), BUDGET).unwrap();
            let by_branch: HashMap<_, _> =
                analysis.cfg.nodes.iter().filter_map(|b| b.branch.map(|br| (br, b.id))).collect();
            let cov = GoalCoverage::from_execution(&exec, fref.file, fref, &analysis, &by_branch);

            for goal in analysis.all_goals() {
                let f = fitness(&goal, &cov, &analysis);
                prop_assert!(f.branch_distance >= 0.0 && f.branch_distance < 1.0);
                prop_assert_eq!(f.combined() == 0.0, cov.covers(&goal), "{:?} {:?}", goal, f);
            }

            let rargs = args.iter().map(RVal::from_value).collect();
            let run = reference::call(&untyped, name, rargs, BUDGET);
            prop_assert_eq!(
                matches!(run.result, Err(Stop::Limit)),
                matches!(exec.outcome, Outcome::StepLimitExceeded)
            );
            let expected: BTreeSet<u32> = run
                .trace
                .iter()
                .filter(|(o, _)| *o == Owner::Function(name.clone()))
                .map(|(_, l)| *l)
                .collect();
            let seen: BTreeSet<u32> = analysis
                .line_goals()
                .into_iter()
                .filter(|goal| cov.covers(goal))
                .map(|goal| match goal { GoalKind::Line { line } => line, _ => unreachable!() })
                .collect();
            prop_assert_eq!(seen, expected);
        }
    }
}
