//! The native interior-point solver against objectives computed by two
//! independent solvers (Clarabel and CVXOPT via cvxpy) on the SDPA exports in
//! `tests/fixtures`. Regenerate with `scripts/sdpa_reference.py`.

use std::path::Path;

use irs_robust::conic::{self, SolveStatus, SolverOptions};
use irs_robust::harness::Config;
use irs_robust::lmi::LmiForm;
use irs_robust::maxrho::sdp_at;

struct Case {
    config: &'static str,
    seed: Option<u64>,
    rho: f64,
    form: LmiForm,
    fixture: &'static str,
    clarabel: f64,
    cvxopt: f64,
}

const CASES: [Case; 3] = [
    Case {
        config: "../../configs/default.json",
        seed: Some(1),
        rho: 0.3,
        form: LmiForm::Full,
        fixture: "default_s1_r03_full.dat-s",
        clarabel: 9.437743605429e-01,
        cvxopt: 9.437742750326e-01,
    },
    Case {
        config: "../../configs/default.json",
        seed: Some(2),
        rho: 0.7,
        form: LmiForm::Reduced,
        fixture: "default_s2_r07_reduced.dat-s",
        clarabel: 8.891147961596e-01,
        cvxopt: 8.891148584379e-01,
    },
    Case {
        config: "tests/fixtures/m3n8.json",
        seed: None,
        rho: 0.5,
        form: LmiForm::Full,
        fixture: "m3n8_r05_full.dat-s",
        clarabel: 1.150182015233e+00,
        cvxopt: 1.150181883124e+00,
    },
];

fn problem(case: &Case) -> irs_robust::lmi::ConicProblem {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let cfg = Config::load(&root.join(case.config)).unwrap();
    let seed = case.seed.unwrap_or(cfg.system.seed);
    let ch = irs_robust::channel::generate_channels(&cfg.system, &cfg.topology, seed).unwrap();
    sdp_at(&ch, &cfg.system, case.rho, case.form, cfg.algorithm.align).unwrap().0
}

// Header lines: dimension, block count, block sizes.
fn header(sdpa: &str) -> Vec<String> {
    sdpa.lines().filter(|l| !l.starts_with('"')).take(3).map(|l| l.trim().to_string()).collect()
}

#[test]
fn objective_matches_external_solvers() {
    for case in &CASES {
        let p = problem(case);
        let res = conic::solve(&p, &SolverOptions::default());
        assert_eq!(res.status, SolveStatus::Optimal, "{}", case.fixture);
        for (name, reference) in [("clarabel", case.clarabel), ("cvxopt", case.cvxopt)] {
            let rel = (res.objective - reference).abs() / reference.abs();
            assert!(rel < 1e-6, "{} vs {name}: {} vs {reference} (rel {rel:.2e})", case.fixture, res.objective);
        }
    }
}

#[test]
fn export_matches_fixture_shape() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    for case in &CASES {
        let exported = conic::to_sdpa(&problem(case));
        let frozen = std::fs::read_to_string(dir.join(case.fixture)).unwrap();
        assert_eq!(header(&exported), header(&frozen), "{}", case.fixture);
        assert_eq!(exported.lines().count(), frozen.lines().count(), "{}", case.fixture);
    }
}
