use irs_robust::channel::{generate_channels, ChannelSet, Topology};
use irs_robust::conic::{self, SolveStatus, SolverOptions};
use irs_robust::lmi::LmiForm;
use irs_robust::maxrho::sdp_at;
use irs_robust::params::SystemParams;

fn status(ch: &ChannelSet, params: &SystemParams, rho: f64) -> (SolveStatus, f64) {
    let (p, scale) = sdp_at(ch, params, rho, LmiForm::Reduced, Default::default()).unwrap();
    let res = conic::solve(&p, &SolverOptions::default());
    (res.status, res.objective * scale)
}

// Raising a requirement only shrinks the feasible set, so once infeasible the
// SDP stays infeasible and the optimal power never decreases.
#[test]
fn monotone_in_budget() {
    let base = SystemParams::default();
    let ch = generate_channels(&base, &Topology::default(), 21).unwrap();
    let mut seen_infeasible = false;
    let mut last = 0.0;
    for k in 0..16 {
        let params = SystemParams { mu: base.mu * 2f64.powi(k), ..base.clone() };
        let (st, obj) = status(&ch, &params, 0.5);
        match st {
            SolveStatus::Optimal => {
                assert!(!seen_infeasible, "feasible again at mu = {}", params.mu);
                assert!(obj >= last * (1.0 - 1e-6), "power fell from {last} to {obj}");
                last = obj;
            }
            SolveStatus::Infeasible => seen_infeasible = true,
            other => panic!("mu = {}: {other:?}", params.mu),
        }
    }
    assert!(last > 0.0);
}

#[test]
fn monotone_in_snr_target() {
    let base = SystemParams::default();
    let ch = generate_channels(&base, &Topology::default(), 22).unwrap();
    let mut last = 0.0;
    for db in [0.0, 10.0, 20.0, 30.0, 40.0] {
        let params = SystemParams { gamma1_db: db, ..base.clone() };
        let (st, obj) = status(&ch, &params, 0.3);
        assert_eq!(st, SolveStatus::Optimal, "gamma1 {db} dB");
        assert!(obj >= last * (1.0 - 1e-6));
        last = obj;
    }
}

#[test]
fn full_and_reduced_agree() {
    let params = SystemParams::default();
    let ch = generate_channels(&params, &Topology::default(), 1).unwrap();
    for rho in [0.2, 0.6] {
        let solve = |form| {
            let (p, scale) = sdp_at(&ch, &params, rho, form, Default::default()).unwrap();
            let res = conic::solve(&p, &SolverOptions::default());
            assert_eq!(res.status, SolveStatus::Optimal);
            res.w.trace() * scale
        };
        let (full, reduced) = (solve(LmiForm::Full), solve(LmiForm::Reduced));
        assert!((full - reduced).abs() <= 1e-6 * full, "rho {rho}: full {full} reduced {reduced}");
    }
}
