use margin_eq::*;

fn main() {
    let params = EconomyParams::baseline();
    let pair = [
        AgentSpec::constrained(1.1, 1.2).unwrap(),
        AgentSpec::constrained(5.0, 1.2).unwrap(),
    ];
    for p in [24usize, 48, 96, 192] {
        let problem = EdgeProblem {
            pair,
            passengers: vec![],
            p,
            params,
            opts: SolverOptions { tol_outer: 1e-9, ..Default::default() },
        };
        let t0 = std::time::Instant::now();
        let sol = solve_edge(&problem).unwrap();
        let gap0 = sol.v[0][1] - sol.v[0][0];
        let gap1 = sol.v[1][1] - sol.v[1][0];
        // V at fixed w=0.25 for cross-P comparison
        let idx = p / 4;
        println!(
            "P={:>3} steps={:>5} {:>6.2?} gapV0(h)={:.5} gapV1(h)={:.5} V0(0.25)={:.8} V1(0.25)={:.8} resid={:.2e}",
            p, sol.report.steps, t0.elapsed(), gap0, gap1, sol.v[0][idx], sol.v[1][idx], sol.report.final_residual
        );
    }
}
