use membrane_core::operators::DstSolver;
use std::time::Instant;

fn main() {
    for (d, n) in [(5usize, 9usize), (2, 65), (3, 33)] {
        let solver = DstSolver::new(d, n);
        let total = solver.site_count();
        let mut data: Vec<f64> = (0..total).map(|i| (i as f64 * 0.37).sin()).collect();
        let reps = 50;
        let t0 = Instant::now();
        for _ in 0..reps {
            solver.solve_in_place(&mut data);
        }
        let dt = t0.elapsed().as_secs_f64();
        let flops = 2.0 * (2 * d * total * n) as f64 * reps as f64;
        println!(
            "d={d} n={n} N={total}: {:.3} ms/solve, {:.2} GF/s",
            1000.0 * dt / reps as f64,
            flops / dt / 1e9
        );
    }
}
