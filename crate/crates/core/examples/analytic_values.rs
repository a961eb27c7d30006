//! Closed-form two-locus probabilities, the linear systems they solve, and
//! the mixing bound.
//!
//! cargo run --example analytic_values

use argscape::analytic::*;

fn main() -> argscape::Result<()> {
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "rho v", "cross", "same", "aux", "bound n=2");
    for rv in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let arg = solve_first_event_system(FirstEventSystem { variant: SystemVariant::Arg, rho_distance: rv })?;
        assert!((arg.x - prob_equal_cross_pair(rv)?).abs() < 1e-12);
        let b = if rv > 0.0 { format!("{:.5}", mixing_bound(2, rv)?.value) } else { "-".into() };
        println!(
            "{rv:>6} {:>10.5} {:>10.5} {:>10.5} {b:>10}",
            arg.x,
            arg.z,
            prob_aux_event(rv)?
        );
    }
    println!("E[H^2] for n = 10: {:.5}", height_second_moment(10)?);
    println!("limit {:.5}, crude bound {:.5}", height_second_moment_limit(), height_second_moment_crude_bound());
    let t = tightness_rhs(1.0, 0.1, Some(20))?;
    println!("tightness rhs at h = 0.1, n = 20: {:.5} (printed form {:.5})", t.corrected, t.printed);
    Ok(())
}
