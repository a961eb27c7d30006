//! Two-locus genealogies: the real coupled graph against the auxiliary
//! graph, where joint coalescences become independent decoupling events.
//!
//! cargo run --example two_locus_coupling

use argscape::analytic::{aux_union_bound, prob_aux_event};
use argscape::coupling::{sample_aux_graph, sample_coupled_pair};
use argscape::RandomSource;

fn main() -> argscape::Result<()> {
    let reps = 20_000;
    for rho_u in [1.0, 5.0, 20.0] {
        let mut hits = 0;
        let mut agree = 0;
        for i in 0..reps {
            let mut rng = RandomSource::new(1, 0).derive(i);
            if sample_aux_graph(2, 0, 2, rho_u, &mut rng)?.event_iv_occurred {
                hits += 1;
            }
            let c = sample_coupled_pair(4, rho_u, &mut RandomSource::new(2, 0).derive(i))?;
            if !c.aux.event_iv_occurred && c.real.0 == c.aux.tree_0 && c.real.1 == c.aux.tree_u {
                agree += 1;
            }
        }
        println!(
            "rho u = {rho_u:>4}: P(decoupling) ~ {:.4} (exact {:.4}), union bound n=4 {:.4}, identical coupled runs {agree}",
            hits as f64 / reps as f64,
            prob_aux_event(rho_u)?,
            aux_union_bound(4, rho_u)?.value
        );
    }
    Ok(())
}
