//! Distances between two trees of one ARG: d_aux, Gromov-Hausdorff bounds,
//! the exact Gromov-TV distance, and TV / Prohorov on a fixed metric.
//!
//! cargo run --example tree_distances

use argscape::arg::fixtures::one_mark_fixture;
use argscape::metrics::{d_aux, gh_bounds, gtv_exact, prohorov_distance, total_variation, CoupledTreePair};
use argscape::{newick, sample_kingman, RandomSource};

fn main() -> argscape::Result<()> {
    let arg = one_mark_fixture();
    let leaves = arg.all_leaves();
    let pair = CoupledTreePair::new(&arg, &leaves, 0.2, 0.8)?;
    println!("T_u = {}", newick::encode(&pair.tree_u));
    println!("T_v = {}", newick::encode(&pair.tree_v));
    let gh = gh_bounds(&pair);
    println!("d_aux = {}", d_aux(&pair));
    println!("gtv   = {}", gtv_exact(&pair.tree_u.to_mm_space(), &pair.tree_v.to_mm_space())?);
    println!("GH in [{}, {}]", gh.lower, gh.upper);

    let mut rng = RandomSource::new(5, 0);
    let t = sample_kingman(5, &mut rng)?;
    let d = t.distance_matrix();
    let mu = [0.4, 0.1, 0.1, 0.2, 0.2];
    let nu = [0.2, 0.2, 0.2, 0.2, 0.2];
    println!("TV = {:.4}, Prohorov = {:.4}", total_variation(&mu, &nu)?, prohorov_distance(&mu, &nu, &d)?);
    Ok(())
}
