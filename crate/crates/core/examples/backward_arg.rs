//! Sample an ARG backward in time and read marginal trees off it.
//!
//! cargo run --example backward_arg -- [seed]

use argscape::{arg::sample_arg, newick, RandomSource};

fn main() -> argscape::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let mut rng = RandomSource::new(seed, 0);
    let arg = sample_arg(5, 0.0, 1.0, 1.5, &mut rng)?;
    println!("{} events, {} splits, at most {} particles", arg.events().len(), arg.n_splits(), arg.max_particles());

    let all = arg.all_leaves();
    for u in [0.0, 0.5, 1.0] {
        println!("tree at {u}: {}", newick::encode(&arg.extract_tree(&all, u)?));
    }

    let path = arg.tree_path(&all)?;
    let (splits, distinct) = arg.distinct_tree_count();
    println!("{} breakpoints, {distinct} distinct trees from {splits} splits", path.n_breakpoints());

    // leaves 0 and 1 only; the subsampled ARG has the law of a 2-leaf ARG
    let pair = arg.subsample(&[0, 1])?;
    println!("pair ARG: {} splits, tree at 0.5 {}", pair.n_splits(), newick::encode(&pair.extract_tree(&[0, 1], 0.5)?));
    Ok(())
}
