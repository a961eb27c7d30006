//! The tree-valued path of an ARG: breakpoints, windows, JSON and the
//! d_aux-chain variation.
//!
//! cargo run --example tree_path

use argscape::arg::sample_arg;
use argscape::metrics::{path_variation, PathDistance};
use argscape::RandomSource;

fn main() -> argscape::Result<()> {
    let mut rng = RandomSource::new(21, 0);
    let arg = sample_arg(8, 0.0, 1.0, 2.0, &mut rng)?;
    let leaves = arg.all_leaves();
    let path = arg.tree_path(&leaves)?;
    println!("breakpoints: {:?}", path.breakpoints);
    for (c, d) in [(0.0, 0.5), (0.5, 1.0), (0.0, 1.0)] {
        let w = path.window(c, d)?;
        let var = path_variation(&w, PathDistance::AuxChain { arg: &arg, leaves: &leaves })?;
        println!("[{c}, {d}]: {} trees, variation {var:.4}", w.trees.len());
    }
    println!("{}", serde_json::to_string(&path.window(0.0, 0.25)?.to_json())?);
    Ok(())
}
