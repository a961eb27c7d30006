//! Sample a Kingman coalescent tree, print it as Newick and read it back.
//!
//! cargo run --example kingman_newick

use argscape::{newick, sample_kingman, RandomSource};

fn main() -> argscape::Result<()> {
    let mut rng = RandomSource::new(3, 0);
    let tree = sample_kingman(6, &mut rng)?;
    let text = newick::encode(&tree);
    println!("{text}");
    println!("height {:.4}, total length {:.4}", tree.root_time(), tree.total_length());
    println!("level durations S_6..S_2: {:?}", tree.level_times());

    let back = newick::decode(&text)?;
    println!("same genealogy after parsing: {}", back.same_genealogy(&tree));

    let big = sample_kingman(10_000, &mut rng)?;
    let eps = 0.01;
    println!("eps * lineages at depth {eps}: {:.3}", eps * big.lineage_count_at_depth(eps) as f64);
    Ok(())
}
