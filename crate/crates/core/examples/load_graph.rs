//! Writes a small attributed graph to the plain-text layout, loads it back
//! and prints basic statistics and a row of the normalized adjacency.
//!
//! ```text
//! cargo run --example load_graph [DIR]
//! ```

use std::path::PathBuf;

use lsgcl::synth::{stochastic_block_model, SbmConfig};
use lsgcl::{load_edge_list, normalize_adjacency};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir).join("lsgcl-load-graph");
    std::fs::create_dir_all(&dir)?;

    let g = stochastic_block_model(&SbmConfig { block_sizes: vec![20, 20, 20], ..Default::default() })?;
    let (edges, features, labels) = (dir.join("edges.txt"), dir.join("features.txt"), dir.join("labels.txt"));
    g.write_edge_list(&edges)?;
    g.write_features(&features)?;
    g.write_labels(&labels)?;

    let back = load_edge_list(&edges, &features, Some(&labels))?;
    assert_eq!(back.num_edges(), g.num_edges());
    let degrees: Vec<usize> = (0..back.num_nodes()).map(|u| back.degree(u)).collect();
    println!("loaded {} from {}", back.num_nodes(), dir.display());
    println!(
        "nodes {}  edges {}  features {}  classes {}  max degree {}  isolated {}",
        back.num_nodes(),
        back.num_edges(),
        back.num_features(),
        back.num_classes(),
        degrees.iter().max().unwrap_or(&0),
        degrees.iter().filter(|&&d| d == 0).count()
    );

    let a = normalize_adjacency(&back);
    let (cols, vals) = a.matrix().row(0);
    let row: Vec<String> = cols.iter().zip(vals).map(|(j, v)| format!("{j}:{v:.3}")).collect();
    println!("normalized adjacency row 0 (self-loop included): {}", row.join(" "));
    Ok(())
}
