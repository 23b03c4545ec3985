//! Converts the LINQS distribution of a citation graph (`cora.content`,
//! `cora.cites`; CiteSeer uses the same layout) into the plain-text files
//! the library and CLI read: `edges.txt`, `features.txt`, `labels.txt`.
//!
//! Node ids follow the order of the content file; class ids follow the
//! sorted class names. Features are copied verbatim. Citations that mention
//! a paper missing from the content file are dropped and counted.
//!
//! ```text
//! cargo run --release --example convert_linqs_cora -- path/to/cora OUT_DIR [PREFIX]
//! LSGCL_CORA_DIR=OUT_DIR cargo test --release --test acceptance
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [src, out, rest @ ..] = args.as_slice() else {
        return Err("usage: convert_linqs_cora SRC_DIR OUT_DIR [PREFIX]".into());
    };
    let prefix = rest.first().map_or("cora", String::as_str);
    let (src, out) = (PathBuf::from(src), PathBuf::from(out));
    fs::create_dir_all(&out)?;

    let content = fs::read_to_string(src.join(format!("{prefix}.content")))?;
    let mut ids = HashMap::new();
    let mut rows = Vec::new();
    let mut names = Vec::new();
    for (lineno, line) in content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(format!("{prefix}.content:{}: too few columns", lineno + 1).into());
        }
        if ids.insert(toks[0].to_string(), rows.len()).is_some() {
            return Err(format!("{prefix}.content:{}: duplicate paper {}", lineno + 1, toks[0]).into());
        }
        rows.push(toks[1..toks.len() - 1].join(" "));
        names.push(toks[toks.len() - 1].to_string());
    }
    let width = rows[0].split_whitespace().count();
    let classes: Vec<&String> = names.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let class_id: HashMap<&String, usize> = classes.iter().enumerate().map(|(i, c)| (*c, i)).collect();

    let mut features = format!("{} {width}\n", rows.len());
    for row in &rows {
        features.push_str(row);
        features.push('\n');
    }
    let mut labels = String::new();
    for (i, name) in names.iter().enumerate() {
        writeln!(labels, "{i} {}", class_id[name])?;
    }

    let cites = fs::read_to_string(src.join(format!("{prefix}.cites")))?;
    let (mut edges, mut dropped) = (String::new(), 0);
    for line in cites.lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [a, b] => match (ids.get(*a), ids.get(*b)) {
                (Some(u), Some(v)) => writeln!(edges, "{u} {v}")?,
                _ => dropped += 1,
            },
            [] => {}
            _ => return Err(format!("{prefix}.cites: malformed line {line:?}").into()),
        }
    }

    fs::write(out.join("features.txt"), features)?;
    fs::write(out.join("labels.txt"), labels)?;
    fs::write(out.join("edges.txt"), edges)?;

    let g = lsgcl::load_edge_list(&out.join("edges.txt"), &out.join("features.txt"), Some(&out.join("labels.txt")))?;
    println!(
        "{} nodes, {} undirected edges, {} features, {} classes ({dropped} citations dropped) -> {}",
        g.num_nodes(),
        g.num_edges(),
        g.num_features(),
        g.num_classes(),
        out.display()
    );
    for (i, c) in classes.iter().enumerate() {
        println!("  class {i}: {c}");
    }
    Ok(())
}
