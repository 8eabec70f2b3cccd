//! Generate the default synthetic corpus, build the three split protocols,
//! and round-trip the dataset through its binary file.
//!
//! cargo run --release --example synthetic_splits

use hierdetect::synthdata::{default_ffsc_scenario, generate, make_split, Dataset, Protocol, DEFAULT_RATIOS};

fn main() -> hierdetect::Result<()> {
    let scenario = default_ffsc_scenario();
    let graph = &scenario.graph;
    let data = generate(&scenario, 600, 60, 7)?;
    println!("{} samples, dim {}", data.len(), scenario.dim);
    for m in &scenario.methods {
        let targets: Vec<_> = m.target_nodes.iter().map(|&i| graph.node(i).name.as_str()).collect();
        let hidden: Vec<_> = m.unobserved_nodes.iter().map(|&i| graph.node(i).name.as_str()).collect();
        println!(
            "  {:>2} {:<20} targets {:<36} unannotated {}",
            m.method_id,
            m.name,
            targets.join(","),
            if hidden.is_empty() { "-".to_string() } else { hidden.join(",") }
        );
    }

    for (tag, held) in [("intra", None), ("p1", Some("expression_smile,pose_yaw")), ("p2", Some("identity"))] {
        let protocol = Protocol::parse(tag, held, &scenario)?;
        let plan = make_split(graph, &data, protocol, DEFAULT_RATIOS, 7)?;
        let fakes = |idx: &[usize]| idx.iter().filter(|&&i| data[i].is_fake()).count();
        println!(
            "{tag:<5} train {:>4} ({:>3} fake)  val {:>3}  test {:>3} ({:>3} fake)",
            plan.train.len(),
            fakes(&plan.train),
            plan.val.len(),
            plan.test.len(),
            fakes(&plan.test)
        );
    }

    let dataset = Dataset::new(graph, scenario.dim, 7, data)?;
    let dir = std::env::temp_dir().join("hierdetect-example");
    let path = dir.join("dataset.hdds");
    dataset.save(&path)?;
    let back = Dataset::load(&path)?;
    println!("\nsaved {} bytes to {}; round trip equal: {}", dataset.to_bytes().len(), path.display(), back == dataset);
    println!("first CSV rows:");
    for line in dataset.to_csv().lines().take(3) {
        println!("  {}", &line[..line.len().min(90)]);
    }
    Ok(())
}
