//! Parse a label hierarchy, check a few configurations for legality and
//! count the legal states of the bundled graph and a sparser variant.
//!
//! cargo run --release --example hierarchy_enumerate

use hierdetect::hierarchy::{enumerate_legal, is_legal, parse_graph, LabelGraph, LabelState, Tier};

fn main() -> hierdetect::Result<()> {
    let graph = LabelGraph::default_ffsc();
    let (r, a, g) = graph.tier_counts();
    println!("default graph: {} nodes ({r} root, {a} attributes, {g} regions)", graph.len());
    println!("legal states: {}", enumerate_legal(&graph)?.len());
    println!("graph hash: {:016x}", graph.hash());

    let id = |name: &str| graph.node_id(name).expect("node exists");
    let cases = [
        ("all real", LabelState::zeros(graph.len())),
        ("fake, age, skin", LabelState::from_active(graph.len(), [0, id("age"), id("skin")])),
        ("fake, age only", LabelState::from_active(graph.len(), [0, id("age")])),
        ("skin only", LabelState::from_active(graph.len(), [id("skin")])),
    ];
    for (name, state) in &cases {
        println!("{name:<18} {:?} legal={}", state.bits(), is_legal(&graph, state)?);
    }

    // Each attribute touches only two regions.
    let sparse = parse_graph(
        "nodes:
0 face root
1 age attribute
2 pose attribute
3 skin region
4 eye region
5 nose region
edges:
face -> age
face -> pose
age -> skin
age -> eye
pose -> eye
pose -> nose
",
    )?;
    let states = enumerate_legal(&sparse)?;
    println!("\nsparse graph: {} legal states", states.len());
    let attrs: Vec<_> = sparse.ids_with_tier(Tier::Attribute).map(|i| sparse.node(i).name.as_str()).collect();
    println!("attributes: {}", attrs.join(", "));
    for s in states.iter().take(6) {
        println!("  {:?}", s.bits());
    }
    Ok(())
}
