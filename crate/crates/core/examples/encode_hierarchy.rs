//! Encodes merging steps and tree cuts of a four-leaf hierarchy as intra
//! boundary assignments, and decodes them back.

use hcocluster::adjacency::{build_graph, enumerate_variables};
use hcocluster::constraints::{intra_constraints, ConstraintKind};
use hcocluster::hierarchy::{cut_to_encoding, encoding_to_cut, merging_step_encoding, Hierarchy, TreeCut};
use hcocluster::raster::parse_label_csv;

fn main() -> hcocluster::Result<()> {
    let leaves = parse_label_csv("1,1,2,2\n1,1,2,2\n3,3,3,2\n3,3,4,4\n")?;
    let vars = enumerate_variables(vec![build_graph(&leaves, 0)], 1.0)?;
    let hierarchy = Hierarchy::from_pairs(4, &[(0, 1), (2, 3), (4, 5)])?;

    let pairs: Vec<String> = vars.vars().iter().map(|v| format!("b{}{}", v.a.region + 1, v.b.region + 1)).collect();
    println!("variables: {}", pairs.join(" "));
    for step in 0..=hierarchy.merges().len() {
        println!("after {step} merges: {:?}", merging_step_encoding(&hierarchy, &vars, 0, step)?);
    }

    let cut = TreeCut::new(&hierarchy, [0, 1, 5])?;
    let encoded = cut_to_encoding(&hierarchy, &vars, 0, &cut)?;
    println!("cut {:?} -> {encoded:?}", cut.nodes());
    match encoding_to_cut(&hierarchy, &vars, 0, &[0, 1, 0, 1, 1])? {
        Ok(cut) => println!("decoded {:?}", cut.nodes()),
        Err(rejection) => println!(
            "[0 1 0 1 1] is not a tree cut: node {} has a merged crossing pair {:?}",
            rejection.witness, rejection.edge
        ),
    }

    for c in intra_constraints(&hierarchy, &vars, 0)? {
        let lhs: Vec<String> = c.terms.iter().map(|(id, a)| format!("{a:+} {}", pairs[*id])).collect();
        let op = match c.kind {
            ConstraintKind::Equal => "=",
            ConstraintKind::LessEqual => "<=",
        };
        println!("{:>14}: {} {op} {}", c.provenance.tag(), lhs.join(" "), c.rhs);
    }
    Ok(())
}
