//! Fixtures shared by the benchmarks.

use arbor::{generate_synthetic, ConceptTree, Instance, SyntheticSpec, TreeParams};

pub fn two_class(n: usize, seed: u64) -> Vec<Instance> {
    generate_synthetic(&SyntheticSpec::two_class_separable(n, 0.0, seed))
        .expect("preset is valid")
        .instances
}

pub fn fitted(instances: &[Instance], params: TreeParams) -> ConceptTree {
    let mut tree = ConceptTree::new(params).expect("valid params");
    for x in instances {
        tree.fit(x).expect("synthetic instances fit");
    }
    tree
}
