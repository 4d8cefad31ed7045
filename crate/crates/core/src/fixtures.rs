//! Small reference datasets used in docs, tests and the CLI demo.

use crate::dataset::Dataset;

/// Eight samples over five features where `C = f4 ⊕ f5`, although `f4` and
/// `f5` individually carry no mutual information about `C`.
pub const TABLE2_CSV: &str = "\
f1,f2,f3,f4,f5,C
1,0,1,1,1,0
1,1,0,0,0,0
0,0,0,1,1,0
1,0,1,0,0,0
1,1,1,1,0,1
0,1,0,1,0,1
0,1,0,0,1,1
0,0,0,0,1,1
";

/// Five samples used to illustrate sorting and prefix labels.
pub const TABLE3_CSV: &str = "\
f1,f2,f3,f4,f5,C
1,0,1,0,0,1
0,1,0,0,1,0
0,1,0,0,1,0
1,0,0,0,1,1
1,0,1,1,1,0
";

pub fn table2() -> Dataset {
    Dataset::read_csv(TABLE2_CSV.as_bytes()).expect("fixture parses")
}

pub fn table3() -> Dataset {
    Dataset::read_csv(TABLE3_CSV.as_bytes()).expect("fixture parses")
}
