//! The six-atom counterexample: its quad, the mixed-sign combination, and a
//! joint distribution of all four outcomes.

use bellcheck::behavior::behavior_from_model;
use bellcheck::chsh::chsh_values;
use bellcheck::fine::{find_joint, JointVerdict};
use bellcheck::{counterexample_model, CONTEXTS};

fn main() -> bellcheck::Result<()> {
    let model = counterexample_model();
    let quad = model.quad()?;
    println!("quad: {quad}");

    let [e11, e12, e21, e22] = quad.values();
    println!("E(+1,+1) - E(-1,+1) + E(+1,-1) + E(-1,-1) = {}", &e11 - &e21 + &e12 + &e22);

    let report = chsh_values(&quad)?;
    println!("max |CHSH| = {} (satisfied: {})", report.max_abs, report.satisfied);

    let behavior = behavior_from_model(&model)?;
    if let JointVerdict::Feasible { joint } = find_joint(&behavior)? {
        println!("joint distribution of (A+1, A-1, B+1, B-1):");
        for (outcomes, p) in joint.entries().filter(|(_, p)| !p.is_zero()) {
            println!("  {outcomes:?}: {p}");
        }
    }
    for c in CONTEXTS {
        println!("P(+,+ | {c:?}) = {}", behavior.prob(c, 1, 1));
    }
    Ok(())
}
