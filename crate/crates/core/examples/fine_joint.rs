//! Joint distributions for local behaviors and CHSH certificates for the
//! rest: a PR box, the singlet, and a mixture that sits on the boundary.

use bellcheck::behavior::BehaviorTable;
use bellcheck::corpus::mix;
use bellcheck::fine::{fine_criterion, find_joint, JointVerdict};
use bellcheck::loophole::{quantum_singlet_behavior, AngleSet};
use bellcheck::rational::q;
use bellcheck::Rational;

fn pr_box() -> bellcheck::Result<BehaviorTable> {
    BehaviorTable::binary_from_fn(|c, x, y| {
        let sign = if c.alice == 1 && c.bob == 1 { -1 } else { 1 };
        if x * y == sign { q(1, 2) } else { Rational::zero() }
    })
}

fn show(name: &str, b: &BehaviorTable) -> bellcheck::Result<()> {
    match find_joint(b)? {
        JointVerdict::Feasible { joint } => {
            let support = joint.masses().iter().filter(|p| !p.is_zero()).count();
            println!("{name}: joint exists, {support} atoms in its support");
        }
        JointVerdict::Infeasible { certificate } => {
            println!("{name}: no joint; CHSH combination {} reaches {}", certificate.flipped, certificate.value);
        }
    }
    println!("  criterion agrees: {}", fine_criterion(b) == find_joint(b)?.is_feasible());
    Ok(())
}

fn main() -> bellcheck::Result<()> {
    let pr = pr_box()?;
    let noise = BehaviorTable::binary_from_fn(|_, _, _| q(1, 4))?;
    show("PR box", &pr)?;
    show("singlet", &quantum_singlet_behavior(&AngleSet::chsh_optimal())?)?;
    show("half PR box", &mix(&pr, &noise, &q(1, 2)))?;
    show("tenth PR box", &mix(&pr, &noise, &q(1, 10)))?;
    Ok(())
}
