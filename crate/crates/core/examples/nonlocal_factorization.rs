//! A nonlocal pair model reproducing the singlet behavior, and the contexts
//! in which it fails to factorize.

use bellcheck::loophole::{quantum_singlet_behavior, AngleSet};
use bellcheck::nonlocal::{is_setting_factorizable, NonlocalPairModel};
use bellcheck::Rational;

fn main() -> bellcheck::Result<()> {
    let behavior = quantum_singlet_behavior(&AngleSet::chsh_optimal())?;
    let model = NonlocalPairModel::from_behavior(&behavior)?;
    println!("quad reproduced: {}", model.quad()? == behavior.quad());
    let report = is_setting_factorizable(&model, &Rational::zero());
    for c in &report.contexts {
        println!("{:?}: factorizable {}, max deviation {:.4}", c.context, c.factorizable, c.max_deviation.to_f64());
    }
    println!("all factorizable: {}", report.all_factorizable());
    Ok(())
}
