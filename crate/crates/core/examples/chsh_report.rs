//! CHSH values of a ternary model before and after post-selection, and the
//! coin-flip reduction that turns it into a binary model.

use bellcheck::behavior::behavior_from_model;
use bellcheck::chsh::{chsh_values, finite_sample_bound, postselected_correlations, zero_to_coin};
use bellcheck::corpus::{random_model, OutcomeKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bellcheck::Result<()> {
    let model = random_model(&mut ChaCha8Rng::seed_from_u64(5), 4, 3, OutcomeKind::Ternary);
    let report = chsh_values(&model.quad()?)?;
    for v in &report.values {
        println!("{:>40}  {}", v.describe(&["x".into(), "x'".into()], &["y".into(), "y'".into()]), v.value);
    }
    println!("max |CHSH| = {}", report.max_abs);

    let post = postselected_correlations(&behavior_from_model(&model)?);
    println!("coincidence rates: {:?}", post.coincidence_rate.iter().map(|r| r.to_string()).collect::<Vec<_>>());
    if let Some(c) = post.conditional_chsh() {
        println!("post-selected max |CHSH| = {} ~ {:.4}", c.max_abs, c.max_abs.to_f64());
    }

    let coin = zero_to_coin(&model)?;
    println!("binary after coin flips: {}, same quad: {}", coin.is_binary(), coin.quad()? == model.quad()?);

    let bound = finite_sample_bound(10_000, 2.1)?;
    println!("P(observe 2.1 with 10^4 trials) <= {:.3e}", bound.bound());
    Ok(())
}
