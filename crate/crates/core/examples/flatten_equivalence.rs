//! Three ways of removing the instrument variables, checked on random
//! models: each reproduces the contextual expectations exactly.

use bellcheck::corpus::{random_model, OutcomeKind};
use bellcheck::flatten::{bell_average, product_flatten, uniform_reduce, Refinement};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bellcheck::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for kind in [OutcomeKind::Binary, OutcomeKind::Ternary, OutcomeKind::Fractional] {
        let model = random_model(&mut rng, 4, 3, kind);
        let quad = model.quad()?;
        let product = product_flatten(&model)?;
        let uniform = uniform_reduce(&model, Refinement::Common)?;
        let averaged = bell_average(&model)?;
        println!("{kind:?}: contextual {quad}");
        println!("  product space, {} atoms: {}", product.atoms.len(), product.quad());
        println!("  two uniforms, {} atoms: {}", uniform.atoms.len(), uniform.quad());
        println!("  averaged (bounded: {}): {}", averaged.is_bounded(), averaged.quad());
        assert!(product.quad() == quad && uniform.quad() == quad && averaged.quad() == quad);
    }
    Ok(())
}
