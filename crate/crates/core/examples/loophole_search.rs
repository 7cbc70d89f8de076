//! Searches for a ternary model whose post-selected correlations exceed the
//! CHSH bound while every detection rate stays below 2/3.

use bellcheck::io::print_contextual;
use bellcheck::loophole::{search_postselection_violation, SearchConfig};

fn main() -> bellcheck::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let result = search_postselection_violation(&SearchConfig { seed, ..Default::default() })?;
    if let Some(max) = &result.postselected_max_abs {
        println!("post-selected max |CHSH| = {max} ~ {:.4}", max.to_f64());
    }
    println!("raw max |CHSH| = {}", result.report.raw_chsh().max_abs);
    println!("alice detection: {}, {}", result.detection.alice[0], result.detection.alice[1]);
    println!("bob detection: {}, {}", result.detection.bob[0], result.detection.bob[1]);
    println!("min coincidence rate: {}", result.report.min_coincidence_rate());
    println!("{}", print_contextual(&result.model));
    Ok(())
}
