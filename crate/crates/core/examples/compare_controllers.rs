//! Side-by-side table of the shipped persistent-disturbance triple, with the
//! drift contrast.

use std::path::Path;

use dads::scenario::{compare, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/scenarios");
    let scenarios = ["fig4_dads", "fig4_sigma04", "fig4_sigma0"]
        .iter()
        .map(|n| Scenario::load(&dir.join(format!("{n}.scenario"))))
        .collect::<Result<Vec<_>, _>>()?;
    let cmp = compare(&scenarios)?;
    print!("{}", cmp.table());
    if let Some(r) = &cmp.contrast {
        println!("{}", r.summary_line());
    }
    Ok(())
}
