//! Prints the frozen k-producible curve as a Rust array literal.

use entstruct::witness::KPROD_GAMMAS;
use entstruct::{kprod_curve, SeesawConfig};

fn main() -> entstruct::Result<()> {
    let ks: Vec<usize> = (1..=7).collect();
    let curve = kprod_curve(8, &KPROD_GAMMAS, &ks, &SeesawConfig::default())?;
    eprintln!("converged: {}", curve.converged);
    println!("[");
    for row in &curve.values {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.10}")).collect();
        println!("    [{}],", cells.join(", "));
    }
    println!("]");
    Ok(())
}
