//! The Doi-Edwards damping function g_DE and its hyperbolicity constants.

use kbkz::kernels::{eval_g_de, DampingFunction};

fn main() -> kbkz::Result<()> {
    let g = DampingFunction::doi_edwards()?;
    println!("theta = {}, gamma = {:.6}, K = {:.6}", g.theta(), g.gamma(), g.k());
    println!("g'(0) = {:.10}  (-4 pi / 5 = {:.10})", g.slope_at_zero(), -4.0 * std::f64::consts::PI / 5.0);
    println!("{:>6} {:>16} {:>16} {:>16}", "y", "g", "g'", "quadrature g");
    for i in -4..=4 {
        let y = 0.25 * i as f64;
        println!("{y:>6.2} {:>16.10} {:>16.10} {:>16.10}", g.g(y), g.d1(y), eval_g_de(y)?);
    }
    Ok(())
}
