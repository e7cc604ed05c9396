//! Solve b * w = l with w = l'/b(0) + B1 * l' + B2 * l and watch the
//! round-trip error fall at second order.

use kbkz::kernels::RelaxationKernel;
use kbkz::volterra::round_trip_study;

fn main() -> kbkz::Result<()> {
    let signal = |t: f64| 1.0 + (3.0 * t).sin() + 0.5 * t * (-t).exp();
    for (name, k) in [
        ("e^-t", RelaxationKernel::exponential(1.0, 1.0)?),
        ("Doi-Edwards, rate <= 100", RelaxationKernel::doi_edwards(Some(100.0))?),
    ] {
        let study = round_trip_study(&k, signal, 4e-3, 3, 1.0)?;
        println!("{name}");
        for (j, r) in study.rows.iter().enumerate() {
            let order = if j == 0 { String::new() } else { format!("order {:.3}", study.orders[j - 1]) };
            println!("  dt {:.1e}  error {:.3e}  {order}", r.dt, r.relative_l2);
        }
    }
    Ok(())
}
