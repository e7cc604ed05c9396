//! The quadratic form Q(w, t, a) in the time domain and through Parseval.

use kbkz::kernels::RelaxationKernel;
use kbkz::spectral::parseval_qform;
use kbkz::volterra::{qform_kernel, TimeSignal};

fn main() -> kbkz::Result<()> {
    let one = TimeSignal::from_fn(1e-3, 1000, |_| 1.0);
    let exp = RelaxationKernel::exponential(1.0, 1.0)?;
    println!("Q(1, 1, e^-s) = {:.10}  (e^-1 = {:.10})", qform_kernel(&one, &exp), (-1.0f64).exp());

    let k = RelaxationKernel::doi_edwards(Some(100.0))?;
    let w = TimeSignal::from_fn(1e-4, 10_000, |t| 0.3 + (2.0 * t).sin() - 0.7 * (5.0 * t).cos());
    let time = qform_kernel(&w, &k);
    let freq = parseval_qform(&w, &k);
    println!("time domain {time:.12}, frequency domain {freq:.12}, relative gap {:.2e}", (time - freq).abs() / time.abs());
    Ok(())
}
