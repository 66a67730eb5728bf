//! The reverse-mode tape and its gradient checks.
//!
//! Builds a small network forward pass, runs the backward sweep, and
//! verifies every model's analytic gradients against central finite
//! differences.
//!
//! Run with: `cargo run --release --example autodiff_gradients`

use mentions::autodiff::check::DEFAULT_EPSILON;
use mentions::autodiff::nn::Params;
use mentions::autodiff::{Tape, Tensor};
use mentions::gradcheck::all_cases;

fn main() {
    println!("=== A tiny graph by hand ===\n");
    // loss = sum(softmax(W·relu(x) + b)) — parameters get gradients by name.
    let mut params = Params::new();
    params.insert("w", Tensor::from_vec(&[2, 2], vec![0.4, -0.3, 0.8, 0.1]));
    params.insert("b", Tensor::vector(vec![0.05, -0.2]));
    params.insert("x", Tensor::vector(vec![1.5, -0.7]));

    let mut tape = Tape::new();
    let w = tape.param(&params, "w");
    let b = tape.param(&params, "b");
    let x = tape.param(&params, "x");
    let hidden = tape.relu(x);
    let projected = tape.affine(w, hidden, b);
    let dist = tape.softmax(projected);
    let picked = tape.pick(dist, 0);
    let loss = tape.scale(picked, -1.0);

    println!("forward value: {}", tape.value(loss).item());
    let grads = tape.backward(loss).into_param_grads(&tape, &params);
    for (name, grad) in &grads {
        println!("d loss / d {name:<2} = {:?}", grad.data());
    }

    println!("\n=== Finite-difference checks for every model ===\n");
    println!("{:<28} {:>14}  {}", "model", "max rel error", "verdict");
    for case in all_cases(0) {
        let report = case.run(DEFAULT_EPSILON);
        println!(
            "{:<28} {:>14.3e}  {}",
            case.name,
            report.max_rel_error,
            if report.passes(1e-3) { "ok (< 1e-3)" } else { "FAIL" }
        );
    }
}
