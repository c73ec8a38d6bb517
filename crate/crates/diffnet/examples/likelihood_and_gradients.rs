//! Evaluate the cascade likelihood and its analytic gradients on a tiny
//! instance, and spot-check one gradient component against central
//! finite differences.
//!
//! Run with: cargo run --release --example likelihood_and_gradients

use diffnet::objective::{
    UnconstrainedParams, build_tensors, nll_value_and_gradient, transform_params,
};
use diffnet::{Cascade, CascadeSet, Edge};

fn main() -> diffnet::Result<()> {
    // Two cascades over three nodes; node 2 is once reached and once not.
    let cascades = CascadeSet::new(vec![
        Cascade::new(0, 4.0, vec![(0, 0.0), (1, 0.7), (2, 2.1)], None)?,
        Cascade::new(1, 4.0, vec![(1, 0.0), (0, 1.2)], None)?,
    ]);
    let edges: Vec<Edge> = vec![(0, 1), (0, 2), (1, 0), (1, 2)];
    let tensors = build_tensors(&cascades, &edges)?;
    println!(
        "{} edges, {} cascades, {} dropped log terms",
        tensors.n_edges,
        cascades.len(),
        tensors.dropped_log_terms()
    );

    let k = 2;
    let mut params = UnconstrainedParams {
        n_layers: k,
        n_edges: edges.len(),
        n_cascades: cascades.len(),
        alpha_raw: vec![-1.5, -0.3, 0.2, -2.0, 0.5, -1.0, -0.7, 0.1],
        pi_raw: vec![0.4, -0.6],
    };

    let constrained = transform_params(&params)?;
    for c in 0..cascades.len() {
        let row = constrained.pi_row(c);
        println!("pi[{c}] = {row:?} (sum {})", row.iter().sum::<f64>());
    }

    let (value, grad) = nll_value_and_gradient(&tensors, &params)?;
    println!("nll = {value:.12}");
    println!("d nll / d alpha_raw[0..4] = {:?}", &grad.alpha_raw[..4]);
    println!("d nll / d pi_raw = {:?}", grad.pi_raw);

    // Central finite difference on one raw-rate coordinate.
    let h = 1e-6;
    let i = 2;
    params.alpha_raw[i] += h;
    let (up, _) = nll_value_and_gradient(&tensors, &params)?;
    params.alpha_raw[i] -= 2.0 * h;
    let (down, _) = nll_value_and_gradient(&tensors, &params)?;
    params.alpha_raw[i] += h;
    let fd = (up - down) / (2.0 * h);
    println!(
        "finite difference on alpha_raw[{i}]: analytic {:.10}, numeric {fd:.10}",
        grad.alpha_raw[i]
    );
    Ok(())
}
