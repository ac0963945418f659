//! Replace a wiggly angle function by a strictly increasing one with the
//! same endpoint values.
use std::f64::consts::TAU;

use rotnum::homotope_theta;
use rotnum::rotation::certificate_from_angles;

fn main() -> rotnum::Result<()> {
    let n = 500;
    let period = 3.0;
    let t: Vec<f64> = (0..=n).map(|i| period * i as f64 / n as f64).collect();
    let theta: Vec<f64> = t
        .iter()
        .map(|x| 1.5 * x / period + 0.6 * (3.0 * TAU * x / period).sin())
        .collect();

    let before = certificate_from_angles(&t, &theta)?;
    let cert = homotope_theta(&t, &theta, 0.1)?;
    let after = certificate_from_angles(&cert.t, &cert.psi1)?;

    println!("before: {:?}", before.verdict);
    println!("after:  {:?}  min derivative = {:.4}", after.verdict, cert.min_derivative);
    let last = cert.t.len() - 1;
    println!(
        "endpoints: ({:.6}, {:.6}) -> ({:.6}, {:.6})",
        cert.psi0[0], cert.psi0[last], cert.psi1[0], cert.psi1[last]
    );
    Ok(())
}
