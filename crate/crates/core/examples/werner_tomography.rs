//! Reconstruct Werner states from simulated Pauli measurements and compare
//! the concurrence with its closed form.

use std::f64::consts::FRAC_1_SQRT_2;

use mmqed::linalg::{ComplexVector, C64};
use mmqed::tomography::{
    all_settings, bootstrap, concurrence, reconstruct_state, simulate_measurements, DensityMatrix,
};

fn main() -> mmqed::error::Result<()> {
    let z = C64::new(0.0, 0.0);
    let a = C64::new(FRAC_1_SQRT_2, 0.0);
    let bell = ComplexVector::from_vec(vec![a, z, z, a]);
    println!("    p  exact C  closed form  measured C  bootstrap std");
    for k in 0..=5 {
        let p = 0.2 * k as f64;
        let rho = DensityMatrix::werner(&bell, p)?;
        let records = simulate_measurements(&rho, &all_settings(), 10_000, 11)?;
        let data: Vec<_> = records.iter().map(Into::into).collect();
        let measured = concurrence(&reconstruct_state(&data)?)?;
        let boot = bootstrap(&records, 100, 12)?;
        println!(
            "{p:>5.1}  {:>7.4}  {:>11.4}  {measured:>10.4}  {:>13.4}",
            concurrence(&rho)?,
            (1.5 * p - 0.5).max(0.0),
            boot.concurrence.std
        );
    }
    Ok(())
}
