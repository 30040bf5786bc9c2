//! Ramsey fringes of qubit 1 while its photon sits in the filter and qubit 2
//! is parked at a range of frequencies. Uses a coarse grid for speed.

use mmqed::device::DeviceParams;
use mmqed::dynamics::{stark_plateau, stark_ramsey, OpenSystem, StarkConfig};

fn main() -> mmqed::error::Result<()> {
    let p = DeviceParams::fitted();
    let cfg = StarkConfig { nu_q2f: vec![5.3, 6.3, 6.7, 7.0, 7.3, 8.4, 8.6], ..Default::default() };
    let r = stark_ramsey(&p, &cfg, &OpenSystem::default())?;
    let oracle = r.diagnostic("oracle_shift").unwrap_or_default();
    println!("nu_q2(GHz)  shift(MHz)  oracle(MHz)");
    for ((nu, s), o) in r.grid.iter().zip(&r.values).zip(oracle) {
        println!("{nu:>10.2}  {:>10.2}  {:>11.2}", s * 1e3, o * 1e3);
    }
    println!("plateau {:.1} MHz", stark_plateau(&p, &r, 1.0)? * 1e3);
    Ok(())
}
