//! Exchange rate between the qubits against their detuning from the filter,
//! next to the closed-form multimode and single-mode estimates.

use mmqed::coupling::numeric_xi;
use mmqed::device::DeviceParams;
use mmqed::spectroscopy::{exchange_scan, linspace};

fn main() -> mmqed::error::Result<()> {
    let p = DeviceParams::fitted();
    println!("center(GHz)  delta(GHz)  J(MHz)    multimode(MHz)  single-mode(MHz)");
    for r in exchange_scan(&p, &linspace(6.0, 6.6, 13))? {
        println!(
            "{:>11.3}  {:>10.3}  {:>8.4}  {:>14.4}  {:>16.4}",
            r.center,
            r.delta,
            r.j_numeric * 1e3,
            r.j_multimode * 1e3,
            r.j_single_mode * 1e3
        );
    }
    println!("residual ZZ at 6.40/6.35 GHz: {:.2e} GHz", numeric_xi(&p, 6.4, 6.35)?);
    Ok(())
}
