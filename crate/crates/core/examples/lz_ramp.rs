//! Ramp qubit 1 through the filter band, hold, and ramp back. The excited
//! population oscillates with ramp time at the mode splitting.

use mmqed::device::DeviceParams;
use mmqed::dynamics::{lz_ramp_experiment, single_passage_residual, slow_fringe_frequency, LzRampConfig, OpenSystem};

fn main() -> mmqed::error::Result<()> {
    let p = DeviceParams::fitted();
    let cfg = LzRampConfig::default();
    let r = lz_ramp_experiment(&p, &cfg, None, &OpenSystem::default())?;
    for (t, pe) in r.grid.iter().zip(&r.values).step_by(10) {
        println!("t_ramp {t:>5.1} ns  P_e {pe:.4}");
    }
    println!("slow fringe {:.1} MHz", slow_fringe_frequency(&r, 10.0, 0.05, 0.5)? * 1e3);
    println!("single-passage residual at 25 ns {:.2e}", single_passage_residual(&p, &cfg, 25.0)?);
    Ok(())
}
