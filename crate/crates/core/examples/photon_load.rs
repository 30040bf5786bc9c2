//! Swap a qubit excitation into the lowest filter mode and back out.

use mmqed::device::DeviceParams;
use mmqed::dynamics::{load_photon, retrieve_photon, LoadRamp};
use mmqed::propagate::DEFAULT_DT;

fn main() -> mmqed::error::Result<()> {
    let p = DeviceParams::fitted();
    let ramp = LoadRamp::default();
    for t in [10.0, 25.0, 50.0] {
        let loaded = load_photon(&p, &ramp, 5.0, t, DEFAULT_DT)?;
        let back = retrieve_photon(&p, &ramp, 5.0, t, &loaded.state, DEFAULT_DT)?;
        println!(
            "{t:>4} ns ramps: modes {:?}, returned to qubit {:.4}",
            loaded.mode_populations.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>(),
            back.qubit_population
        );
    }
    Ok(())
}
