//! Bell state through the calibrated gate, read out by simulated two-qubit
//! tomography. Pass `--decoherence` to add T1 and quasi-static noise.

use mmqed::device::DeviceParams;
use mmqed::dynamics::OpenSystem;
use mmqed::gates::{bell_experiment, calibrate_cz, BellOptions, CalibrationOptions, CzSchedule};

fn main() -> mmqed::error::Result<()> {
    let noisy = std::env::args().any(|a| a == "--decoherence");
    let p = DeviceParams::fitted();
    let cal = calibrate_cz(&p, &CzSchedule::default(), &CalibrationOptions::default())?;
    let opts = BellOptions { open: OpenSystem { enabled: noisy, realizations: 400, seed: 7 }, ..Default::default() };
    let out = bell_experiment(&p, &cal.schedule, &opts, 7)?;
    let b = out.report.bell.as_ref().expect("bell summary");
    println!("exact state:   fidelity {:.4}, concurrence {:.4}", b.exact_fidelity, b.exact_concurrence);
    println!("tomography:    fidelity {:.4}, concurrence {:.4}", b.fidelity, b.concurrence);
    if let Some(bs) = &out.bootstrap {
        println!("bootstrap std: fidelity {:.4}, concurrence {:.4}", bs.fidelity.std, bs.concurrence.std);
    }
    Ok(())
}
