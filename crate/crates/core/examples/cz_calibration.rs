//! Calibrate the photon-mediated controlled-phase gate and print its report.

use mmqed::device::DeviceParams;
use mmqed::gates::{calibrate_cz, CalibrationOptions, CzSchedule};

fn main() -> mmqed::error::Result<()> {
    let p = DeviceParams::fitted();
    let cal = calibrate_cz(&p, &CzSchedule::default(), &CalibrationOptions::default())?;
    let r = &cal.report;
    let s = &cal.schedule;
    println!(
        "load {:.2} ns, retrieve {:.2} ns, qubit-2 ramp {:.2} ns at {:.3} GHz, hold {:.2} ns",
        s.load_time, s.retrieve_time, s.qubit2_ramp_time, s.interaction_nu, s.interaction_time
    );
    println!("total {:.1} ns, conditional phase {:.4} rad", r.total_time, r.conditional_phase);
    println!("average gate fidelity {:.4}, exchange {:.1e}", r.average_gate_fidelity, r.exchange);
    println!("leakage gg/ge/eg/ee {:?}", r.leakage.map(|x| (x * 1e5).round() / 1e5));
    println!("virtual Z {:?} after {} refinement sweeps", s.virtual_z, cal.sweeps);
    Ok(())
}
