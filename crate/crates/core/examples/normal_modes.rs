//! Normal modes of the three-resonator filter and the qubit couplings to each.

use mmqed::device::DeviceParams;
use mmqed::hamiltonian::filter_normal_modes;

fn main() {
    let p = DeviceParams::fitted();
    println!("mode  frequency(GHz)  g_q1(MHz)  g_q2(MHz)  amplitudes");
    for (k, m) in filter_normal_modes(&p).iter().enumerate() {
        println!(
            "{:>4}  {:>14.4}  {:>9.1}  {:>9.1}  {:?}",
            k + 1,
            m.frequency,
            m.g_q1 * 1e3,
            m.g_q2 * 1e3,
            m.amplitudes.iter().map(|a| (a * 1e4).round() / 1e4).collect::<Vec<_>>()
        );
    }
}
