//! Single-excitation spectrum as qubit 1 sweeps through the filter band,
//! with the three qubit–mode avoided crossings located.

use mmqed::device::DeviceParams;
use mmqed::spectroscopy::{eigen_sweep, find_avoided_crossing, linspace, SweepAxis, DEFAULT_OTHER_QUBIT_NU};

fn main() -> mmqed::error::Result<()> {
    let p = DeviceParams::fitted();
    let grid = linspace(6.6, 7.8, 481);
    let table = eigen_sweep(&p, &SweepAxis::Frequency { qubit: 0 }, &grid, 1, DEFAULT_OTHER_QUBIT_NU)?;
    for pair in [(1, 2), (2, 3), (3, 4)] {
        let x = find_avoided_crossing(&table, pair)?;
        println!("branches {pair:?}: minimum gap {:.1} MHz at {:.4} GHz", x.gap * 1e3, x.location);
    }
    table.write_csv(std::io::stdout().lock(), None)
}
