//! Charge-basis transmon: flux tuning arc, anharmonicity and the inverse map.

use mmqed::transmon::TransmonParams;

fn main() -> mmqed::error::Result<()> {
    let t = TransmonParams::default();
    let (low, high) = t.band()?;
    println!("tunable band {low:.3} .. {high:.3} GHz");
    println!("flux(Φ0)  nu01(GHz)  alpha(MHz)");
    for k in 0..=8 {
        let phi = 0.05 * k as f64;
        println!("{phi:>8.2}  {:>9.4}  {:>10.1}", t.nu01(phi)?, t.anharmonicity(phi)? * 1e3);
    }
    for target in [6.2, 6.8, 8.1] {
        println!("{target} GHz needs flux {:.5} Φ0", t.frequency_to_flux(target)?);
    }
    Ok(())
}
