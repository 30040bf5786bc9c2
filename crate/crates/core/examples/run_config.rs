//! Build a run profile from the defaults plus dotted overrides, as the
//! command-line tool does, and show its hash.

use mmqed::config::RunConfig;

fn main() {
    let overrides = vec!["device.g_f=0.12".to_string(), "bell.decoherence.enabled=true".to_string()];
    let cfg = RunConfig::load(None, &overrides).expect("valid overrides");
    println!("g_F = {} GHz, decoherent Bell = {}", cfg.device.g_f, cfg.bell.decoherence.enabled);
    println!("config hash {}", cfg.hash());
    match RunConfig::load(None, &["device.g_ff=0.1".to_string()]) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!("unknown keys are rejected"),
    }
}
