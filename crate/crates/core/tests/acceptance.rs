//! Acceptance criteria on the default profile, run in order with one
//! PASS/FAIL line each. A name filter argument runs only matching criteria,
//! e.g. `cargo test --test acceptance -- stark`.

use std::process::ExitCode;
use std::time::Instant;

use mmqed::acceptance::{self, CriterionOutcome};
use mmqed::config::RunConfig;

type Criterion = (&'static str, fn(&RunConfig) -> CriterionOutcome);

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let cfg = RunConfig::default();

    let simple: [Criterion; 5] = [
        ("filter_normal_modes", acceptance::filter_modes),
        ("mode_couplings", acceptance::mode_couplings),
        ("off_resonant_scaling", acceptance::off_resonant_scaling),
        ("landau_zener_fringes", acceptance::landau_zener_fringes),
        ("stark_shift", acceptance::stark_shift),
    ];
    let mut outcomes: Vec<CriterionOutcome> = Vec::new();
    let mut report = |o: CriterionOutcome| {
        println!("{o}");
        outcomes.push(o);
    };
    for (name, run) in simple {
        if selected(name) {
            report(run(&cfg));
        }
    }
    let (gate, bell) = (selected("cz_gate"), selected("decoherent_bell"));
    if gate || bell {
        let t = Instant::now();
        let cal = acceptance::calibrate(&cfg);
        let spent = t.elapsed().as_secs_f64();
        if gate {
            report(acceptance::cz_gate(&cfg, &cal, spent));
        }
        if bell {
            report(acceptance::decoherent_bell(&cfg, &cal));
        }
    }
    if selected("property_suites") {
        report(acceptance::property_suite(&cfg));
    }

    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
