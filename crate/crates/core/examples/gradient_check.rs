//! Checks every analytical gradient against central differences.

fn main() {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let report = ingrasp::gradcheck::run(trials, 1e-5, 0);
    for c in &report.checks {
        println!("{:<10} {:.2e}", c.name, c.worst);
    }
    println!("{}", if report.passed() { "all gradients agree" } else { "mismatch found" });
}
