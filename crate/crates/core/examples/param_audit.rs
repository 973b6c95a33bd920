//! Parameter counts for both settings against the published table.

use ifno::bench::cmd_param_audit;

fn main() {
    let report = cmd_param_audit();
    print!("{}", report.table());
    for r in report.mismatches() {
        println!("mismatch: {} {} L={}: {} vs {}", r.variant, r.setting, r.layers, r.rendered, r.expected);
    }
}
