use std::path::Path;

use distflow::metrics::{ipc_metrics, DepData, RccFormula};
use distflow::trace::MethodId;

fn fixture() -> DepData {
    DepData::read(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/ipc_3proc.deps"))).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 5e-11
}

#[test]
fn hand_computed_system_values() {
    let r = ipc_metrics(&fixture(), RccFormula::Prose);
    let expected = [3.0, 5.0 / 9.0, 2.0 / 3.0, 1.0 / 48.0, 0.75, 7.0 / 12.0];
    for (got, want) in r.system_row().iter().zip(expected) {
        assert!(close(*got, want), "{:?}", r.system_row());
    }
}

#[test]
fn hand_computed_breakdowns() {
    let r = ipc_metrics(&fixture(), RccFormula::Prose);
    assert_eq!(r.process_rmc.len(), 3);
    assert!(close(r.process_rcc[&1], 2.0 / 3.0));
    assert!(close(r.process_plc[&1], 0.25));
    assert!(close(r.class_ccl[&(0, "A".to_string())], 2.0));
    assert!(close(r.class_rcc[&((0, "A".to_string()), (1, "A".to_string()))], 2.0 / 3.0));
    assert!(close(r.class_ccc[&(2, "B".to_string())], 1.0));
    assert!(close(r.method_ipr[&MethodId::new(2, "B", "f")], 2.0 / 12.0));
}

#[test]
fn report_round_trips_through_text() {
    let d = fixture();
    assert_eq!(DepData::parse(&d.render(), Path::new("x")).unwrap(), d);
    let text = ipc_metrics(&d, RccFormula::Prose).render();
    assert!(text.starts_with("system\tRMC\tRCC\tCCC\tIPR\tCCL\tPLC\nsystem\t3.0000000000\t0.5555555556\t"));
}
