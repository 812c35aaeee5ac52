use std::ffi::CString;

use pyo3::prelude::*;
use vecorch_py::vecorch_py;

fn run(code: &str) {
    pyo3::append_to_inittab!(vecorch_py);
    Python::initialize();
    Python::attach(|py| {
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, None, None) {
            e.print(py);
            panic!("python code failed");
        }
    });
}

#[test]
fn module_round_trip() {
    run(r#"
import vecorch_py as vo

sim = vo.Simulation(preset="goal-adaptation", policy="sp", vehicles=3, seed=2)
recs = [sim.step() for _ in range(50)]
r = sim.issue_command(vo.ENERGY_SAVE_COMMAND)
assert (r["received_at_slot"], r["effective_from_slot"]) == (50, 51), r
recs += sim.run()
assert [x["slot"] for x in recs] == list(range(1, 101))
assert {x["beta_e"] for x in recs[:50]} == {1.0}
assert {x["beta_e"] for x in recs[50:]} == {8.0}

report, streams = vo.run_scenario(preset="goal-adaptation", policy="sp", vehicles=3, seeds=[2])
assert streams[0] == recs, "live command differs from the scripted schedule"
assert len(report["aggregate"]["phases"]) == 2

try:
    vo.parse_decision("{}", [1], 1)
except ValueError as e:
    assert "w" in str(e)
else:
    raise AssertionError("missing fields accepted")
"#);
}
