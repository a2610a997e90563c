use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(&Bound<'_, PyDict>)>(f: F) {
    Python::attach(|py| {
        let m = PyModule::new(py, "sntail").unwrap();
        sntail_py::sntail_module(&m).unwrap();
        let g = PyDict::new(py);
        g.set_item("sntail", m).unwrap();
        f(&g);
    });
}

fn run(g: &Bound<'_, PyDict>, code: &str) {
    let c = std::ffi::CString::new(code).unwrap();
    g.py().run(&c, Some(g), None).unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn tail_order_from_python() {
    with_module(|g| {
        run(
            g,
            r#"
p = sntail.Parameters(-1.0, -1.0, 0.0)
t = sntail.tail_dependence(p)
assert t.case == "1", t.case
assert abs(t.kappa - 2.0) < 1e-12
assert abs(t.lambda_l.tau1 - 0.5) < 1e-12
f = sntail.dcopula_rv(sntail.Parameters(1.0, 2.0, 0.3))
assert abs((f * f / f).theta - f.theta) < 1e-15
total, s1, s2 = sntail.log_dcdu_exact(sntail.Parameters(1.0, 2.0, 0.3), -200.0)
assert abs(total - f.eval(-200.0)) < 0.1
"#,
        );
    });
}

#[test]
fn errors_map_to_value_error() {
    with_module(|g| {
        run(
            g,
            r#"
try:
    sntail.Parameters(1.0, 1.0, 1.0)
    raise AssertionError("no error")
except ValueError:
    pass
assert sntail.classify_case(sntail.Parameters(0.3, -1.0, 0.3), ["lambda1"]) == "2"
import json
r = json.loads(sntail.analyze_json(sntail.Parameters(1.0, 1.0, 0.5)))
assert abs(r["theta"] - 4 / 3) < 1e-12
"#,
        );
    });
}
