use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(script: &str) {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(pyavfuse::pyavfuse)(py);
        let globals = PyDict::new(py);
        globals.set_item("av", module).unwrap();
        let code = CString::new(script).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python script failed");
        }
    });
}

#[test]
fn loss_and_softmax() {
    run(r#"
import math
assert abs(av.kl_loss([[0.5, 0.5]], [[0.25, 0.75]]) - (0.5 * math.log(2) + 0.5 * math.log(2 / 3))) < 1e-12
rows = av.softmax([[1000.0, 0.0], [-3.0, 4.0]])
assert all(abs(sum(r) - 1.0) < 1e-12 for r in rows)
try:
    av.kl_loss([[-0.1, 1.1]], [[0.5, 0.5]])
    raise AssertionError("negative target accepted")
except ValueError:
    pass
"#);
}

#[test]
fn fusion_model_round_trip_and_errors() {
    run(r#"
m = av.FusionModel("f2", "audio", dim=4, seed=2)
assert m.mode == "audio" and m.method == "f2" and m.head_input_dim == 4
e = [[1.0, 2.0, 3.0, 4.0]] * 5
f = m.fused(e)
assert len(f) == 4
try:
    m.fused([[1.0]] * 4)
    raise AssertionError("four embeddings accepted")
except ValueError:
    pass
r = av.evaluate([0, 1, 1], [0, 1, 2])
assert abs(r.overall_accuracy - 200 / 3) < 1e-9
assert r.per_class_accuracy[3] is None
assert r.confusion[2][1] == 1
"#);
}

#[test]
fn delta_matches_regression_slope() {
    run(r#"
shape, d = av.delta([1, 6, 1], [0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
assert shape == [1, 4, 1] and all(abs(v - 1.0) < 1e-12 for v in d)
"#);
}
