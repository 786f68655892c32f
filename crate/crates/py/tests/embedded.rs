use pyo3::ffi::c_str;
use pyo3::prelude::*;
use pycrashnet::pycrashnet;
use pyo3::types::PyDict;

#[test]
fn module_runs_in_embedded_interpreter() {
    pyo3::append_to_inittab!(pycrashnet);
    Python::initialize();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        py.run(
            c_str!(
                r#"
import math
import pycrashnet as cn
net = cn.random_network(2, [3], 1, "sigmoid", 1.0, 5)
assert cn.Network.from_json(net.to_json()).forward([0.1, 0.2]) == net.forward([0.1, 0.2])
assert cn.binomial(150, 50) == math.comb(150, 50)
r = cn.omega_exhaustive(net, cn.random_inputs(2, 10, 1), 1)
ok = r["omega_av"] <= cn.erf_total(net, 1)["erf_av_expected"] + 1e-9
"#
            ),
            Some(&globals),
            None,
        )
        .unwrap();
        assert!(globals.get_item("ok").unwrap().unwrap().extract::<bool>().unwrap());
    });
}
