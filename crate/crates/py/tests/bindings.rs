use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module(code: &std::ffi::CStr) {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(sidechan::sidechan)(py);
        let globals = PyDict::new(py);
        globals.set_item("sidechan", module).unwrap();
        if let Err(e) = py.run(code, Some(&globals), None) {
            e.display(py);
            panic!("python code failed");
        }
    });
}

#[test]
fn overlap_and_estimators() {
    with_module(
        c"
import math
f = sidechan.gaussian(0.0, 1.0, -6.0, 8.0)
g = sidechan.gaussian(2.0, 1.0, -6.0, 8.0)
assert abs(sidechan.overlap(f, g) - math.exp(-1.0)) < 1e-6
bits, raw, se = sidechan.leakage(f, g, 'exact')
assert 0.0 < bits < 1.0 and se is None
mc, _, se = sidechan.leakage(f, g, 'mc', mc_samples=200000, seed=3)
assert abs(mc - bits) < 3 * se + 2e-3
assert abs(sidechan.leakage_guessing(0.9272) - 4.3e-3) < 5e-4
clamped, raw = sidechan.leakage_eq8(0.9)
assert clamped == 0.0 and raw < 0.0
assert sidechan.qber_to_iab(0.0) == 1.0
assert len(f) == 4096 and abs(f.integral() - 1.0) < 1e-12
",
    );
}

#[test]
fn ensembles_and_errors() {
    with_module(
        c"
import json
ens = sidechan.Ensemble.preset('identical', 1)
assert ens.parameters() == ['wavelength', 'pulse', 'arrival', 'spatial']
assert ens.basis_report('wavelength') == (0.0, 0.0)
doc = json.loads(ens.analyze(methods=['exact'], qber=0.0))
assert doc['budget']['total'] == 0.0 and doc['key_rate']['rate'] == 1.0
try:
    sidechan.Ensemble.preset('nope')
except sidechan.SidechanError as e:
    assert 'nope' in str(e)
else:
    raise AssertionError('expected SidechanError')
try:
    sidechan.Distribution(0.0, 1.0, [1.0])
except ValueError:
    pass
else:
    raise AssertionError('expected ValueError')
",
    );
}
