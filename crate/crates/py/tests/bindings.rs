use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &str) {
    Python::initialize();
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(pyqorth::pyqorth)(py);
        let globals = PyDict::new(py);
        globals.set_item("pyqorth", m).unwrap();
        let code = std::ffi::CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn evaluators() {
    run(r#"
ctx = pyqorth.Context(q="0.5")
assert ctx.h(0, phi="0.3") == "1"
assert ctx.h(2, x="0") == "-1"
assert ctx.h(1, x="0.5") == "1"
assert abs(float(ctx.d(1, "qinv", mu="2")) - 1.0) < 1e-15
assert abs(float(ctx.h(3, phi="0.4")) - float(ctx.h(3, x=str(__import__("math").sinh(0.4))))) < 1e-12
"#);
}

#[test]
fn errors_map_to_python_exceptions() {
    run(r#"
ctx = pyqorth.Context(q="0.5")
try:
    ctx.d(1, "5", mu="2")
    raise AssertionError("accepted s outside the base range")
except ValueError as e:
    assert "0<s<q^-2" in str(e)
try:
    pyqorth.Context(q="1.5")
    raise AssertionError("accepted q >= 1")
except ValueError:
    pass
try:
    ctx.gram("dual-qinv-extremal", a="0.7", family="h")
    raise AssertionError("accepted an incompatible pair")
except ValueError as e:
    assert "incompatible" in str(e)
"#);
}

#[test]
fn gram_verify_sweep() {
    run(r#"
ctx = pyqorth.Context(q="0.5")
g = ctx.gram("dual-base", n_max=0, s="1")
assert g["gram"] == [["2"]] and g["pass"]
g = ctx.gram("dual-qinv-extremal", n_max=4, a="0.7")
assert g["pass"] and len(g["gram"]) == 5
reports = ctx.verify(k_max=3, n_max=4)
assert [r["id"] for r in reports if not r["pass"]] == ["theta-product-chain"]
rows = ctx.sweep(steps=4, n_max=4)
assert len({r["node_hash"] for r in rows}) == 4 and all(r["pass"] for r in rows)
assert len(pyqorth.identity_ids()) == 9
assert pyqorth.qpoch("0.5", "0.5", 2) == "0.375"
"#);
}
