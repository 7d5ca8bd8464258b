"""Smoke test for the pmc extension module.

Uses an installed `pmc` if present, otherwise the library built by
`cargo build --release -p pmc-py --features extension-module`.
"""

import cmath
import importlib.machinery
import importlib.util
import json
import math
import pathlib
import sys
import tempfile


def load():
    try:
        import pmc

        return pmc
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    lib = root / "target" / "release" / "libpmc.so"
    if not lib.exists():
        sys.exit(f"pmc is not installed and {lib} does not exist")
    loader = importlib.machinery.ExtensionFileLoader("pmc", str(lib))
    spec = importlib.util.spec_from_file_location("pmc", lib, loader=loader)
    mod = importlib.util.module_from_spec(spec)
    loader.exec_module(mod)
    return mod


def main():
    pmc = load()

    lo, hi = pmc.valid_interval(2.0)
    assert 0 < lo < hi < math.pi / 2 + 1e-12, (lo, hi)
    a, xi, c = pmc.family_state(1.1, 2.0)
    assert abs(a - pmc.a_family(1.1, 2.0)) == 0
    assert abs(cmath.phase(c) - math.remainder(xi, 2 * math.pi)) < 1e-12

    t1 = dict(pmc.tcoef(1, math.pi / 2, 0.3 + 0.4j))
    assert abs(t1[(0, 0, 0)]) < 1e-12

    p = pmc.Profile(-3.0, 1.0, 0.6, 0.3 + 0.4j, 0.4, 1.2)
    klo, khi = p.potential_range()
    for t in (klo + 0.1 * (khi - klo), 0.5 * (klo + khi)):
        assert abs(p.k(p.psi(t)) - t) < 1e-9
    assert p.ode_residual() < 1e-8

    s = pmc.family_surface(2.0, nx=41, ny=41)
    fine = pmc.family_surface(2.0, nx=81, ny=81)
    report = s.verify(fine)
    assert report.passed, report.table()
    doc = json.loads(report.json())
    assert doc["passed"] is True
    assert len(s.alpha()) == 41 and len(s.alpha()[0]) == 41
    assert all(cmath.isfinite(z) for row in s.c() for z in row)

    with tempfile.TemporaryDirectory() as d:
        s.save(d)
        back = pmc.Surface.load(d)
        assert back.alpha() == s.alpha()
        assert back.c() == s.c()

    try:
        pmc.family_surface(0.5)
    except pmc.PmcError as e:
        assert e.args[2] == 2, e.args
    else:
        raise AssertionError("c1 = 0.5 accepted")

    cfg = json.loads((pathlib.Path(__file__).parent.parent / "configs" / "generic_admissible.json").read_text())
    cfg["grid"]["nx"] = cfg["grid"]["ny"] = 41
    g = pmc.construct(json.dumps(cfg))
    assert g.masked_nodes < 41 * 41
    assert cmath.isfinite(g.c()[20][20])

    print("python smoke test passed")


if __name__ == "__main__":
    main()
