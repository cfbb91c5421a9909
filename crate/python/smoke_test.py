"""Smoke test for the pyzoomcons extension module.

Build and install first:  maturin develop -m crates/python/Cargo.toml
"""

import math

import pyzoomcons as zc


def main():
    ring = zc.Digraph.ring(20)
    assert ring.n == 20 and ring.edge_count() == 40
    assert ring.is_strongly_connected()

    mat = zc.ConsensusMatrix.max_degree(ring)
    assert abs(mat.rho - 0.9673) <= 5e-4, mat.rho
    assert abs(sum(mat.p()[0]) - 1.0) < 1e-12

    q = zc.UniformQuantizer(3)
    assert q.alphabet_size() == 5
    assert q.levels() == [-1.0, -2 / 3, 0.0, 2 / 3, 1.0]
    assert q.quantize(0.5) == 2 / 3
    assert q.is_saturated(q.quantize_symbol(1.5))

    params = zc.ZoomParams(6, 0.97, 2.0, 1.0)
    enc, dec = zc.Codec(params), zc.Codec(params)
    for x in [0.3, -1.2, 5.0, 0.1, 0.1]:
        s = enc.encode(x)
        assert dec.decode(s) == enc.x_hat
    assert enc.t == 5

    ring4 = zc.ConsensusMatrix.max_degree(zc.Digraph.ring(4))
    k_in = 0.5
    m = zc.min_m(ring4.rho, k_in, 4)
    assert m == 132
    x0 = zc.gaussian_x0(4, 3)
    norm = math.sqrt(sum(v * v for v in x0))
    l0 = 1.01 * zc.min_l0(ring4.rho, k_in, m, 4, norm)
    certified = zc.ZoomParams(m, k_in, 2.0, l0)
    cert = zc.check_theorem(ring4, certified, x0)
    assert cert["all_hold"], cert

    res = zc.run_quantized(ring4, certified, x0, record_symbols=True)
    assert res.status == "converged", res
    assert res.zoom_out_count == 0
    ave = sum(x0) / 4
    assert all(abs(v - ave) < 1e-6 for v in res.final_x)
    assert len(res.symbols()) == res.steps
    assert res.history_csv().startswith("t,disagreement,")

    ideal = zc.run_ideal(ring4, x0, max_steps=200)
    assert ideal.status == "converged"

    assert zc.bits_per_symbol(3, silence=True) == 2.0

    try:
        zc.ZoomParams(6, 1.5, 2.0, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("k_in >= 1 must be rejected")

    print("pyzoomcons smoke test passed:", res)


if __name__ == "__main__":
    main()
