import io

import numpy as np
import pytest

from texdr.bench import bench_kernel, bench_sweep, fit_exponent, random_image
from texdr.distances import DistanceKind
from texdr.image import NeighborhoodSpec


def test_fit_exponent_recovers_power_law():
    sizes = np.array([5, 10, 20, 40])
    assert fit_exponent(sizes, 3.0 * sizes**2) == pytest.approx(2.0, abs=1e-12)
    assert fit_exponent(sizes, 0.5 * sizes**1.5) == pytest.approx(1.5, abs=1e-12)


def test_random_image_is_seeded():
    assert random_image(6, 3, 1) == random_image(6, 3, 1)
    assert not random_image(6, 3, 1) == random_image(6, 3, 2)


def test_kernel_row_fields():
    row = bench_kernel(DistanceKind("chamfer", NeighborhoodSpec(1)), random_image(8, 2),
                       n_pairs=50, repetitions=2)
    assert (row.kind, row.eta, row.channels, row.n_pairs) == ("chamfer", 1, 2, 50)
    assert row.mean_ns_per_pair > 0 and row.sd_ns >= 0


def test_sweep_row_order_is_stable():
    kw = dict(etas=(1, 2), channels=(2, 3), side=10, n_pairs=20, repetitions=1)
    a = bench_sweep("bhattacharyya", **kw)
    b = bench_sweep("bhattacharyya", **kw)
    key = [(r.kind, r.channels, r.eta, r.bins) for r in a.rows]
    assert key == [(r.kind, r.channels, r.eta, r.bins) for r in b.rows]
    assert [(r[1], r[2]) for r in key] == [(2, 1), (2, 2), (3, 1), (3, 2)]


def test_report_csv_layout():
    rep = bench_sweep("qf-histogram", bins=(3, 4), side=8, n_pairs=10, repetitions=1)
    buf = io.StringIO()
    rep.write(buf)
    lines = buf.getvalue().splitlines()
    header = [ln for ln in lines if not ln.startswith("#")]
    assert header[0].startswith("kind,eta,C,B,n_pairs")
    assert [ln.split(",")[3] for ln in header[1:]] == ["3", "4"]
    assert any(ln.startswith("# threads=") for ln in lines)
