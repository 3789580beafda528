import itertools
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsb.catalog import AttackSpec, Catalog, ParameterSpec, ServiceSpec, load_catalog
from nsb.errors import EmptySelection, UnresolvedReference
from nsb.planner import (
    ExperimentSpec,
    Instrumentation,
    IntensityLevel,
    default_levels,
    expand_matrix,
    levels_by_label,
    load_experiment,
    plan_summary,
)

REPO_ROOT = Path(__file__).resolve().parent.parent


def test_default_ladder():
    levels = default_levels()
    assert [lv.label for lv in levels] == ["L0", "L1", "L2", "L3"]
    assert [lv.rate_limit for lv in levels] == [100, 1000, 10000, None]
    assert levels[-1].unlimited
    finite = [lv.rate_limit for lv in levels if lv.rate_limit is not None]
    assert finite == sorted(finite)


def test_levels_by_label():
    assert [lv.label for lv in levels_by_label(["L3", "L0"])] == ["L3", "L0"]
    with pytest.raises(UnresolvedReference):
        levels_by_label(["L9"])


def test_level_rejects_nonpositive_rate():
    with pytest.raises(ValueError):
        IntensityLevel("LX", 0)
    with pytest.raises(ValueError):
        IntensityLevel("LX", -5)


def _spec(services, attacks, levels, reps, **kw):
    defaults = dict(overrides={}, baseline=None,
                    instrumentation=Instrumentation(),
                    warmup_s=5.0, attack_s=10.0, cooldown_s=5.0)
    defaults.update(kw)
    return ExperimentSpec(service_ids=tuple(services), attack_ids=tuple(attacks),
                          levels=tuple(levels), repetitions=reps, **defaults)


def test_spec_validation():
    lv = levels_by_label(["L0"])
    with pytest.raises(ValueError):
        _spec(["web"], ["a"], lv, 0)
    with pytest.raises(ValueError):
        _spec(["web"], ["a"], lv, 1, warmup_s=0)
    with pytest.raises(ValueError):
        _spec(["web"], ["a"],
              [IntensityLevel("L0", 500), IntensityLevel("L1", 100)], 1)


def _synthetic_catalog(n_services, n_attacks):
    attacks = {}
    for i in range(n_attacks):
        aid = f"atk{i:03d}"
        attacks[aid] = AttackSpec(
            id=aid, description="x", image_ref="nsb-idle", hook="entrypoint.sh",
            parameters=(ParameterSpec("rate", "integer", 10, min=0),
                        ParameterSpec("duration", "duration", "10s")))
    services = {
        f"svc{i:03d}": ServiceSpec(id=f"svc{i:03d}", image_ref="nsb-idle",
                                   protocol="http", port=8000 + i)
        for i in range(n_services)
    }
    return Catalog(attacks=attacks, services=services, benign={},
                   source_digest="0" * 64)


@settings(max_examples=60, deadline=None)
@given(ns=st.integers(1, 5), na=st.integers(1, 5),
       nl=st.integers(1, 4), reps=st.integers(1, 6))
def test_matrix_cardinality_and_ordering(ns, na, nl, reps):
    catalog = _synthetic_catalog(ns, na)
    levels = default_levels()[:nl]
    spec = _spec(sorted(catalog.services), sorted(catalog.attacks), levels, reps)
    matrix = expand_matrix(spec, catalog)
    assert len(matrix.cells) == ns * na * nl * reps
    expected = [
        (sid, aid, lv.label, rep)
        for sid, aid, lv, rep in itertools.product(
            spec.service_ids, spec.attack_ids, levels, range(1, reps + 1))
    ]
    got = [(c.service_id, c.attack_id, c.level.label, c.repetition)
           for c in matrix.cells]
    assert got == expected
    for c in matrix.cells:
        assert c.cell_id == f"{c.service_id}/{c.attack_id}/{c.level.label}/rep{c.repetition}"


def test_rate_and_duration_injection():
    catalog = _synthetic_catalog(1, 1)
    spec = _spec(sorted(catalog.services), sorted(catalog.attacks),
                 levels_by_label(["L0", "L3"]), 1, attack_s=7.0)
    cells = expand_matrix(spec, catalog).cells
    by_level = {c.level.label: c for c in cells}
    assert by_level["L0"].params["rate"] == 100
    assert by_level["L3"].params["rate"] == 0  # unlimited serializes as 0
    assert by_level["L0"].params["duration"] == 7.0


def test_expand_rejects_unknowns():
    catalog = _synthetic_catalog(1, 1)
    lv = levels_by_label(["L0"])
    with pytest.raises(EmptySelection):
        expand_matrix(_spec([], [], lv, 1), catalog)
    with pytest.raises(UnresolvedReference):
        expand_matrix(_spec(["ghost"], sorted(catalog.attacks), lv, 1), catalog)
    with pytest.raises(UnresolvedReference):
        expand_matrix(_spec(["svc000"], ["ghost"], lv, 1), catalog)
    with pytest.raises(UnresolvedReference):
        expand_matrix(_spec(["svc000"], ["atk000"], lv, 1, baseline="ghost"),
                      catalog)


def test_spec_digest_stable_and_discriminating():
    catalog = _synthetic_catalog(1, 1)
    a = _spec(["svc000"], ["atk000"], levels_by_label(["L0"]), 2)
    b = _spec(["svc000"], ["atk000"], levels_by_label(["L0"]), 2)
    c = _spec(["svc000"], ["atk000"], levels_by_label(["L0"]), 3)
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()
    assert expand_matrix(a, catalog).spec_digest == a.digest()


def test_plan_summary_estimates_wall_time():
    catalog = _synthetic_catalog(2, 1)
    spec = _spec(sorted(catalog.services), sorted(catalog.attacks),
                 levels_by_label(["L0", "L3"]), 2)
    report = plan_summary(expand_matrix(spec, catalog))
    assert len(report.rows) == 8
    assert report.estimated_s == 8 * 20.0
    rendered = report.render()
    assert "total cells: 8" in rendered
    assert "unlimited" in rendered


def test_load_reference_experiment():
    catalog = load_catalog(REPO_ROOT / "catalog")
    spec = load_experiment(REPO_ROOT / "experiments" / "reference.yaml", catalog)
    assert spec.service_ids == ("web",)
    assert spec.attack_ids == ("http_flood",)
    assert [lv.label for lv in spec.levels] == ["L0", "L3"]
    assert spec.repetitions == 2
    assert (spec.warmup_s, spec.attack_s, spec.cooldown_s) == (5.0, 10.0, 5.0)
    assert spec.instrumentation.probe.interval_s == 0.1
    assert spec.instrumentation.probe.timeout_s == 2.0
