import math

import numpy as np
import pytest

from certbound import load_builtin
from certbound.core import DomainKind, DomainSpec, LabeledPoint
from certbound.dataset import load_dataset
from certbound.errors import InsufficientDataError
from certbound.groma import CategorySample, groma_global, select_points
from certbound.roma import Fallback, RomaConfig, roma_local
from certbound.stats import hoeffding_radius

from fixtures import (
    image_record,
    probit_net_1d,
    sharp_boundary_net,
    write_jsonl_dataset,
    write_model,
    zero_net,
)


def linf(eps, tau=0.5):
    return DomainSpec("linf", DomainKind.LINF_UNIFORM, eps, 1.0, 0.01, tau)


def grid_dataset(path, n, label=0, lo=0.45, hi=0.55):
    rng = np.random.default_rng(1234)
    records = [
        image_record(f"p{i:03d}", [float(rng.uniform(lo, hi)), 0.5], (2,), label)
        for i in range(n)
    ]
    return load_dataset(write_jsonl_dataset(path, records))


@pytest.fixture()
def probit_model(tmp_path):
    return load_builtin(write_model(tmp_path / "p.json", probit_net_1d(0.25, 0.75, 0.3, 0.004)))


class TestSelectPoints:
    def test_exactly_n_eligible_selects_all(self, tmp_path, probit_model):
        ds = grid_dataset(tmp_path / "d.jsonl", 7)
        sample = select_points(ds, 0, 7, probit_model, master_seed=5)
        assert sorted(p.id for p in sample.points) == sorted(p.id for p in ds.points)

    def test_same_seed_same_ids(self, tmp_path, probit_model):
        ds = grid_dataset(tmp_path / "d.jsonl", 30)
        a = select_points(ds, 0, 10, probit_model, master_seed=5)
        b = select_points(ds, 0, 10, probit_model, master_seed=5)
        assert [p.id for p in a.points] == [p.id for p in b.points]

    def test_different_seed_usually_differs(self, tmp_path, probit_model):
        ds = grid_dataset(tmp_path / "d.jsonl", 30)
        a = select_points(ds, 0, 10, probit_model, master_seed=5)
        b = select_points(ds, 0, 10, probit_model, master_seed=6)
        assert {p.id for p in a.points} != {p.id for p in b.points}

    def test_insufficient_reports_counts(self, tmp_path, probit_model):
        ds = grid_dataset(tmp_path / "d.jsonl", 5)
        with pytest.raises(InsufficientDataError) as exc:
            select_points(ds, 0, 10, probit_model, master_seed=5)
        assert exc.value.available == 5
        assert exc.value.requested == 10

    def test_misclassified_points_counted_not_selected(self, tmp_path):
        # the sharp boundary predicts label 1 for u1 > 0.53, so those points fail the gate
        model = load_builtin(write_model(tmp_path / "s.json", sharp_boundary_net(0.53)))
        records = [image_record(f"ok{i}", [0.5, 0.5], (2,), 0) for i in range(4)]
        records += [image_record(f"bad{i}", [0.6, 0.5], (2,), 0) for i in range(2)]
        ds = load_dataset(write_jsonl_dataset(tmp_path / "m.jsonl", records))
        sample = select_points(ds, 0, 4, model, master_seed=5)
        assert sample.excluded == 2
        assert sample.eligible == 4
        assert all(p.id.startswith("ok") for p in sample.points)

    def test_category_filter(self, tmp_path, probit_model):
        records = [image_record(f"a{i}", [0.5, 0.5], (2,), 0) for i in range(3)]
        records += [image_record(f"b{i}", [0.3, 0.5], (2,), 1) for i in range(3)]
        ds = load_dataset(write_jsonl_dataset(tmp_path / "c.jsonl", records))
        sample = select_points(ds, 0, 3, probit_model, master_seed=5)
        assert all(p.label == 0 for p in sample.points)

    def test_selection_uniformity(self, tmp_path):
        model = load_builtin(write_model(tmp_path / "z.json", zero_net()))
        records = [image_record(f"p{i:02d}", [0.5, 0.5], (2,), 0) for i in range(50)]
        ds = load_dataset(write_jsonl_dataset(tmp_path / "u.jsonl", records))
        counts = {p.id: 0 for p in ds.points}
        trials = 10000
        for seed in range(trials):
            for p in select_points(ds, 0, 5, model, master_seed=seed).points:
                counts[p.id] += 1
        freqs = np.array(list(counts.values())) / trials
        assert np.all(np.abs(freqs - 0.1) <= 0.01)


class TestGromaGlobal:
    def test_single_point_radius(self, tmp_path, probit_model):
        pt = LabeledPoint.image("only", [0.5, 0.5], (2,), 0)
        sample = CategorySample(0, (pt,), excluded=0, eligible=1)
        alpha = 0.05
        res = groma_global(sample, probit_model, linf(0.2, tau=0.305), RomaConfig(k=200), alpha, 3)
        local = roma_local(pt, probit_model, linf(0.2, tau=0.305), RomaConfig(k=200), 3)
        assert res.p_mean == local.p_fail
        assert res.hoeffding_radius == pytest.approx(math.sqrt(math.log(2 / alpha) / 2))

    def test_identical_points_share_estimate(self, tmp_path, probit_model):
        pt = LabeledPoint.image("same", [0.5, 0.5], (2,), 0)
        sample = CategorySample(0, (pt, pt, pt), excluded=0, eligible=3)
        res = groma_global(sample, probit_model, linf(0.2, tau=0.305), RomaConfig(k=200), 0.05, 3)
        local = roma_local(pt, probit_model, linf(0.2, tau=0.305), RomaConfig(k=200), 3)
        assert res.p_mean == local.p_fail

    def test_permutation_invariance(self, tmp_path, probit_model):
        ds = grid_dataset(tmp_path / "d.jsonl", 6)
        sample = select_points(ds, 0, 6, probit_model, master_seed=9)
        shuffled = CategorySample(0, tuple(reversed(sample.points)), 0, 6)
        cfg = RomaConfig(k=100)
        a = groma_global(sample, probit_model, linf(0.2, tau=0.31), cfg, 0.05, 9)
        b = groma_global(shuffled, probit_model, linf(0.2, tau=0.31), cfg, 0.05, 9)
        assert a.p_mean == b.p_mean

    def test_upper_bound_is_mean_plus_radius(self, tmp_path, probit_model):
        ds = grid_dataset(tmp_path / "d.jsonl", 10)
        sample = select_points(ds, 0, 10, probit_model, master_seed=9)
        res = groma_global(sample, probit_model, linf(0.2, tau=0.31), RomaConfig(k=100), 0.05, 9)
        assert res.p_upper == pytest.approx(min(1.0, res.p_mean + res.hoeffding_radius), rel=1e-15)
        assert res.hoeffding_radius == hoeffding_radius(10, 0.05)

    def test_normality_failures_counted(self, tmp_path):
        model = load_builtin(write_model(tmp_path / "s.json", sharp_boundary_net(0.5)))
        ds = grid_dataset(tmp_path / "d.jsonl", 5, lo=0.40, hi=0.45)
        sample = select_points(ds, 0, 5, model, master_seed=9)
        res = groma_global(sample, model, linf(0.02), RomaConfig(k=100), 0.05, 9)
        assert res.normality_failures == 5

    def test_workers_do_not_change_results(self, tmp_path, probit_model):
        ds = grid_dataset(tmp_path / "d.jsonl", 8)
        sample = select_points(ds, 0, 8, probit_model, master_seed=11)
        cfg = RomaConfig(k=150)
        serial = groma_global(sample, probit_model, linf(0.2, tau=0.31), cfg, 0.05, 11, workers=1)
        threaded = groma_global(sample, probit_model, linf(0.2, tau=0.31), cfg, 0.05, 11, workers=4)
        assert serial == threaded

    def test_indeterminate_domain_marked(self, tmp_path):
        model = load_builtin(write_model(tmp_path / "s.json", sharp_boundary_net(0.5)))
        ds = grid_dataset(tmp_path / "d.jsonl", 4, lo=0.40, hi=0.45)
        sample = select_points(ds, 0, 4, model, master_seed=9)
        cfg = RomaConfig(k=100, fallback_order=(Fallback.BOX_COX,))
        res = groma_global(sample, model, linf(0.02), cfg, 0.05, 9)
        assert res.indeterminate
        assert res.p_upper == 1.0
