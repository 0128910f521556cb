import json

from geosalience.corpus import validate_corpus
from geosalience.simulate import SyntheticSpec, location_names, logit, simulate


def read_lines(path):
    return path.read_text(encoding="utf-8").splitlines()


class TestSimulate:
    def test_null_model_rate_near_half(self, tmp_path):
        spec = SyntheticSpec(base_daily_mentions=28, n_locations=12,
                             window_days=30, seed=3)
        paths = simulate(spec, tmp_path)
        truth = json.loads(paths["truth"].read_text())
        rows = truth["rows"]
        assert len(rows) >= 10000
        rate = sum(r["y"] for r in rows) / len(rows)
        assert abs(rate - 0.5) < 0.02

    def test_phase_profile_rates(self, tmp_path):
        spec = SyntheticSpec(phase_profile=(0.6, 0.5, 0.3),
                             base_daily_mentions=28, n_locations=12,
                             window_days=30, seed=5)
        paths = simulate(spec, tmp_path)
        truth = json.loads(paths["truth"].read_text())
        by_phase = {"pre": [], "during": [], "post": []}
        for row in truth["rows"]:
            by_phase[row["phase"]].append(row["y"])
        targets = {"pre": 0.6, "during": 0.5, "post": 0.3}
        for phase, target in targets.items():
            labels = by_phase[phase]
            assert len(labels) > 500
            rate = sum(labels) / len(labels)
            assert abs(rate - target) < 0.03, (phase, rate)

    def test_seed_reproducibility_bytes(self, tmp_path):
        spec = SyntheticSpec(seed=11, base_daily_mentions=3)
        a = simulate(spec, tmp_path / "a")
        b = simulate(spec, tmp_path / "b")
        for name in a:
            assert a[name].read_bytes() == b[name].read_bytes(), name

    def test_different_seed_different_corpus(self, tmp_path):
        a = simulate(SyntheticSpec(seed=1, base_daily_mentions=2), tmp_path / "a")
        b = simulate(SyntheticSpec(seed=2, base_daily_mentions=2), tmp_path / "b")
        assert a["corpus"].read_bytes() != b["corpus"].read_bytes()

    def test_output_passes_strict_validation(self, tmp_path):
        paths = simulate(SyntheticSpec(seed=7, base_daily_mentions=2), tmp_path)
        stats, errors = validate_corpus(read_lines(paths["corpus"]))
        assert not errors
        truth = json.loads(paths["truth"].read_text())
        assert stats.post_count == truth["n_posts"]

    def test_beta_basis_validation(self):
        spec = SyntheticSpec(beta={"nope": 1.0})
        try:
            spec.resolved_beta()
            raise AssertionError("expected ValueError")
        except ValueError:
            pass

    def test_phase_profile_to_beta(self):
        spec = SyntheticSpec(phase_profile=(0.6, 0.5, 0.3))
        beta = spec.resolved_beta()
        assert beta["intercept"] == logit(0.6)
        assert beta["during_peak"] == logit(0.5) - logit(0.6)
        assert beta["post_peak"] == logit(0.3) - logit(0.6)

    def test_location_names_unique(self):
        names = location_names(40)
        assert len(set(names)) == 40

    def test_grouped_mode_assigns_groups(self, tmp_path):
        paths = simulate(SyntheticSpec(seed=9, grouped=True, base_daily_mentions=2),
                         tmp_path)
        lines = read_lines(paths["corpus"])
        records = [json.loads(l) for l in lines]
        assert all("group_id" in r for r in records)
        regions = json.loads(paths["regions"].read_text())
        assert regions["events"]["simev"]["groups"]
