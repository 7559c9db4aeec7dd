from importlib import resources

import numpy as np

from contsrtp.grid import bundled_network
from contsrtp.scenario import bundled_scenario
from contsrtp.synthetic import BASE_NOISE, GeneratorConfig, generate, screen, write_base_case


def test_bundled_case_is_reproducible(tmp_path):
    write_base_case(str(tmp_path))
    data = resources.files("contsrtp.data")
    for name in ("base.ini", "clusters20.csv", "prices64.csv", "targets10.csv", "thetas10.csv"):
        assert (tmp_path / name).read_text() == data.joinpath(name).read_text(encoding="utf-8")


def test_bundled_case_passes_screen():
    cfg = GeneratorConfig()
    specs, prices, targets, models, true_id = generate(cfg)
    s = screen(specs, prices, targets, models, true_id, BASE_NOISE, bundled_network(), cfg)
    assert s.acceptable(cfg.mu)
    assert np.all(s.gap > 0)  # every target has a unique clairvoyant price


def test_bundled_scenario_settings():
    sc = bundled_scenario()
    assert sc.nodes == [10] and sc.true_theta == {10: 4}
    assert len(sc.prices) == 64 and len(sc.thetas) == 10 and len(sc.clusters) == 20
    assert sc.horizon == 365 and sc.variant == "ConTS-B"
