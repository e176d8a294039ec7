import json

import numpy as np
import pytest

from streamrecover.core import epe, make_flow_constant
from streamrecover.io import report_to_json, write_ppm
from streamrecover.motion import propagate
from streamrecover.simulator import (
    RunConfig, SceneError, SceneSpec, generate_scene, run_simulation, sweep_gap, sweep_scale)


def test_static_scene():
    frames, flows = generate_scene(SceneSpec("static", (32, 32), 1, frames=5))
    assert all(np.array_equal(f, frames[0]) for f in frames)
    assert all(np.all(f == 0) for f in flows)


def test_translate_scene_flows():
    spec = SceneSpec("translate", (48, 48), 0, (2.0, 0.0), frames=5)
    frames, flows = generate_scene(spec)
    assert len(frames) == 5 and len(flows) == 4
    assert all(np.array_equal(f, make_flow_constant(48, 48, 2, 0)) for f in flows)
    # integer shift: frame 1 is frame 0 moved right by 2
    assert np.allclose(frames[1][:, 2:], frames[0][:, :-2], atol=1e-12)


def test_projectile_flows():
    spec = SceneSpec("projectile", (64, 64), 0, (1.0, 0.0), (0.0, 1.0), frames=5)
    _, flows = generate_scene(spec)
    for i, f in enumerate(flows):
        assert np.allclose(f, make_flow_constant(64, 64, 1.0, i + 0.5))


def test_projectile_ground_truth_obeys_propagation():
    spec = SceneSpec("projectile", (64, 64), 0, (-1.0, 0.5), (0.5, -0.25), frames=6)
    for k in range(2, 5):
        pred = propagate(spec.flow_between(k, k - 1), spec.flow_between(k, k - 2), 1.0)
        assert epe(pred, spec.flow_between(k, k + 1)) <= 1e-6


def test_scene_texture_reproducible():
    spec = SceneSpec("translate", (32, 40), 9, (0.5, 0.25))
    a, _ = generate_scene(spec)
    b, _ = generate_scene(spec)
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a, b))
    c, _ = generate_scene(SceneSpec("translate", (32, 40), 10, (0.5, 0.25)))
    assert not np.array_equal(a[0], c[0])
    assert 0.0 <= a[0].min() and a[0].max() <= 1.0 and a[0].std() > 0.05


@pytest.mark.parametrize("kw", [
    {"kind": "translate", "velocity": (9.0, 0.0), "frames": 4},
    {"kind": "static", "velocity": (1.0, 0.0)},
    {"kind": "translate", "acceleration": (1.0, 0.0)},
    {"kind": "translate", "frames": 3},
    {"kind": "translate", "size": (8, 64)},
    {"kind": "wobble"},
])
def test_scene_errors(kw):
    with pytest.raises(ValueError):
        SceneSpec(**{"size": (32, 32), **kw})


def test_scene_json_roundtrip(tmp_path):
    spec = SceneSpec("projectile", (40, 48), 2, (1.0, 0.0), (0.0, 0.5), frames=5)
    (tmp_path / "s.json").write_text(json.dumps(spec.to_dict()))
    assert SceneSpec.from_json(tmp_path / "s.json") == spec
    with pytest.raises(SceneError):
        SceneSpec.from_dict({**spec.to_dict(), "colour": "red"})


def test_all_high_res_passthrough():
    rep = run_simulation(RunConfig(SceneSpec("translate", (32, 32), 0, (1.0, 0.0)), "H H H H"))
    assert len(rep.per_frame) == 1
    r = rep.per_frame[0]
    assert r.psnr == 99.0 and r.provenance == "received" and r.epe is None


def test_static_lost_frame():
    rep = run_simulation(RunConfig(SceneSpec("static", (48, 48), 1), "H H H X"))
    r = rep.per_frame[0]
    assert r.psnr >= 50 and r.provenance == "predicted" and r.references == (0, 1, 2)
    assert r.epe == pytest.approx(0.0, abs=1e-9)


def test_report_deterministic_and_echoed():
    cfg = RunConfig(SceneSpec("translate", (48, 48), 0, (1.0, 0.5), frames=6), "H H H L4 X H", seed=11)
    a = report_to_json(run_simulation(cfg))
    b = report_to_json(run_simulation(cfg))
    assert a == b
    d = json.loads(a)
    assert d["config"]["seed"] == 11 and d["config"]["scene"]["texture_seed"] == 11
    assert d["config"]["trace"] == "H H H L4 X H"
    assert [r["provenance"] for r in d["per_frame"]] == ["enhanced", "predicted", "received"]


def test_history_modes_differ_after_a_recovery():
    spec = SceneSpec("translate", (48, 48), 0, (1.0, 0.5), frames=6)
    rec = run_simulation(RunConfig(spec, "H H H X X X"))
    ora = run_simulation(RunConfig(spec, "H H H X X X", history_mode="oracle"))
    assert rec.per_frame[0].psnr == ora.per_frame[0].psnr
    assert ora.per_frame[2].psnr > rec.per_frame[2].psnr


def test_trace_scene_mismatch():
    with pytest.raises(ValueError):
        run_simulation(RunConfig(SceneSpec("static", (32, 32)), "H H H H X"))
    with pytest.raises(ValueError):
        RunConfig(SceneSpec("static", (32, 32)), "H H H H", gap=0)


def test_lr_dimension_rule():
    from streamrecover.core import DimensionError
    with pytest.raises(DimensionError):
        run_simulation(RunConfig(SceneSpec("static", (32, 32)), "H H H L8"))


def test_directory_input(tmp_path):
    frames, _ = generate_scene(SceneSpec("translate", (32, 32), 0, (1.0, 0.0), frames=5))
    for i, f in enumerate(frames):
        write_ppm(tmp_path / f"f{i:03d}.ppm", f)
    rep = run_simulation(RunConfig(str(tmp_path), "H H H X L2"))
    assert [r.epe for r in rep.per_frame] == [None, None]
    assert rep.config_echo["scene"] == {"directory": str(tmp_path)}
    with pytest.raises(SceneError):
        sweep_scale(RunConfig(str(tmp_path), "H H H X L2"), [2])


def test_sweep_scale_static_zero():
    rows = sweep_scale(RunConfig(SceneSpec("static", (96, 96), 2), "H H H H"), [2, 4, 8, 12])
    assert [r["scale"] for r in rows] == [2, 4, 8, 12]
    assert all(r["epe_estimated"] <= 1e-9 and r["epe_predicted"] <= 1e-9 for r in rows)


def test_sweep_scale_preconditions():
    cfg = RunConfig(SceneSpec("static", (96, 96), 2), "H H H H")
    with pytest.raises(ValueError):
        sweep_scale(cfg, [4, 2])
    with pytest.raises(ValueError):
        sweep_scale(cfg, [1, 2])
    with pytest.raises(ValueError):
        sweep_scale(RunConfig(SceneSpec("static", (96, 96), 2), "H H H H", gap=2), [2])


def test_sweep_gap_static_and_consistency():
    rows = sweep_gap(RunConfig(SceneSpec("static", (64, 64), 1, frames=6), "H H H H H H"), [1, 2, 3])
    vals = [r["psnr_lossy"] for r in rows] + [r["psnr_lost"] for r in rows]
    assert max(vals) - min(vals) <= 0.1
    spec = SceneSpec("translate", (64, 64), 1, (1.0, 0.5), frames=4)
    g1 = sweep_gap(RunConfig(spec, "H H H H"), [1])[0]
    sim = run_simulation(RunConfig(spec, "H H H L4")).per_frame[0]
    assert g1["psnr_lossy"] == sim.psnr
    sim_lost = run_simulation(RunConfig(spec, "H H H X")).per_frame[0]
    assert g1["psnr_lost"] == sim_lost.psnr
    with pytest.raises(ValueError):
        sweep_gap(RunConfig(spec, "H H H H"), [2])
