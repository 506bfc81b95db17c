"""Text scene and forecast files: exact round-trips and strict errors."""

import numpy as np
import pytest

from eqforecast.scene import ForecastSet, GroundTruth, Scene
from eqforecast.sceneio import (
    FileFormatError,
    load_scene_dir,
    read_forecast,
    read_scene,
    save_scene_dir,
    write_forecast,
    write_scene,
)


def random_scene(rng, a=3, t_in=5, t_out=4, l=2, k=6):
    hist = rng.normal(0.0, 1e3, size=(a, t_in, 2))
    lanes = rng.normal(0.0, 1e3, size=(l, k, 2))
    hist[0, 0] = [0.1, np.pi]  # awkward decimals on purpose
    scene = Scene(
        histories=hist,
        agent_mask=np.ones(a),
        map_polylines=lanes,
        lane_mask=np.ones(l),
    )
    truth = GroundTruth(rng.normal(0.0, 1e3, size=(a, t_out, 2)), np.ones(a))
    return scene, truth


def test_scene_round_trip_is_bitwise(tmp_path, rng):
    scene, truth = random_scene(rng)
    first = tmp_path / "a.txt"
    second = tmp_path / "b.txt"
    write_scene(scene, truth, first)
    back_scene, back_truth = read_scene(first)
    assert np.array_equal(back_scene.histories, scene.histories)
    assert np.array_equal(back_scene.map_polylines, scene.map_polylines)
    assert np.array_equal(back_truth.futures, truth.futures)
    write_scene(back_scene, back_truth, second)
    assert first.read_bytes() == second.read_bytes()


def test_scene_without_truth(tmp_path, rng):
    scene, _ = random_scene(rng)
    path = tmp_path / "scene.txt"
    write_scene(scene, None, path)
    back_scene, back_truth = read_scene(path)
    assert back_truth is None
    assert np.array_equal(back_scene.histories, scene.histories)
    write_scene(back_scene, None, tmp_path / "again.txt")
    assert path.read_bytes() == (tmp_path / "again.txt").read_bytes()


def test_masks_survive_round_trip(tmp_path, rng):
    scene, truth = random_scene(rng)
    hist = scene.histories.copy()
    hist[2] = 0.0
    mask = np.array([1.0, 1.0, 0.0])
    lanes = scene.map_polylines.copy()
    lanes[1] = 0.0
    fut = truth.futures.copy()
    fut[2] = 0.0
    scene = Scene(hist, mask, lanes, np.array([1.0, 0.0]))
    truth = GroundTruth(fut, mask.copy())
    path = tmp_path / "masked.txt"
    write_scene(scene, truth, path)
    back_scene, back_truth = read_scene(path)
    assert np.array_equal(back_scene.agent_mask, mask)
    assert np.array_equal(back_scene.lane_mask, [1.0, 0.0])
    assert np.array_equal(back_truth.agent_mask, mask)


def test_forecast_round_trip_is_bitwise(tmp_path, rng):
    traj = rng.normal(0.0, 10.0, size=(2, 3, 4, 2))
    logits = rng.normal(size=(2, 3))
    probs = np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True)
    fs = ForecastSet(traj, probs)
    selected = probs.argmax(axis=-1)
    first = tmp_path / "f.txt"
    write_forecast(fs, selected, first)
    back, back_sel = read_forecast(first)
    assert np.array_equal(back.trajectories, traj)
    assert np.array_equal(back.probabilities, probs)
    assert np.array_equal(back_sel, selected)
    write_forecast(back, back_sel, tmp_path / "g.txt")
    assert first.read_bytes() == (tmp_path / "g.txt").read_bytes()


def test_agent_count_mismatch_names_the_line(tmp_path, rng):
    scene, truth = random_scene(rng)
    path = tmp_path / "bad.txt"
    write_scene(scene, truth, path)
    text = path.read_text()
    path.write_text(text.replace("A 3", "A 4", 1))
    with pytest.raises(FileFormatError, match="expected agent header"):
        read_scene(path)
    try:
        read_scene(path)
    except FileFormatError as err:
        assert str(path) in str(err)


def test_malformed_number_reports_position(tmp_path, rng):
    scene, truth = random_scene(rng)
    path = tmp_path / "bad.txt"
    write_scene(scene, truth, path)
    lines = path.read_text().splitlines()
    lines[9] = "oops " + lines[9].split()[1]  # first history coordinate
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FileFormatError, match=":10:"):
        read_scene(path)


def test_wrong_magic_rejected(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("something-else 1\n")
    with pytest.raises(FileFormatError, match="expected"):
        read_scene(path)


def test_truncated_file_rejected(tmp_path, rng):
    scene, truth = random_scene(rng)
    path = tmp_path / "bad.txt"
    write_scene(scene, truth, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(FileFormatError, match="end of file"):
        read_scene(path)


def test_trailing_content_rejected(tmp_path, rng):
    scene, truth = random_scene(rng)
    path = tmp_path / "bad.txt"
    write_scene(scene, truth, path)
    path.write_text(path.read_text() + "extra stuff\n")
    with pytest.raises(FileFormatError, match="trailing"):
        read_scene(path)


def test_forecast_selected_out_of_range(tmp_path, rng):
    traj = rng.normal(size=(1, 2, 3, 2))
    fs = ForecastSet(traj, np.array([[0.5, 0.5]]))
    path = tmp_path / "f.txt"
    write_forecast(fs, np.array([1]), path)
    path.write_text(path.read_text().replace("selected 1", "selected 5"))
    with pytest.raises(FileFormatError, match="selected head"):
        read_forecast(path)


def test_scene_dir_round_trip(tmp_path, rng):
    pairs = [random_scene(rng) for _ in range(3)]
    pairs[1] = (pairs[1][0], None)
    written = save_scene_dir(pairs, tmp_path / "scenes")
    assert [p.name for p in written] == [f"scene_{i:05d}.txt" for i in range(3)]
    back = load_scene_dir(tmp_path / "scenes")
    assert len(back) == 3
    assert back[1][1] is None
    for (scene, truth), (b_scene, b_truth) in zip(pairs, back):
        assert np.array_equal(scene.histories, b_scene.histories)
        if truth is not None:
            assert np.array_equal(truth.futures, b_truth.futures)


def test_missing_scene_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_scene_dir(tmp_path / "nope")
