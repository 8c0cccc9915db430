import numpy as np
import pytest
from PIL import Image
from skimage.metrics import structural_similarity

from exploration_engine.local_map import (
    FREE,
    OCCUPIED,
    UNKNOWN,
    DimensionMismatchError,
    IntegrationError,
    LocalMap,
    MapPatch,
    MergeError,
    WindowSizeError,
    coverage_fraction,
    integrate_scan,
    map_ssim,
    merge_maps,
    ssim_arrays,
    truth_states,
)
from exploration_engine.world import GroundTruthGrid, Pose, ScanResult, SensorParams, raycast_scan


def _scan(free=(), occupied=()):
    return ScanResult((0, 0), np.array(free, dtype=np.int64), np.array(occupied, dtype=np.int64))


def _patch(indices, states, source=1):
    return MapPatch(np.array(indices, dtype=np.int64), np.array(states, dtype=np.int8), source)


def test_full_room_scan_reduces_unknown_by_scan_size(room_grid):
    grid = room_grid(21, 21)
    local = LocalMap.for_world(grid)
    scan = raycast_scan(grid, Pose.at_cell(10, 10, grid.resolution), SensorParams())

    before = local.unknown_count()
    integrate_scan(local, scan)
    assert before - local.unknown_count() == len(scan)
    assert local.version == 1


def test_integrating_twice_is_idempotent(room_grid):
    grid = room_grid(15, 15)
    scan = raycast_scan(grid, Pose.at_cell(7, 7, grid.resolution), SensorParams(0.5, 360))
    once = integrate_scan(LocalMap.for_world(grid), scan)
    twice = integrate_scan(integrate_scan(LocalMap.for_world(grid), scan), scan)
    assert np.array_equal(once.cells, twice.cells)


def test_occupied_overrides_free_in_either_order():
    local = LocalMap(4, 4, 0.1)
    integrate_scan(local, _scan(free=[5]))
    integrate_scan(local, _scan(occupied=[5]))
    assert local.state(1, 1) == OCCUPIED

    integrate_scan(local, _scan(free=[5]))
    assert local.state(1, 1) == OCCUPIED


def test_scan_outside_map_rejected():
    local = LocalMap(3, 3, 0.1)
    with pytest.raises(IntegrationError):
        integrate_scan(local, _scan(free=[9]))
    with pytest.raises(IntegrationError):
        integrate_scan(local, _scan(occupied=[-1]))


def test_merging_empty_patch_only_bumps_version():
    local = LocalMap(5, 5, 0.1)
    local.cells[2, 2] = FREE
    before = local.cells.copy()
    merge_maps(local, _patch([], []))
    assert np.array_equal(local.cells, before)
    assert local.version == 1


def test_merging_known_cells_is_idempotent():
    local = LocalMap(5, 5, 0.1)
    local.cells[1, 1] = FREE
    local.cells[3, 3] = OCCUPIED
    before = local.cells.copy()
    merge_maps(local, local.to_patch(source=0))
    assert np.array_equal(local.cells, before)


def test_disjoint_patches_commute():
    rng = np.random.default_rng(3)
    cells = np.arange(25)
    rng.shuffle(cells)
    a = _patch(cells[:12], rng.choice([FREE, OCCUPIED], 12))
    b = _patch(cells[12:], rng.choice([FREE, OCCUPIED], 13))

    ab = merge_maps(merge_maps(LocalMap(5, 5, 0.1), a), b)
    ba = merge_maps(merge_maps(LocalMap(5, 5, 0.1), b), a)
    assert np.array_equal(ab.cells, ba.cells)


def test_cross_merging_two_maps_converges():
    rng = np.random.default_rng(5)
    for _ in range(30):
        a, b = LocalMap(7, 6, 0.1), LocalMap(7, 6, 0.1)
        a.cells[:] = rng.choice([UNKNOWN, FREE, OCCUPIED], size=(6, 7))
        b.cells[:] = rng.choice([UNKNOWN, FREE, OCCUPIED], size=(6, 7))
        from_a, from_b = a.to_patch(source=0), b.to_patch(source=1)

        merge_maps(b, from_a)
        merge_maps(a, from_b)
        assert np.array_equal(a.cells, b.cells)
        assert np.array_equal(a.known_mask(), b.known_mask())


def test_patch_outside_map_rejected():
    with pytest.raises(MergeError):
        merge_maps(LocalMap(3, 3, 0.1), _patch([9], [FREE]))


def test_patch_carries_known_cells_only():
    with pytest.raises(ValueError):
        _patch([0], [UNKNOWN])


def test_to_patch_excludes_cells_the_requester_knows():
    local = LocalMap(3, 3, 0.1)
    local.cells[0, :] = FREE
    exclude = np.zeros(9, dtype=bool)
    exclude[1] = True
    patch = local.to_patch(source=2, exclude=exclude)
    assert patch.indices.tolist() == [0, 2]
    assert patch.byte_size == 10
    assert patch.source == 2


# ════════════════════════════════════════════════════════════════════════════
# COVERAGE + SSIM
# ════════════════════════════════════════════════════════════════════════════

def test_coverage_of_unknown_map_is_zero(room_grid):
    grid = room_grid(5, 5)
    assert coverage_fraction(LocalMap.for_world(grid), grid) == 0.0


def test_coverage_of_true_map_is_one(room_grid):
    grid = room_grid(5, 5)
    local = LocalMap.for_world(grid)
    local.cells[:] = truth_states(grid)
    assert coverage_fraction(local, grid) == 1.0


def test_coverage_counts_correct_cells_over_all_cells(room_grid):
    grid = room_grid(5, 5)
    local = LocalMap.for_world(grid)
    local.cells[1:4, 1:4] = FREE
    local.cells[3, 3] = UNKNOWN
    assert coverage_fraction(local, grid) == pytest.approx(8 / 25)


def test_wrong_cells_do_not_count(room_grid):
    grid = room_grid(5, 5)
    local = LocalMap.for_world(grid)
    local.cells[:] = OCCUPIED
    assert coverage_fraction(local, grid) == pytest.approx(16 / 25)


def test_coverage_dimension_mismatch(room_grid):
    with pytest.raises(DimensionMismatchError):
        coverage_fraction(LocalMap(4, 4, 0.1), room_grid(5, 5))


def test_ssim_of_identical_map_is_one(room_grid):
    grid = room_grid(12, 10)
    local = LocalMap.for_world(grid)
    local.cells[:] = truth_states(grid)
    assert map_ssim(local, grid, 7) == pytest.approx(1.0)


def test_unknown_map_scores_below_one():
    truth = GroundTruthGrid(8, 8, 0.1, np.zeros((8, 8), dtype=bool))
    assert map_ssim(LocalMap(8, 8, 0.1), truth, 3) < 1.0


def test_checkerboard_against_inverse():
    checker = (np.indices((6, 6)).sum(axis=0) % 2).astype(bool)
    truth = GroundTruthGrid(6, 6, 0.1, checker)
    local = LocalMap(6, 6, 0.1)
    local.cells[:] = np.where(checker, FREE, OCCUPIED)

    # every 2x2 window: equal means 0.5, variances 0.25, covariance -0.25
    c2 = (0.03 * 1.0) ** 2
    expected = (c2 - 0.5) / (c2 + 0.5)
    assert map_ssim(local, truth, 2) == pytest.approx(expected)


def test_ssim_matches_reference_for_odd_windows():
    rng = np.random.default_rng(11)
    levels = np.array([0.0, 0.5, 1.0])
    for window in (3, 5, 7):
        a = levels[rng.integers(0, 3, size=(20, 24))]
        b = levels[rng.integers(0, 3, size=(20, 24))]
        reference = structural_similarity(
            a, b, win_size=window, data_range=1.0,
            gaussian_weights=False, use_sample_covariance=False,
        )
        assert ssim_arrays(a, b, window) == pytest.approx(reference, abs=1e-6)


@pytest.mark.parametrize("window", [1, 6])
def test_bad_ssim_window(room_grid, window):
    grid = room_grid(5, 5)
    with pytest.raises(WindowSizeError):
        map_ssim(LocalMap.for_world(grid), grid, window)


def test_pgm_export_levels(tmp_path):
    local = LocalMap(3, 1, 0.1)
    local.cells[0, 0] = OCCUPIED
    local.cells[0, 2] = FREE
    path = tmp_path / "map.pgm"
    local.save_pgm(path)

    with Image.open(path) as img:
        assert img.mode == 'L'
        assert np.asarray(img).tolist() == [[0, 128, 255]]
