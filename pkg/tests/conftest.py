import numpy as np
import pytest

from wirelift.synth import GenParams, generate, project_gt


@pytest.fixture(scope="session")
def scene_bank():
    """A handful of generated scenes with ground truth, shared across tests."""
    bank = []
    for seed in range(8):
        grid = [(1, 1), (2, 2), (2, 3), (3, 3)][seed % 4]
        scene = generate(seed, grid)
        bank.append((scene, project_gt(scene)))
    return bank


def ray_blocked(origin, target, cuboids, eps=1e-7):
    """Slab-method occlusion oracle, independent of the production ray caster:
    does the open segment origin->target enter any cuboid's interior?"""
    origin = np.asarray(origin, dtype=np.float64)
    d = np.asarray(target, dtype=np.float64) - origin
    for c in cuboids:
        lo = np.asarray(c.min_corner)
        hi = np.asarray(c.max_corner)
        tmin, tmax = -np.inf, np.inf
        degenerate = False
        for k in range(3):
            if abs(d[k]) < 1e-300:
                if not (lo[k] <= origin[k] <= hi[k]):
                    degenerate = True
                    break
                continue
            ta = (lo[k] - origin[k]) / d[k]
            tb = (hi[k] - origin[k]) / d[k]
            if ta > tb:
                ta, tb = tb, ta
            tmin = max(tmin, ta)
            tmax = min(tmax, tb)
        if degenerate:
            continue
        if tmin <= tmax and eps < tmin < 1.0 - eps:
            return True
    return False
