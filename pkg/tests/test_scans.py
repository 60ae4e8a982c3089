"""Tests for scan cleaning, alignment, and averaging."""

import numpy as np
import pytest

from orthofrac.crack import GRID_STEP, CrackSurface
from orthofrac.scans import AnchoredScan, align_and_average_scans, clean_scan


def grid(y_hi, z_hi):
    y = np.arange(int(round(y_hi / GRID_STEP)) + 1) * GRID_STEP
    z = np.arange(int(round(z_hi / GRID_STEP)) + 1) * GRID_STEP
    return y, z


def scan_from(values, variant="scan"):
    ny, nz = values.shape
    y = np.arange(ny) * GRID_STEP
    z = np.arange(nz) * GRID_STEP
    return CrackSurface(y=y, z=z, x=np.asarray(values, dtype=float),
                        variant=variant)


def plane_scan(y_hi=2.0, z_hi=3.0, a=2.0, b=0.3, c=-0.1):
    y, z = grid(y_hi, z_hi)
    x = a + b * y[:, None] + c * z[None, :]
    return CrackSurface(y=y, z=z, x=x, variant="scan")


class TestCleanScan:
    def test_validates_cutoff(self):
        with pytest.raises(ValueError, match="cutoff"):
            clean_scan(plane_scan(), k=0.0)

    @pytest.mark.parametrize("window", [1, 2, 4])
    def test_validates_window(self, window):
        with pytest.raises(ValueError, match="window"):
            clean_scan(plane_scan(), window=window)

    def test_rejects_all_undefined(self):
        surf = scan_from(np.full((4, 4), np.nan))
        with pytest.raises(ValueError, match="no defined"):
            clean_scan(surf)

    def test_plane_removed_exactly(self):
        cleaned = clean_scan(plane_scan())
        assert cleaned.variant == "scan"
        assert np.allclose(cleaned.x, 0.0, atol=1e-9)

    def test_single_spike_replaced_by_local_median(self):
        scan = plane_scan(a=1.5, b=0.0, c=0.0)
        x = scan.x.copy()
        x[10, 12] += 10.0
        spiked = CrackSurface(y=scan.y, z=scan.z, x=x, variant="scan")
        cleaned = clean_scan(spiked)
        # the flat background detrends to ~0 and the spike lands on its
        # local median; the spike tilts the global plane fit a little,
        # which bounds everything at the few-percent level
        assert abs(cleaned.x[10, 12]) < 0.05
        off_spike = np.ones_like(x, dtype=bool)
        off_spike[10, 12] = False
        assert np.all(np.abs(cleaned.x[off_spike]) < 0.05)

    def test_spike_with_reference_region_restored_exactly(self):
        # fitting the plane on a trusted region away from the spike
        # removes the leverage, so the replacement is exact
        scan = plane_scan(a=1.5, b=0.0, c=0.0)
        x = scan.x.copy()
        x[10, 12] += 10.0
        spiked = CrackSurface(y=scan.y, z=scan.z, x=x, variant="scan")
        reference = np.ones_like(x, dtype=bool)
        reference[8:13, 10:15] = False
        cleaned = clean_scan(spiked, reference=reference)
        assert np.all(np.abs(cleaned.x) < 1e-9)

    def test_reference_region_controls_plane_fit(self):
        # plane plus a broad bump outside the reference region: the fit
        # must come from the reference zone only, so the bump survives
        # detrending at full height. Mild noise keeps the outlier scale
        # healthy so the smooth bump is not mistaken for spikes.
        rng = np.random.default_rng(9)
        y, z = grid(2.0, 6.0)
        bump = 2.0 * np.exp(-(((z[None, :] - 5.0) / 1.2) ** 2)
                            - (((y[:, None] - 1.0) / 1.2) ** 2))
        x = (1.0 + 0.2 * y[:, None] + 0.1 * z[None, :] + bump
             + rng.normal(0.0, 0.02, (len(y), len(z))))
        scan = CrackSurface(y=y, z=z, x=x, variant="scan")
        reference = np.zeros_like(x, dtype=bool)
        reference[:, z <= 2.0] = True
        cleaned = clean_scan(scan, reference=reference)
        ref_resid = cleaned.x[reference] - bump[reference]
        assert np.all(np.abs(ref_resid) < 0.15)
        assert cleaned.x[10, 50] == pytest.approx(2.0, abs=0.15)

    def test_reference_region_validation(self):
        scan = plane_scan()
        with pytest.raises(ValueError, match="reference"):
            clean_scan(scan, reference=np.zeros((2, 2), dtype=bool))
        with pytest.raises(ValueError, match="reference"):
            clean_scan(scan, reference=np.zeros_like(scan.x, dtype=bool))

    def test_undefined_nodes_survive_and_do_not_poison(self):
        scan = plane_scan(a=1.0, b=0.0, c=0.0)
        x = scan.x.copy()
        x[5, 5] = np.nan
        x[5, 7] += 10.0
        holed = CrackSurface(y=scan.y, z=scan.z, x=x, variant="scan")
        cleaned = clean_scan(holed)
        assert np.isnan(cleaned.x[5, 5])
        assert abs(cleaned.x[5, 7]) < 0.05

    def test_salt_and_pepper_noise_removed(self):
        # seeded injection oracle: corrupt 1 % of a noisy plane with
        # large spikes; at least 99 % of them must be restored with
        # under 0.5 % false positives.
        rng = np.random.default_rng(42)
        y, z = grid(6.0, 8.0)
        noise = rng.normal(0.0, 0.02, (len(y), len(z)))
        x = 3.0 + 0.1 * y[:, None] + 0.05 * z[None, :] + noise
        n = x.size
        hit = rng.choice(n, size=int(round(0.01 * n)), replace=False)
        amp = rng.uniform(8.0, 15.0, len(hit)) * rng.choice([-1.0, 1.0], len(hit))
        flat = x.ravel()
        flat[hit] += amp
        corrupted = CrackSurface(y=y, z=z, x=flat.reshape(x.shape), variant="scan")
        cleaned = clean_scan(corrupted)

        # replicate the deterministic plane fit to see which nodes the
        # outlier pass actually touched
        basis = np.column_stack([np.ones(n), np.repeat(y, len(z)),
                                 np.tile(z, len(y))])
        coef, *_ = np.linalg.lstsq(basis, corrupted.x.ravel(), rcond=None)
        detrended = corrupted.x - (coef[0] + coef[1] * y[:, None]
                                   + coef[2] * z[None, :])
        touched = np.abs(cleaned.x - detrended) > 1e-9
        injected = np.zeros(n, dtype=bool)
        injected[hit] = True
        injected = injected.reshape(x.shape)
        assert np.count_nonzero(touched & injected) >= 0.99 * len(hit)
        false_pos = np.count_nonzero(touched & ~injected)
        assert false_pos < 0.005 * (n - len(hit))
        # restored spikes sit back on the (noisy) plane
        resid = cleaned.x[injected]
        assert np.all(np.abs(resid - np.median(cleaned.x)) < 0.5)

    def test_deterministic(self):
        scan = plane_scan()
        x = scan.x + np.random.default_rng(1).normal(0.0, 0.1, scan.x.shape)
        noisy = CrackSurface(y=scan.y, z=scan.z, x=x, variant="scan")
        a = clean_scan(noisy)
        b = clean_scan(noisy)
        assert np.array_equal(a.x, b.x)


class TestAnchoredScan:
    def test_accepts_finite_anchor(self):
        rec = AnchoredScan(plane_scan(), (1.0, 2, 3.5))
        assert rec.anchor == (1.0, 2.0, 3.5)

    def test_rejects_non_finite_anchor(self):
        with pytest.raises(ValueError, match="anchor"):
            AnchoredScan(plane_scan(), (1.0, np.nan, 0.0))

    def test_rejects_wrong_length(self):
        with pytest.raises((ValueError, TypeError)):
            AnchoredScan(plane_scan(), (1.0, 2.0))


class TestAlignAndAverage:
    def test_rejects_empty_list(self):
        with pytest.raises(ValueError, match="at least one"):
            align_and_average_scans([], (0.0, 0.0, 0.0))

    def test_single_scan_is_translated(self):
        scan = plane_scan()
        out = align_and_average_scans(
            [AnchoredScan(scan, (1.0, 0.0, 0.0))], (3.5, 0.3, -0.2))
        assert np.allclose(out.x, scan.x + 2.5, equal_nan=True)
        assert np.allclose(out.y, scan.y + 0.3)
        assert np.allclose(out.z, scan.z - 0.2)
        assert out.variant == "average"

    def test_identical_scans_under_shifted_frames(self):
        # the same physical surface recorded in two shifted scanner
        # frames must collapse back onto itself
        scan = plane_scan()
        shifted = scan.translated((0.4, 0.5, -1.2))
        out = align_and_average_scans(
            [AnchoredScan(scan, (2.0, 1.0, 1.0)),
             AnchoredScan(shifted, (2.4, 1.5, -0.2))], (2.0, 1.0, 1.0))
        assert np.allclose(out.x, scan.x, atol=1e-9)
        assert np.allclose(out.y, scan.y)
        assert np.allclose(out.z, scan.z)

    def test_four_scan_average_suppresses_noise(self):
        rng = np.random.default_rng(5)
        y, z = grid(4.0, 6.0)
        shape = (len(y), len(z))
        sigma = 0.5
        scans = [AnchoredScan(CrackSurface(
            y=y, z=z, x=rng.normal(0.0, sigma, shape), variant="scan"),
            (0.0, 0.0, 0.0)) for _ in range(4)]
        out = align_and_average_scans(scans, (0.0, 0.0, 0.0))
        rms = float(np.sqrt(np.mean(out.x ** 2)))
        assert 0.4 * sigma < rms < 0.6 * sigma

    def test_off_lattice_anchor_is_snapped(self):
        scan = plane_scan()
        out = align_and_average_scans(
            [AnchoredScan(scan, (0.0, 0.0, 0.13))], (0.0, 0.0, 0.0))
        # the z shift -0.13 snaps to -0.1, keeping the lattice intact
        assert np.allclose(out.z, scan.z - 0.1)

    def test_disjoint_scans_raise(self):
        scan = plane_scan(z_hi=1.0)
        recs = [AnchoredScan(scan, (0.0, 0.0, 0.0)),
                AnchoredScan(scan, (0.0, 0.0, 10.0))]
        with pytest.raises(ValueError, match="disjoint"):
            align_and_average_scans(recs, (0.0, 0.0, 0.0))

    def test_common_domain_excludes_partial_nodes(self):
        y, z = grid(0.4, 0.4)
        full = np.ones((len(y), len(z)))
        holed = full.copy()
        holed[2, 2] = np.nan
        recs = [AnchoredScan(CrackSurface(y=y, z=z, x=full, variant="scan"),
                             (0.0, 0.0, 0.0)),
                AnchoredScan(CrackSurface(y=y, z=z, x=holed, variant="scan"),
                             (0.0, 0.0, 0.0))]
        out = align_and_average_scans(recs, (0.0, 0.0, 0.0))
        assert np.isnan(out.x[2, 2])
        other = np.ones_like(full, dtype=bool)
        other[2, 2] = False
        assert np.allclose(out.x[other], 1.0)

    def test_no_common_node_raises(self):
        y, z = grid(0.2, 0.2)
        a = np.full((len(y), len(z)), np.nan)
        a[0, 0] = 1.0
        b = np.full((len(y), len(z)), np.nan)
        b[2, 2] = 1.0
        recs = [AnchoredScan(CrackSurface(y=y, z=z, x=a, variant="scan"),
                             (0.0, 0.0, 0.0)),
                AnchoredScan(CrackSurface(y=y, z=z, x=b, variant="scan"),
                             (0.0, 0.0, 0.0))]
        with pytest.raises(ValueError, match="share no defined"):
            align_and_average_scans(recs, (0.0, 0.0, 0.0))
