import struct

import numpy as np
import pytest

from snnlab.datasets import (Dataset, IdxDimensionError, IdxError,
                             IdxMagicError, IdxTruncatedError, load_idx,
                             read_idx, synth_dataset)


def _idx_bytes(dims, payload):
    head = bytes([0, 0, 0x08, len(dims)]) + struct.pack(f">{len(dims)}I", *dims)
    return head + bytes(payload)


class TestIdx:
    def test_hand_decoded_2x2_image(self, tmp_path):
        p = tmp_path / "img.idx"
        p.write_bytes(_idx_bytes((1, 2, 2), [0, 128, 255, 64]))
        ds = load_idx(p)
        assert ds.images.shape == (1, 2, 2, 1)
        want = np.array([[0.0, 128 / 255], [1.0, 64 / 255]])
        assert np.allclose(ds.images[0, :, :, 0], want)
        assert np.allclose(ds.images[0, :, :, 0],
                           [[0.0, 0.50196], [1.0, 0.25098]], atol=1e-5)

    def test_labels_file(self, tmp_path):
        pi = tmp_path / "img.idx"
        pl = tmp_path / "lbl.idx"
        pi.write_bytes(_idx_bytes((2, 2, 2), [10] * 8))
        pl.write_bytes(_idx_bytes((2,), [1, 0]))
        ds = load_idx(pi, pl)
        assert ds.labels.tolist() == [1, 0]

    def test_wrong_magic_names_offset(self, tmp_path):
        p = tmp_path / "bad.idx"
        p.write_bytes(bytes([7, 0, 8, 1]) + struct.pack(">I", 0))
        with pytest.raises(IdxMagicError, match="offset 0"):
            read_idx(p)

    def test_wrong_type_byte(self, tmp_path):
        p = tmp_path / "bad.idx"
        p.write_bytes(bytes([0, 0, 0x0D, 1]) + struct.pack(">I", 0))
        with pytest.raises(IdxMagicError, match="0x0d"):
            read_idx(p)

    def test_truncated_payload_reports_counts(self, tmp_path):
        p = tmp_path / "bad.idx"
        p.write_bytes(_idx_bytes((2, 3), [1, 2, 3]))  # needs 6, has 3
        with pytest.raises(IdxTruncatedError, match="expected 6"):
            read_idx(p)

    def test_dimension_count_out_of_range(self, tmp_path):
        p = tmp_path / "bad.idx"
        p.write_bytes(bytes([0, 0, 8, 5]) + struct.pack(">5I", 1, 1, 1, 1, 1))
        with pytest.raises(IdxDimensionError):
            read_idx(p)

    def test_mismatched_label_count(self, tmp_path):
        pi = tmp_path / "img.idx"
        pl = tmp_path / "lbl.idx"
        pi.write_bytes(_idx_bytes((2, 2, 2), [0] * 8))
        pl.write_bytes(_idx_bytes((3,), [0, 1, 0]))
        with pytest.raises(IdxDimensionError):
            load_idx(pi, pl)

    def test_idx_errors_are_valueerrors(self):
        assert issubclass(IdxError, ValueError)


class TestSynth:
    def test_determinism(self):
        a = synth_dataset("bars", 20, seed=7)
        b = synth_dataset("bars", 20, seed=7)
        assert (a.images == b.images).all()
        assert (a.labels == b.labels).all()

    def test_seeds_differ(self):
        a = synth_dataset("two-gaussians", 20, seed=1)
        b = synth_dataset("two-gaussians", 20, seed=2)
        assert not (a.images == b.images).all()

    def test_class_balance(self):
        for n in (10, 11):
            ds = synth_dataset("bars", n, seed=0)
            ones = int(ds.labels.sum())
            assert abs(ones - n / 2) <= 0.5

    def test_range_and_shape(self):
        ds = synth_dataset("two-gaussians", 6, seed=0, size=12)
        assert ds.images.shape == (6, 12, 12, 1)
        assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0

    def test_noiseless_bars_are_binary(self):
        ds = synth_dataset("bars", 6, seed=0, noise=0.0)
        assert set(np.unique(ds.images)) <= {0.0, 1.0}

    def test_blob_centroids_shift_with_class(self):
        # centres overlap by design, so the separation shows up in the class
        # means rather than in every individual sample
        ds = synth_dataset("two-gaussians", 200, seed=3, noise=0.0)
        size = ds.images.shape[1]
        yy = np.arange(size)
        cents = []
        for img in ds.images:
            m = img[:, :, 0]
            cents.append((m.sum(axis=1) * yy).sum() / m.sum())
        cents = np.array(cents)
        m0 = cents[ds.labels == 0].mean()
        m1 = cents[ds.labels == 1].mean()
        assert m0 < size / 2 < m1
        assert 0.5 < m1 - m0 < 2.0
        # overlap: at least one sample of each class crosses the midline
        assert (cents[ds.labels == 0] > size / 2).any()
        assert (cents[ds.labels == 1] < size / 2).any()

    def test_rejects_tiny_n(self):
        with pytest.raises(ValueError):
            synth_dataset("bars", 1, seed=0)

    def test_dataset_count_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(images=np.zeros((3, 4, 4, 1)), labels=np.zeros(2))
