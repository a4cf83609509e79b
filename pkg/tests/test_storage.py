"""MRK1 container and checkpoint serialization."""

import numpy as np
import pytest

from mrdiff import NetConfig, init_denoiser
from mrdiff.errors import CheckpointError, FormatError
from mrdiff.selfsup import checkpoint_payload, restore_checkpoint
from mrdiff.storage import (
    KIND_COILS,
    KIND_IMAGE,
    KIND_KSPACE,
    KIND_MASK,
    load_array,
    load_checkpoint,
    save_array,
    save_checkpoint,
)
from mrdiff.tensor import AdamState


def crandn32(rng, shape):
    """Complex data that is exactly representable in float32 on disk."""
    arr = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return arr.real.astype(np.float32).astype(np.float64) + 1j * arr.imag.astype(np.float32).astype(np.float64)


class TestMRK1:
    @pytest.mark.parametrize(
        "kind,shape",
        [(KIND_IMAGE, (6, 7)), (KIND_KSPACE, (3, 6, 7)), (KIND_COILS, (2, 5, 5))],
    )
    def test_complex_roundtrip(self, tmp_path, rng, kind, shape):
        data = crandn32(rng, shape)
        path = tmp_path / "x.mrk"
        save_array(path, data, kind)
        back, back_kind = load_array(path)
        assert back_kind == kind
        assert np.array_equal(back, data)

    def test_mask_roundtrip(self, tmp_path, rng):
        mask = (rng.random((9, 9)) < 0.3).astype(np.uint8)
        path = tmp_path / "m.mrk"
        save_array(path, mask, KIND_MASK)
        back, kind = load_array(path)
        assert kind == KIND_MASK
        assert np.array_equal(back, mask)

    def test_file_bytes_stable(self, tmp_path, rng):
        data = crandn32(rng, (4, 4))
        p1, p2 = tmp_path / "a.mrk", tmp_path / "b.mrk"
        save_array(p1, data, KIND_IMAGE)
        back, _ = load_array(p1)
        save_array(p2, back, KIND_IMAGE)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_rejected(self, tmp_path, rng):
        path = tmp_path / "x.mrk"
        save_array(path, crandn32(rng, (4, 4)), KIND_IMAGE)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"JUNK"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="magic"):
            load_array(path)

    def test_inconsistent_dims_rejected(self, tmp_path, rng):
        path = tmp_path / "x.mrk"
        save_array(path, crandn32(rng, (4, 4)), KIND_IMAGE)
        raw = bytearray(path.read_bytes())
        raw[12:16] = (99).to_bytes(4, "little")  # header h no longer matches payload
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="payload"):
            load_array(path)

    def test_truncated_rejected(self, tmp_path, rng):
        path = tmp_path / "x.mrk"
        save_array(path, crandn32(rng, (4, 4)), KIND_IMAGE)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FormatError):
            load_array(path)

    def test_size_cap_checked_before_allocation(self, tmp_path):
        import struct

        path = tmp_path / "huge.mrk"
        path.write_bytes(struct.pack("<4sIIII", b"MRK1", KIND_KSPACE, 1 << 12, 1 << 14, 1 << 14))
        with pytest.raises(FormatError, match="size"):
            load_array(path)

    def test_nonbinary_mask_rejected(self, tmp_path):
        import struct

        path = tmp_path / "m.mrk"
        path.write_bytes(struct.pack("<4sIIII", b"MRK1", KIND_MASK, 1, 2, 2) + bytes([0, 1, 2, 1]))
        with pytest.raises(FormatError, match="binary"):
            load_array(path)


class TestCheckpoint:
    def test_roundtrip_bit_identical(self, tmp_path, rng):
        tensors = {
            "a.w": rng.standard_normal((3, 4)),
            "a.b": rng.standard_normal(4),
            "scalarish": rng.standard_normal((1,)),
        }
        cfg = {"channels": 8, "lr": 0.002}
        path = tmp_path / "c.ckpt"
        save_checkpoint(path, tensors, cfg, step=17)
        back, cfg2, step = load_checkpoint(path)
        assert step == 17
        assert cfg2["channels"] == "8"
        assert set(back) == set(tensors)
        for k in tensors:
            assert np.array_equal(back[k], tensors[k])

    def test_training_state_roundtrip(self, tmp_path):
        cfg = NetConfig(channels=4, blocks=2, tokens=2, contrasts=3)
        params = init_denoiser(cfg, seed=5)
        state = AdamState.for_params(params.as_dict())
        state.step = 9
        for k in state.m:
            state.m[k] += 0.25
        path = tmp_path / "t.ckpt"
        save_checkpoint(
            path,
            checkpoint_payload(params, state),
            {"channels": 4, "blocks": 2, "tokens": 2, "contrasts": 3, "T": 1000},
            step=9,
        )
        params2, state2, _, step = restore_checkpoint(path)
        assert step == 9 and state2.step == 9
        for (n1, p1), (n2, p2) in zip(params.named(), params2.named()):
            assert n1 == n2
            assert np.array_equal(p1.data, p2.data)
        for k in state.m:
            assert np.array_equal(state.m[k], state2.m[k])

    def test_mismatched_blocks_names_offenders(self, tmp_path):
        cfg = NetConfig(channels=4, blocks=1, tokens=2, contrasts=1)
        params = init_denoiser(cfg, seed=0)
        state = AdamState.for_params(params.as_dict())
        path = tmp_path / "t.ckpt"
        save_checkpoint(
            path,
            checkpoint_payload(params, state),
            {"channels": 4, "blocks": 1, "tokens": 2, "contrasts": 1, "T": 1000},
            step=0,
        )
        with pytest.raises(CheckpointError, match="block1"):
            restore_checkpoint(path, expect_config=NetConfig(channels=4, blocks=2, tokens=2, contrasts=1))

    def test_corrupt_checkpoint_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTACKPT\nblob 0\n")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
