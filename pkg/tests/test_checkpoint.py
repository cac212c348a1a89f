"""Binary checkpoint round-trips and corruption detection."""

import struct
import zlib

import numpy as np
import pytest

from scenergy.checkpoint import (
    KIND_TAGS,
    MAGIC,
    dump_params,
    load_checkpoint,
    parse_params,
    save_checkpoint,
)
from scenergy.ebm import ConceptKind, EBMParams, energy_batch, init_params
from scenergy.errors import CheckpointError

ALL_KINDS = list(ConceptKind)


class TestRoundTrip:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_parameters_survive_as_float32(self, kind):
        params = init_params(kind, seed=3)
        restored = parse_params(dump_params(params))
        assert restored.kind is kind
        assert set(restored.weights) == set(params.weights)
        for name, tensor in params.weights.items():
            assert np.array_equal(
                restored.weights[name], tensor.astype(np.float32).astype(np.float64)
            )

    def test_serialization_idempotent_after_one_round(self):
        params = init_params(ConceptKind.CIRCLE, seed=1)
        once = parse_params(dump_params(params))
        assert dump_params(once) == dump_params(parse_params(dump_params(once)))

    def test_bytes_deterministic(self):
        params = init_params(ConceptKind.LEFT_OF, seed=5)
        assert dump_params(params) == dump_params(params)

    @pytest.mark.parametrize(
        "kind", [ConceptKind.LEFT_OF, ConceptKind.CIRCLE, ConceptKind.POSE_CIRCLE]
    )
    def test_energy_delta_bounded(self, kind):
        """32-bit storage perturbs random-input energies by less than 1e-5."""
        params = init_params(kind, seed=7)
        restored = parse_params(dump_params(params))
        rng = np.random.default_rng(0)
        n = 2 if kind.is_binary else 5
        coords = rng.uniform(0, 1, (64, n, kind.coord_dim))
        sizes = None
        if kind.is_binary:
            sizes = rng.uniform(0.04, 0.2, (64, 2, kind.coord_dim))
        before = energy_batch(params, coords, sizes)
        after = energy_batch(restored, coords, sizes)
        assert np.max(np.abs(before - after)) < 1e-5

    def test_file_round_trip(self, tmp_path):
        params = init_params(ConceptKind.BEHIND, seed=2)
        path = tmp_path / "behind.ckpt"
        save_checkpoint(params, path)
        restored = load_checkpoint(path)
        assert restored.kind is ConceptKind.BEHIND
        assert dump_params(restored) == path.read_bytes()


class TestFormat:
    def test_header_layout(self):
        params = init_params(ConceptKind.INSIDE, seed=0)
        data = dump_params(params)
        assert data[:4] == MAGIC
        version, tag, layers = struct.unpack("<HHH", data[4:10])
        assert version == 1
        assert tag == KIND_TAGS[ConceptKind.INSIDE]
        assert layers == len(params.weights)
        (crc,) = struct.unpack("<I", data[-4:])
        assert crc == zlib.crc32(data[:-4])

    def test_kind_tags_are_stable_and_unique(self):
        assert KIND_TAGS[ConceptKind.LEFT_OF] == 1
        assert KIND_TAGS[ConceptKind.POSE_CIRCLE] == 9
        assert len(set(KIND_TAGS.values())) == len(ConceptKind)


class TestCorruption:
    @pytest.fixture
    def data(self):
        return dump_params(init_params(ConceptKind.LINE, seed=4))

    def test_bad_magic(self, data):
        with pytest.raises(CheckpointError, match="magic"):
            parse_params(b"NOPE" + data[4:])

    def test_flipped_payload_byte_fails_crc(self, data):
        corrupt = bytearray(data)
        corrupt[100] ^= 0xFF
        with pytest.raises(CheckpointError, match="CRC"):
            parse_params(bytes(corrupt))

    def test_truncation_fails_crc(self, data):
        with pytest.raises(CheckpointError, match="CRC|truncated"):
            parse_params(data[:-9])

    def test_tiny_file_rejected(self):
        with pytest.raises(CheckpointError, match="truncated"):
            parse_params(b"SREM\x01\x00")

    def test_unknown_version(self, data):
        forged = bytearray(data[:-4])
        struct.pack_into("<H", forged, 4, 9)
        forged += struct.pack("<I", zlib.crc32(bytes(forged)))
        with pytest.raises(CheckpointError, match="version"):
            parse_params(bytes(forged))

    def test_unknown_kind_tag(self, data):
        forged = bytearray(data[:-4])
        struct.pack_into("<H", forged, 6, 999)
        forged += struct.pack("<I", zlib.crc32(bytes(forged)))
        with pytest.raises(CheckpointError, match="tag"):
            parse_params(bytes(forged))

    def test_wrong_kind_shape_table(self):
        """A payload saved as one kind cannot masquerade as another."""
        circle = dump_params(init_params(ConceptKind.CIRCLE, seed=0))
        forged = bytearray(circle[:-4])
        struct.pack_into("<H", forged, 6, KIND_TAGS[ConceptKind.LEFT_OF])
        forged += struct.pack("<I", zlib.crc32(bytes(forged)))
        with pytest.raises(CheckpointError, match="tensor|tensors"):
            parse_params(bytes(forged))

    def test_missing_tensor_rejected_on_save(self):
        params = init_params(ConceptKind.LEFT_OF, seed=0)
        del params.weights["head.1.b"]
        with pytest.raises(CheckpointError, match="missing"):
            dump_params(params)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            load_checkpoint(tmp_path / "absent.ckpt")
