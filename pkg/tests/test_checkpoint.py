import numpy as np
import pytest

from shona_asr.checkpoint import (Checkpoint, FORMAT_VERSION, load_checkpoint, params_hash,
                                  save_checkpoint)
from shona_asr.errors import ChecksumError, DataError


def sample_ckpt(rng):
    return Checkpoint(
        config={"seed": 3, "note": "test"},
        inventory_lines=["0 a a", "1 b b"],
        vocab=["<s>", "</s>", "<wb>", "<unk>", "a", "b"],
        tensors={
            "acoustic.conv1.kernels": rng.normal(size=(2, 1, 3, 3)).astype(np.float32),
            "lm.out.b": rng.normal(size=6).astype(np.float32),
        },
        best_metric=0.25,
        epoch=7,
    )


def test_round_trip_bit_exact(tmp_path, rng):
    ckpt = sample_ckpt(rng)
    path = tmp_path / "model.ckpt"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    assert back.config == ckpt.config
    assert back.inventory_lines == ckpt.inventory_lines
    assert back.vocab == ckpt.vocab
    assert back.best_metric == ckpt.best_metric
    assert back.epoch == ckpt.epoch
    for name, arr in ckpt.tensors.items():
        assert np.array_equal(back.tensors[name], arr)
    # saving the loaded checkpoint reproduces the file byte for byte
    save_checkpoint(back, tmp_path / "again.ckpt")
    assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()


def test_single_byte_corruption_detected(tmp_path, rng):
    path = tmp_path / "model.ckpt"
    save_checkpoint(sample_ckpt(rng), path)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0x40
    path.write_bytes(bytes(blob))
    with pytest.raises(ChecksumError, match="CRC"):
        load_checkpoint(path)


def test_every_byte_position_detectable(tmp_path, rng):
    # flip a byte at a few positions across all sections
    path = tmp_path / "model.ckpt"
    save_checkpoint(sample_ckpt(rng), path)
    original = path.read_bytes()
    for pos in [0, 9, 30, len(original) // 2, len(original) - 5, len(original) - 1]:
        blob = bytearray(original)
        blob[pos] ^= 0x01
        path.write_bytes(bytes(blob))
        with pytest.raises((ChecksumError, DataError)):
            load_checkpoint(path)


def test_version_mismatch_is_explicit_error(tmp_path, rng):
    path = tmp_path / "model.ckpt"
    ckpt = sample_ckpt(rng)
    save_checkpoint(ckpt, path)
    import json, struct, zlib
    blob = path.read_bytes()
    header_len = struct.unpack("<I", blob[8:12])[0]
    header = json.loads(blob[12:12 + header_len])
    header["version"] = FORMAT_VERSION + 1
    new_header = json.dumps(header, ensure_ascii=False, separators=(",", ":")).encode()
    body = blob[:8] + struct.pack("<I", len(new_header)) + new_header + blob[12 + header_len:-4]
    path.write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))
    with pytest.raises(DataError, match="version"):
        load_checkpoint(path)


def test_truncated_file_detected(tmp_path, rng):
    path = tmp_path / "model.ckpt"
    save_checkpoint(sample_ckpt(rng), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:len(blob) // 2])
    with pytest.raises(ChecksumError):
        load_checkpoint(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "not.ckpt"
    path.write_bytes(b"NOTMAGIC" + bytes(100))
    with pytest.raises(DataError, match="magic"):
        load_checkpoint(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_checkpoint(tmp_path / "nope.ckpt")


def test_params_hash_stable_and_sensitive(rng):
    tensors = {"a": rng.normal(size=4).astype(np.float32),
               "b": rng.normal(size=(2, 2)).astype(np.float32)}
    h1 = params_hash(tensors)
    h2 = params_hash(dict(reversed(list(tensors.items()))))
    assert h1 == h2  # order-insensitive
    tensors["a"] = tensors["a"] + 1e-3
    assert params_hash(tensors) != h1


def test_checkpoint_hash_matches_helper(rng):
    ckpt = sample_ckpt(rng)
    assert ckpt.params_hash() == params_hash(ckpt.tensors)
