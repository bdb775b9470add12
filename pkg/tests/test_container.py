import struct
import zlib

import numpy as np
import pytest

from emrseg.errors import ChecksumError, ContainerFormatError, ModelIOError, VersionMismatchError
from emrseg.lib.container import (
    MAGIC,
    decode_container,
    encode_container,
    is_container,
    pack_json,
    read_container,
    unpack_json,
    write_container,
)


@pytest.fixture
def tensors():
    rng = np.random.default_rng(0)
    return {
        'weights': rng.normal(size=(3, 4)),
        'half': rng.normal(size=5).astype(np.float32),
        'counts': np.array([5, 3, 1], dtype=np.int64),
        'scalar': np.float64(2.5),
        'meta': pack_json({'name': 'tagger', 'labels': ['a', 'b']}),
    }


def resealed(body: bytes) -> bytes:
    return body + struct.pack('<I', zlib.crc32(body) & 0xFFFFFFFF)


class TestEncoding:

    def test_round_trip_keeps_values_and_dtypes(self, tensors):
        decoded = decode_container(encode_container(tensors))
        assert set(decoded) == set(tensors)
        for name, value in tensors.items():
            np.testing.assert_array_equal(decoded[name], value)
            assert decoded[name].dtype == np.asarray(value).dtype.newbyteorder('<')
        assert unpack_json(decoded['meta']) == {'name': 'tagger', 'labels': ['a', 'b']}

    def test_insertion_order_does_not_matter(self, tensors):
        reordered = dict(reversed(list(tensors.items())))
        assert encode_container(tensors) == encode_container(reordered)

    def test_header_layout(self, tensors):
        data = encode_container(tensors)
        assert data[:8] == MAGIC
        assert struct.unpack('<I', data[8:12]) == (1,)

    def test_empty_container(self):
        assert decode_container(encode_container({})) == {}

    def test_unsupported_dtype(self):
        with pytest.raises(ContainerFormatError):
            encode_container({'flags': np.array([True, False])})

    def test_name_with_tab(self):
        with pytest.raises(ContainerFormatError):
            encode_container({'a\tb': np.zeros(1)})


class TestCorruption:

    def test_bad_magic(self, tensors):
        data = bytearray(encode_container(tensors))
        data[0:8] = b'NOTMAGIC'
        with pytest.raises(ContainerFormatError):
            decode_container(bytes(data))

    def test_truncated(self):
        with pytest.raises(ContainerFormatError):
            decode_container(MAGIC + b'\x01')

    @pytest.mark.parametrize('position', [12, 40, -5])
    def test_flipped_byte(self, tensors, position):
        data = bytearray(encode_container(tensors))
        data[position] ^= 0x01
        with pytest.raises(ChecksumError):
            decode_container(bytes(data))

    def test_future_version(self, tensors):
        with pytest.raises(VersionMismatchError):
            decode_container(encode_container(tensors, version=2))

    def test_manifest_past_the_end(self):
        body = MAGIC + struct.pack('<I', 1) + struct.pack('<I', 10_000)
        with pytest.raises(ContainerFormatError):
            decode_container(resealed(body))

    def test_malformed_manifest_line(self):
        manifest = b'weights\t2,2\tf8\tnot-a-number\t32'
        body = MAGIC + struct.pack('<I', 1) + struct.pack('<I', len(manifest)) + manifest + bytes(32)
        with pytest.raises(ContainerFormatError):
            decode_container(resealed(body))

    def test_shape_disagrees_with_length(self):
        manifest = b'weights\t3,3\tf8\t0\t32'
        body = MAGIC + struct.pack('<I', 1) + struct.pack('<I', len(manifest)) + manifest + bytes(32)
        with pytest.raises(ContainerFormatError):
            decode_container(resealed(body))

    def test_corrupt_json(self):
        with pytest.raises(ContainerFormatError):
            unpack_json(np.frombuffer(b'{"a": ', dtype=np.uint8))


class TestFiles:

    def test_write_and_read(self, tmp_path, tensors):
        path = write_container(tmp_path / 'nested' / 'c.emrseg', tensors)
        assert is_container(path)
        np.testing.assert_array_equal(read_container(path)['weights'], tensors['weights'])

    def test_text_file_is_not_a_container(self, tmp_path):
        path = tmp_path / 'vectors.txt'
        path.write_text("1 2\nw 0 0\n", encoding='utf-8')
        assert not is_container(path)
        assert not is_container(tmp_path / 'missing')

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelIOError):
            read_container(tmp_path / 'missing.emrseg')

    def test_unwritable_destination(self, tmp_path):
        blocker = tmp_path / 'file'
        blocker.write_text('x', encoding='utf-8')
        with pytest.raises(ModelIOError):
            write_container(blocker / 'c.emrseg', {'a': np.zeros(1)})
