import struct

import numpy as np
import pytest
from PIL import Image as PILImage

from stycona import imagio
from stycona.errors import FormatError, ImageIOError, InvalidInput


def test_8bit_endpoints(tmp_path):
    p = tmp_path / "x.png"
    PILImage.fromarray(np.array([[0, 255], [128, 64]], np.uint8), mode="L").save(p)
    img = imagio.load_image(p)
    assert img.shape == (1, 2, 2) and img.dtype == np.float32
    assert img[0, 0, 0] == 0.0 and img[0, 0, 1] == 1.0
    assert img[0, 1, 0] == np.float32(128 / 255)


def test_16bit_midpoint(tmp_path):
    p = tmp_path / "x16.png"
    PILImage.fromarray(np.array([[32768, 65535]], np.uint16)).save(p)
    img = imagio.load_image(p)
    assert img[0, 0, 0] == pytest.approx(32768 / 65535, abs=1e-7)
    assert img[0, 0, 1] == 1.0
    imagio.save_image(img, tmp_path / "y16.png", bits=16)
    raw, bits = imagio.read_raw(tmp_path / "y16.png")
    assert bits == 16 and raw.tolist() == [[[32768, 65535]]]


def test_rgb_and_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)
    p = tmp_path / "c.png"
    PILImage.fromarray(arr, mode="RGB").save(p)
    img = imagio.load_image(p)
    assert img.shape == (3, 5, 7)
    imagio.save_image(img, tmp_path / "d.png")
    again = imagio.load_image(tmp_path / "d.png")
    np.testing.assert_array_equal(img, again)
    raw, _ = imagio.read_raw(tmp_path / "d.png")
    np.testing.assert_array_equal(np.moveaxis(raw, 0, -1), arr)


def test_quantization(tmp_path):
    imagio.save_image(np.full((1, 3, 3), 0.5), tmp_path / "h.png")
    raw, _ = imagio.read_raw(tmp_path / "h.png")
    assert np.all(raw == 128)
    imagio.save_image(np.array([[[1.2, -0.3]]]), tmp_path / "c.png")
    raw, _ = imagio.read_raw(tmp_path / "c.png")
    assert raw.tolist() == [[[255, 0]]]


def test_pgm_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.random((1, 6, 5)).astype(np.float32)
    p = tmp_path / "g.pgm"
    imagio.save_image(img, p)
    assert p.read_bytes().startswith(b"P5\n5 6\n255\n")
    back = imagio.load_image(p)
    np.testing.assert_array_equal(back, imagio.normalize(imagio.quantize(img), 8))
    imagio.save_image(img, tmp_path / "g16.pgm", bits=16)
    back16 = imagio.load_image(tmp_path / "g16.pgm")
    assert np.abs(back16 - img).max() <= 0.5 / 65535 + 1e-7
    # Pillow reads our P5 output too
    assert np.asarray(PILImage.open(p)).shape == (6, 5)


def test_pgm_header_comment_and_errors(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
    assert imagio.load_image(p).tolist() == [[[0.0, 1.0]]]
    p.write_bytes(b"P5\n2 1\n255\n\x00")
    with pytest.raises(FormatError):
        imagio.load_image(p)
    p.write_bytes(b"P2\n2 1\n255\n0 255\n")
    with pytest.raises(FormatError):
        imagio.load_image(p)


def test_load_errors(tmp_path):
    with pytest.raises(ImageIOError):
        imagio.load_image(tmp_path / "missing.png")
    (tmp_path / "x.bmp").write_bytes(b"BM")
    with pytest.raises(ImageIOError):
        imagio.load_image(tmp_path / "x.bmp")
    (tmp_path / "bad.png").write_bytes(b"\x89PNG\r\n\x1a\n garbage")
    with pytest.raises(FormatError):
        imagio.load_image(tmp_path / "bad.png")


def test_resize():
    img = np.arange(12, dtype=np.float32).reshape(1, 3, 4) / 11
    np.testing.assert_array_equal(imagio.resize_bilinear(img, (3, 4)), img)
    up = imagio.resize_bilinear(img, (5, 7))
    # corner-aligned: corners are preserved exactly
    assert up[0, 0, 0] == img[0, 0, 0] and up[0, -1, -1] == img[0, -1, -1]
    assert up[0, 2, 0] == pytest.approx((img[0, 1, 0]))
    mask = np.array([[0, 1], [2, 3]], np.uint8)
    big = imagio.resize_nearest(mask, (4, 4))
    assert set(np.unique(big)) == {0, 1, 2, 3} and big.dtype == np.uint8
    a = imagio.resize_bilinear(img, (6, 9))
    assert a.tobytes() == imagio.resize_bilinear(img, (6, 9)).tobytes()
    loaded = imagio.resize_bilinear(img, (2, 2))
    assert loaded.shape == (1, 2, 2)


def test_masks(tmp_path):
    m = np.array([[0, 1, 2], [2, 1, 0]], np.uint8)
    p = tmp_path / "m.png"
    imagio.save_mask(m, p)
    np.testing.assert_array_equal(imagio.load_mask(p, num_classes=3), m)
    imagio.save_mask(np.zeros((4, 4), int), p)
    assert not imagio.load_mask(p).any()
    PILImage.fromarray(np.full((2, 2), 255, np.uint8), mode="L").save(p)
    with pytest.raises(FormatError):
        imagio.load_mask(p, num_classes=4)
    with pytest.raises(FormatError):
        imagio.save_mask(np.array([[0.5, 1.0]]), p)
    with pytest.raises(FormatError):
        imagio.save_mask(np.array([[0, 300]]), p)


def test_tensor_roundtrip(tmp_path):
    a = np.array([[1.5, -2.25, np.pi], [0.0, 1e-30, 7.0]], np.float32)
    p = tmp_path / "t.styc"
    imagio.save_tensor(a, p)
    data = p.read_bytes()
    assert data[:4] == b"STYC"
    assert struct.unpack_from("<IBB2I", data, 4) == (1, 0, 2, 2, 3)
    assert len(data) == 4 + 4 + 1 + 1 + 8 + 24
    back = imagio.load_tensor(p)
    assert back.dtype == np.float32 and back.shape == (2, 3)
    assert back.tobytes() == a.tobytes()
    b = np.random.default_rng(0).standard_normal((3, 2, 2))
    imagio.save_tensor(b, p, dtype="float64")
    assert imagio.load_tensor(p).tobytes() == b.tobytes()


def test_tensor_errors(tmp_path):
    p = tmp_path / "t.styc"
    imagio.save_tensor(np.ones((2, 3), np.float32), p)
    data = p.read_bytes()
    p.write_bytes(data[:-1])
    with pytest.raises(FormatError):
        imagio.load_tensor(p)
    p.write_bytes(b"NOPE" + data[4:])
    with pytest.raises(FormatError):
        imagio.load_tensor(p)
    p.write_bytes(data[:4] + struct.pack("<I", 2) + data[8:])
    with pytest.raises(FormatError):
        imagio.load_tensor(p)
    p.write_bytes(b"STYC" + struct.pack("<IBB2I", 1, 0, 2, 0, 3))
    with pytest.raises(FormatError):
        imagio.load_tensor(p)
    with pytest.raises(FormatError):
        imagio.save_tensor(np.ones((0, 3)), p)
    with pytest.raises(InvalidInput):
        imagio.save_tensor(np.ones(3), p, dtype="int8")


def test_dataset_loading(tmp_path):
    for n in range(3):
        imagio.save_image(np.full((1, 8, 6), n / 4), tmp_path / f"img{n}.png")
    imagio.save_mask(np.ones((8, 6), np.uint8), tmp_path / "img1_mask.png")
    ds = imagio.load_dataset(tmp_path, target_size=(4, 4), domain="src")
    assert len(ds) == 3 and ds.shape == (1, 4, 4)
    assert ds.masks[0] is None and ds.masks[1].shape == (4, 4)
    assert ds.paths[1][1].endswith("img1_mask.png")
    with pytest.raises(InvalidInput):
        imagio.Dataset(images=[np.zeros((1, 2, 2)), np.zeros((1, 3, 3))])
