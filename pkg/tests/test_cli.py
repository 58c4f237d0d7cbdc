import json
import os

import numpy as np
import pytest

from stycona import cli, imagio
from stycona.augmentation import read_records
from stycona.decomposition import style_swap
from stycona.deskbench.synth import SynthDomainSpec, generate_sample

from conftest import smooth_image


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def image_dir(tmp_path):
    root = tmp_path / "in"
    (root / "nested").mkdir(parents=True)
    spec = SynthDomainSpec(domain=0, size=(24, 20))
    for i in range(6):
        x, m = generate_sample(spec, i)
        folder = root / "nested" if i % 2 else root
        name = f"case{i}.pgm" if i == 2 else f"case{i}.png"
        imagio.save_image(x, folder / name, bits=16 if i == 4 else 8)
        imagio.save_mask(m, imagio.mask_path_for(folder / name))
    return root


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help_documents_defaults(capsys):
    for sub in ("decompose", "style-swap", "augment", "metrics", "bench"):
        with pytest.raises(SystemExit) as exc:
            cli.main([sub, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        if sub != "bench":
            assert "(default: 256)" in text
    with pytest.raises(SystemExit):
        cli.main(["augment", "--help"])
    assert "number of perturbed content maps (default: 16)" in " ".join(capsys.readouterr().out.split())


def test_usage_errors_exit_1(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["augment", "--input-dir", "x"])
    assert exc.value.code == 1
    capsys.readouterr()


def test_decompose_constant_image(tmp_path, capsys):
    p = tmp_path / "flat.png"
    imagio.save_image(np.full((1, 10, 12), 0.6), p)
    code, out, _ = run(capsys, "decompose", "--input", p, "--out-dir", tmp_path / "d", "--top-k", 3,
                       "--size", 0, "--tensor")
    assert code == 0 and out.strip() == "R 1"
    sigma = [float(v) for v in (tmp_path / "d" / "style_code.csv").read_text().strip().split(",")]
    assert len(sigma) == 10 and sigma[0] > 1 and max(sigma[1:]) < 1e-9 * sigma[0]
    assert len(list((tmp_path / "d").glob("map_*.png"))) == 3
    norms = np.linalg.norm(imagio.load_tensor(tmp_path / "d" / "content_maps.styc")[:3], axis=(1, 2))
    assert norms[0] > 1 and norms[1] == 0 and norms[2] == 0
    code, out, _ = run(capsys, "decompose", "--input", p, "--out-dir", tmp_path / "e", "--top-k", 0, "--size", 0)
    assert code == 0 and sorted(f.name for f in (tmp_path / "e").iterdir()) == ["style_code.csv"]


def test_decompose_maps_sum_to_input(tmp_path, capsys, rng):
    p = tmp_path / "x.png"
    imagio.save_image(smooth_image(rng, (3, 18, 14)), p)
    code, _, _ = run(capsys, "decompose", "--input", p, "--out-dir", tmp_path / "d",
                     "--channel", 1, "--tensor", "--size", 0)
    assert code == 0
    maps = imagio.load_tensor(tmp_path / "d" / "content_maps.styc")
    assert maps.shape == (14, 18, 14)
    assert np.abs(maps.sum(axis=0) - imagio.load_image(p)[1]).max() <= 1e-6
    assert len(list((tmp_path / "d").glob("map_*.png"))) == 8


def test_decompose_bad_path_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "decompose", "--input", tmp_path / "none.png", "--out-dir", tmp_path)
    assert code == 2 and "none.png" in err


def test_style_swap(tmp_path, capsys, rng):
    a, b = smooth_image(rng, (1, 16, 16)), smooth_image(rng, (1, 16, 16))
    imagio.save_image(a, tmp_path / "a.png", bits=16)
    imagio.save_image(b, tmp_path / "b.png", bits=16)
    code, _, _ = run(capsys, "style-swap", "--a", tmp_path / "a.png", "--b", tmp_path / "b.png",
                     "--out-dir", tmp_path / "s", "--size", 0)
    assert code == 0
    want, _ = style_swap(imagio.load_image(tmp_path / "a.png"), imagio.load_image(tmp_path / "b.png"))
    got = imagio.load_image(tmp_path / "s" / "a_with_b_style.png")
    assert np.abs(got - want).max() <= 1 / 255
    imagio.save_image(smooth_image(rng, (1, 16, 12)), tmp_path / "c.png")
    code, _, err = run(capsys, "style-swap", "--a", tmp_path / "a.png", "--b", tmp_path / "c.png",
                       "--out-dir", tmp_path / "s", "--size", 0)
    assert code == 1 and "shape" in err


def test_augment_tree_records_and_masks(image_dir, tmp_path, capsys):
    out = tmp_path / "out"
    code, stdout, _ = run(capsys, "augment", "--input-dir", image_dir, "--out-dir", out,
                          "--seed", 7, "--apply-prob", 1.0, "--size", 32)
    assert code == 0 and "t=16" in stdout
    src, dst = _tree(image_dir), _tree(out)
    assert set(dst) == set(src) | {"augment_records.jsonl"}
    for name, data in src.items():
        if "_mask" in name:
            assert dst[name] == data
        else:
            raw_in, bits_in = imagio.read_raw(image_dir / name)
            raw_out, bits_out = imagio.read_raw(out / name)
            assert raw_out.shape == raw_in.shape and bits_out == bits_in
    recs = read_records(out / "augment_records.jsonl")
    assert [r.source for r in recs] == [p.relative_to(image_dir).as_posix() for p in imagio.scan_images(image_dir)]
    assert all(r.applied and r.t == 16 and len(r.indices) == 16 for r in recs)
    again = tmp_path / "again"
    run(capsys, "augment", "--input-dir", image_dir, "--out-dir", again, "--seed", 7, "--apply-prob", 1.0, "--size", 32)
    assert _tree(again) == dst


def test_augment_apply_prob_zero_copies_bytes(image_dir, tmp_path, capsys):
    out = tmp_path / "out"
    code, _, _ = run(capsys, "augment", "--input-dir", image_dir, "--out-dir", out, "--apply-prob", 0)
    assert code == 0
    dst = _tree(out)
    for name, data in _tree(image_dir).items():
        assert dst[name] == data


def test_augment_env_seed(image_dir, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("STYCONA_SEED", "11")
    run(capsys, "augment", "--input-dir", image_dir, "--out-dir", tmp_path / "a", "--size", 16)
    monkeypatch.delenv("STYCONA_SEED")
    run(capsys, "augment", "--input-dir", image_dir, "--out-dir", tmp_path / "b", "--size", 16, "--seed", 11)
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")
    monkeypatch.setenv("STYCONA_SEED", "eleven")
    code, _, _ = run(capsys, "augment", "--input-dir", image_dir, "--out-dir", tmp_path / "c")
    assert code == 1


def test_augment_usage_errors(tmp_path, capsys, image_dir):
    (tmp_path / "one").mkdir()
    imagio.save_image(np.zeros((1, 4, 4)), tmp_path / "one" / "a.png")
    code, _, err = run(capsys, "augment", "--input-dir", tmp_path / "one", "--out-dir", tmp_path / "o")
    assert code == 1 and "at least 2" in err
    code, _, _ = run(capsys, "augment", "--input-dir", image_dir, "--out-dir", tmp_path / "o", "--apply-prob", 2)
    assert code == 1
    code, _, _ = run(capsys, "augment", "--input-dir", image_dir, "--out-dir", tmp_path / "o", "--alpha", "1,2,3")
    assert code == 1


def test_metrics_output_format(tmp_path, capsys, rng):
    m = np.zeros((8, 8), np.uint8)
    m[2:5, 2:5] = 1
    imagio.save_mask(m, tmp_path / "m.png")
    imagio.save_mask(np.roll(m, 1, axis=1), tmp_path / "r.png")
    imagio.save_mask(np.zeros_like(m), tmp_path / "z.png")
    assert run(capsys, "metrics", "dsc", tmp_path / "m.png", tmp_path / "m.png")[1] == "DSC 100.00\n"
    assert run(capsys, "metrics", "asd", tmp_path / "m.png", tmp_path / "r.png")[1] == "ASD 0.50\n"
    assert run(capsys, "metrics", "asd", tmp_path / "m.png", tmp_path / "z.png")[1] == "ASD undefined\n"
    assert run(capsys, "metrics", "dsc", tmp_path / "m.png", tmp_path / "r.png", "--class", 1)[1] == "DSC 66.67\n"
    imagio.save_image(smooth_image(rng, (1, 9, 9)), tmp_path / "x.png")
    assert run(capsys, "metrics", "hist", tmp_path / "x.png", tmp_path / "x.png")[1] == "0.000000\n"
    assert run(capsys, "metrics", "style-shift", tmp_path / "x.png", tmp_path / "x.png")[1] == "0.000000\n"
    code, _, _ = run(capsys, "metrics", "dsc", tmp_path / "m.png", tmp_path / "missing.png")
    assert code == 2


def test_bench_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"source": {}, "target": {}, "arms": [{"name": "b"}], "epoch": 3}))
    code, _, err = run(capsys, "bench", "--config", bad, "--out-dir", tmp_path / "o")
    assert code == 1 and "epoch" in err
    code, _, _ = run(capsys, "bench", "--config", tmp_path / "missing.json")
    assert code == 2


@pytest.mark.filterwarnings("ignore:t=32 exceeds")
def test_bench_tiny_run(tmp_path, capsys):
    cfg = {
        "source": {"domain": 0, "size": [16, 16]},
        "target": {"domain": 1, "size": [16, 16]},
        "arms": [{"name": "baseline"}, {"name": "style", "augment": {"t": 0}},
                 {"name": "content", "augment": {"alpha": 1.0}}, {"name": "full", "augment": {}}],
        "seeds": [0], "n_train": 4, "n_test": 2, "epochs": 1, "batch_size": 4,
    }
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "bench", "--config", p, "--out-dir", tmp_path / "o")
    assert code == 0
    for label in ("Baseline", "+Style", "+Content", "+Style+Content"):
        assert any(line.startswith(label + " ") for line in out.splitlines())
    assert (tmp_path / "o" / "report.json").is_file()
    assert len(list((tmp_path / "o").glob("theta_*.styc"))) == 4


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "stycona", "metrics", "--help"], capture_output=True, text=True,
                         env={**os.environ})
    assert res.returncode == 0 and "style-shift" in res.stdout
