import json

import numpy as np
import pytest

from salshift.cli import main
from salshift.fileio import load_image, save_image
from salshift.imaging import RasterImage, identity_recipe
from salshift.recipes import save_recipes
from conftest import patch_image


@pytest.fixture
def workspace(tmp_path, rng):
    image, mask = patch_image(64, 64, cy=32, cx=40, radius=10)
    image_path = tmp_path / "image.png"
    mask_path = tmp_path / "mask.png"
    save_image(image, image_path)
    save_image(RasterImage(np.repeat(mask.weights[..., None], 3, axis=2)), mask_path)
    return tmp_path, image_path, mask_path


class TestApply:
    def test_alpha_zero_reproduces_input(self, workspace):
        tmp, image_path, mask_path = workspace
        params = tmp / "params.json"
        recipe = identity_recipe()
        recipe.foreground.exposure = 1.0
        save_recipes(recipe, params)
        out = tmp / "out.png"
        code = main(
            [
                "apply",
                "--image", str(image_path),
                "--mask", str(mask_path),
                "--params", str(params),
                "--alpha", "0",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert out.read_bytes() == image_path.read_bytes()

    def test_alpha_one_brightens_foreground(self, workspace):
        tmp, image_path, mask_path = workspace
        params = tmp / "params.json"
        recipe = identity_recipe()
        recipe.foreground.exposure = 1.0
        save_recipes(recipe, params)
        out = tmp / "out.png"
        assert main(
            [
                "apply",
                "--image", str(image_path),
                "--mask", str(mask_path),
                "--params", str(params),
                "--alpha", "1",
                "--out", str(out),
            ]
        ) == 0
        original = load_image(image_path)
        edited = load_image(out)
        assert edited.data.mean() > original.data.mean()

    def test_missing_required_flag_exits_one(self, capsys):
        assert main(["apply", "--image", "x.png"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_unreadable_image_exits_two(self, workspace, capsys):
        tmp, _, mask_path = workspace
        params = tmp / "params.json"
        save_recipes(identity_recipe(), params)
        code = main(
            [
                "apply",
                "--image", str(tmp / "nope.png"),
                "--mask", str(mask_path),
                "--params", str(params),
                "--alpha", "1",
                "--out", str(tmp / "out.png"),
            ]
        )
        assert code == 2


class TestOptimizeCommand:
    def test_writes_outputs_and_is_deterministic(self, workspace):
        tmp, image_path, mask_path = workspace
        args = [
            "optimize",
            "--image", str(image_path),
            "--mask", str(mask_path),
            "--out", str(tmp / "edited.png"),
            "--params-out", str(tmp / "params.json"),
            "--iters", "2",
            "--seed", "3",
        ]
        assert main(args) == 0
        first = (tmp / "params.json").read_bytes()
        first_img = (tmp / "edited.png").read_bytes()
        assert main(args) == 0
        assert (tmp / "params.json").read_bytes() == first
        assert (tmp / "edited.png").read_bytes() == first_img
        document = json.loads(first)
        assert document["version"] == 1

    def test_styles_writes_array(self, workspace):
        tmp, image_path, mask_path = workspace
        assert main(
            [
                "optimize",
                "--image", str(image_path),
                "--mask", str(mask_path),
                "--out", str(tmp / "edited.png"),
                "--params-out", str(tmp / "styles.json"),
                "--iters", "2",
                "--styles", "3",
            ]
        ) == 0
        payload = json.loads((tmp / "styles.json").read_text())
        assert isinstance(payload, list) and len(payload) == 3

    def test_empty_mask_exits_two(self, workspace, capsys):
        tmp, image_path, _ = workspace
        empty = tmp / "empty.png"
        save_image(RasterImage(np.zeros((64, 64, 3))), empty)
        code = main(
            [
                "optimize",
                "--image", str(image_path),
                "--mask", str(empty),
                "--out", str(tmp / "o.png"),
                "--params-out", str(tmp / "p.json"),
                "--iters", "1",
            ]
        )
        assert code == 2
        assert "mask" in capsys.readouterr().err


class TestMetricsCommand:
    def test_identity_metrics_all_zero(self, workspace, capsys):
        tmp, image_path, mask_path = workspace
        assert main(
            [
                "metrics",
                "--original", str(image_path),
                "--edited", str(image_path),
                "--mask", str(mask_path),
            ]
        ) == 0
        out = capsys.readouterr().out
        header, row = out.strip().split("\n")
        values = dict(zip(header.split(","), row.split(",")))
        assert float(values["saliency_increase_absolute"]) == 0.0
        assert float(values["fidelity_full"]) == 0.0

    def test_json_format(self, workspace, capsys):
        tmp, image_path, mask_path = workspace
        assert main(
            [
                "metrics",
                "--original", str(image_path),
                "--edited", str(image_path),
                "--mask", str(mask_path),
                "--format", "json",
            ]
        ) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload[0]["fidelity_full"] == 0.0


class TestVideoCommand:
    def test_end_to_end(self, workspace, capsys):
        tmp, image_path, mask_path = workspace
        frames = tmp / "frames"
        masks = tmp / "masks"
        frames.mkdir(), masks.mkdir()
        for i in range(3):
            (frames / f"f{i}.png").write_bytes(image_path.read_bytes())
            (masks / f"f{i}.png").write_bytes(mask_path.read_bytes())
        params = tmp / "params.json"
        save_recipes(identity_recipe(), params)
        assert main(
            [
                "video",
                "--frames", str(frames),
                "--masks", str(masks),
                "--params", str(params),
                "--out", str(tmp / "out"),
            ]
        ) == 0
        assert "wrote 3 frames" in capsys.readouterr().out
        for i in range(3):
            assert (tmp / "out" / f"f{i}.png").read_bytes() == image_path.read_bytes()


class TestUsage:
    def test_no_command_exits_one(self):
        assert main([]) == 1

    def test_unknown_command_exits_one(self):
        assert main(["frobnicate"]) == 1
