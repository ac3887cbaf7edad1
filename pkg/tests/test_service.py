import io
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from salshift.fileio import decode_pgm, decode_png, encode_png
from salshift.imaging import MaskLayer, RasterImage, identity_recipe, render_edit
from salshift.recipes import parse_recipe
from salshift.service import ServiceConfig, create_app
from conftest import patch_image


@pytest.fixture
def client():
    app = create_app(ServiceConfig())
    with TestClient(app) as c:
        yield c


def png_pair(size=64, radius=10):
    image, mask = patch_image(size, size, cy=size // 2, cx=size // 2 + 8, radius=radius)
    mask_img = RasterImage(np.repeat(mask.weights[..., None], 3, axis=2))
    return encode_png(image), encode_png(mask_img), image, mask


def create_session(client, image_bytes=None, mask_bytes=None, **form):
    if image_bytes is None:
        image_bytes, mask_bytes, _, _ = png_pair()
    response = client.post(
        "/sessions",
        files={
            "image": ("image.png", image_bytes, "image/png"),
            "mask": ("mask.png", mask_bytes, "image/png"),
        },
        data=form,
    )
    return response


def wait_for_job(client, session_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = client.get(f"/sessions/{session_id}").json()["job"]
        if status in ("done", "failed"):
            return status
        time.sleep(0.1)
    raise TimeoutError("job did not finish")


class TestSessionLifecycle:
    def test_create_returns_201_with_id(self, client):
        response = create_session(client)
        assert response.status_code == 201
        assert "id" in response.json()

    def test_bad_image_rejected(self, client):
        _, mask_bytes, _, _ = png_pair()
        response = create_session(client, b"not a png", mask_bytes)
        assert response.status_code == 400
        assert "image" in response.json()["detail"]

    def test_mask_dimension_mismatch_rejected(self, client):
        image_bytes, _, _, _ = png_pair(64)
        _, small_mask, _, _ = png_pair(32)
        response = create_session(client, image_bytes, small_mask)
        assert response.status_code == 400
        assert "mask" in response.json()["detail"]

    def test_mask_resized_with_flag(self, client):
        image_bytes, _, _, _ = png_pair(64)
        _, small_mask, _, _ = png_pair(32)
        response = create_session(client, image_bytes, small_mask, resize_mask="true")
        assert response.status_code == 201

    def test_oversize_upload_rejected(self):
        app = create_app(ServiceConfig(upload_limit=256))
        with TestClient(app) as client:
            image_bytes, mask_bytes, _, _ = png_pair(128)
            assert len(image_bytes) > 256
            response = create_session(client, image_bytes, mask_bytes)
            assert response.status_code == 413

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/deadbeef").status_code == 404


class TestParams:
    def test_get_before_optimize_is_identity(self, client):
        sid = create_session(client).json()["id"]
        document = client.get(f"/sessions/{sid}/params").json()
        recipe = parse_recipe(document)
        assert recipe.is_identity()

    def test_patch_merges_and_reflects(self, client):
        sid = create_session(client).json()["id"]
        response = client.patch(
            f"/sessions/{sid}/params", json={"foreground": {"exposure": 0.5}}
        )
        assert response.status_code == 200
        document = client.get(f"/sessions/{sid}/params").json()
        assert document["foreground"]["exposure"] == 0.5
        assert document["background"]["exposure"] == 0.0

    def test_patch_out_of_range_422_with_field(self, client):
        sid = create_session(client).json()["id"]
        response = client.patch(
            f"/sessions/{sid}/params", json={"foreground": {"exposure": 5.0}}
        )
        assert response.status_code == 422
        detail = response.json()["detail"]
        assert "foreground.exposure" in detail and "-3" in detail

    def test_patch_unknown_field_422(self, client):
        sid = create_session(client).json()["id"]
        response = client.patch(f"/sessions/{sid}/params", json={"vignette": 1.0})
        assert response.status_code == 422


class TestRender:
    def test_alpha_zero_is_input_bytes(self, client):
        image_bytes, mask_bytes, _, _ = png_pair()
        sid = create_session(client, image_bytes, mask_bytes).json()["id"]
        response = client.get(f"/sessions/{sid}/render", params={"alpha": 0})
        assert response.status_code == 200
        rendered = decode_png(response.content)
        uploaded = decode_png(image_bytes)
        np.testing.assert_array_equal(rendered.data, uploaded.data)

    def test_render_without_recipe_409(self, client):
        sid = create_session(client).json()["id"]
        assert client.get(f"/sessions/{sid}/render", params={"alpha": 1}).status_code == 409

    def test_alpha_out_of_range_422(self, client):
        sid = create_session(client).json()["id"]
        assert client.get(f"/sessions/{sid}/render", params={"alpha": 2}).status_code == 422

    def test_render_matches_library_render(self, client):
        image_bytes, mask_bytes, _, _ = png_pair()
        sid = create_session(client, image_bytes, mask_bytes).json()["id"]
        client.patch(f"/sessions/{sid}/params", json={"foreground": {"exposure": 1.0}})
        response = client.get(
            f"/sessions/{sid}/render", params={"alpha": 0.5, "max_dim": 64}
        )
        uploaded_image = decode_png(image_bytes)
        uploaded_mask = MaskLayer(decode_png(mask_bytes).data[..., 0])
        recipe = identity_recipe()
        recipe.foreground.exposure = 1.0
        expected = render_edit(uploaded_image, uploaded_mask, recipe, 0.5)
        assert response.content == encode_png(expected)

    def test_patch_invalidates_stale_render(self, client):
        sid = create_session(client).json()["id"]
        client.patch(f"/sessions/{sid}/params", json={"foreground": {"exposure": 1.0}})
        first = client.get(f"/sessions/{sid}/render", params={"alpha": 1}).content
        client.patch(f"/sessions/{sid}/params", json={"foreground": {"exposure": -1.0}})
        second = client.get(f"/sessions/{sid}/render", params={"alpha": 1}).content
        assert first != second

    def test_render_cache_hit_is_byte_stable(self, client):
        sid = create_session(client).json()["id"]
        client.patch(f"/sessions/{sid}/params", json={"foreground": {"exposure": 0.7}})
        a = client.get(f"/sessions/{sid}/render", params={"alpha": 1}).content
        b = client.get(f"/sessions/{sid}/render", params={"alpha": 1}).content
        assert a == b


class TestOptimizeJob:
    def test_job_state_machine(self, client):
        sid = create_session(client).json()["id"]
        assert client.get(f"/sessions/{sid}").json()["job"] == "idle"
        response = client.post(
            f"/sessions/{sid}/optimize", json={"iters": 2, "seed": 1}
        )
        assert response.status_code == 202
        assert response.json() == {"job": "running"}
        assert wait_for_job(client, sid) == "done"
        info = client.get(f"/sessions/{sid}").json()
        assert info["has_recipe"] is True

    def test_conflict_while_running(self, client):
        sid = create_session(client).json()["id"]
        assert client.post(f"/sessions/{sid}/optimize", json={"iters": 40}).status_code == 202
        second = client.post(f"/sessions/{sid}/optimize", json={"iters": 1})
        assert second.status_code == 409
        wait_for_job(client, sid)

    def test_empty_mask_job_fails_with_message(self, client):
        image_bytes, _, _, _ = png_pair()
        empty = encode_png(RasterImage(np.zeros((64, 64, 3))))
        sid = create_session(client, image_bytes, empty).json()["id"]
        client.post(f"/sessions/{sid}/optimize", json={"iters": 1})
        assert wait_for_job(client, sid) == "failed"
        assert "mask" in client.get(f"/sessions/{sid}").json()["message"]

    def test_unknown_session_404(self, client):
        assert client.post("/sessions/nope/optimize", json={}).status_code == 404

    def test_bad_mode_422(self, client):
        sid = create_session(client).json()["id"]
        assert (
            client.post(f"/sessions/{sid}/optimize", json={"mode": "sideways"}).status_code
            == 422
        )


class TestPersistence:
    def test_sessions_survive_restart(self, tmp_path):
        image_bytes, mask_bytes, _, _ = png_pair()
        config = ServiceConfig(persist_dir=str(tmp_path / "state"))
        with TestClient(create_app(config)) as client:
            sid = create_session(client, image_bytes, mask_bytes).json()["id"]
            client.patch(f"/sessions/{sid}/params", json={"foreground": {"exposure": 0.6}})
        # a brand-new app (fresh in-memory store) revives the session
        with TestClient(create_app(config)) as client:
            document = client.get(f"/sessions/{sid}/params").json()
            assert document["foreground"]["exposure"] == 0.6
            render = client.get(f"/sessions/{sid}/render", params={"alpha": 1})
            assert render.status_code == 200

    def test_without_persistence_sessions_vanish(self):
        image_bytes, mask_bytes, _, _ = png_pair()
        with TestClient(create_app(ServiceConfig())) as client:
            sid = create_session(client, image_bytes, mask_bytes).json()["id"]
        with TestClient(create_app(ServiceConfig())) as client:
            assert client.get(f"/sessions/{sid}").status_code == 404


class TestStaticAssets:
    def test_static_dir_served_at_root(self, tmp_path):
        (tmp_path / "index.html").write_text("<html><body>ui</body></html>")
        config = ServiceConfig(static_dir=str(tmp_path))
        with TestClient(create_app(config)) as client:
            response = client.get("/")
            assert response.status_code == 200
            assert "ui" in response.text


class TestSaliencyAndMetrics:
    def test_before_map_dimensions_and_body(self, client):
        sid = create_session(client).json()["id"]
        response = client.get(f"/sessions/{sid}/saliency", params={"stage": "before"})
        assert response.status_code == 200
        values = decode_pgm(response.content)
        assert values.shape == (64, 64)

    def test_after_requires_recipe(self, client):
        sid = create_session(client).json()["id"]
        assert (
            client.get(f"/sessions/{sid}/saliency", params={"stage": "after"}).status_code
            == 409
        )

    def test_metrics_identity_recipe_zeroes(self, client):
        sid = create_session(client).json()["id"]
        client.patch(f"/sessions/{sid}/params", json={})  # identity recipe
        report = client.get(f"/sessions/{sid}/metrics").json()
        assert report["saliency_increase_absolute"] == 0.0
        assert report["fidelity_full"] == 0.0

    def test_metrics_after_optimize_increase(self, client):
        sid = create_session(client).json()["id"]
        client.post(f"/sessions/{sid}/optimize", json={"iters": 3, "seed": 2})
        wait_for_job(client, sid)
        report = client.get(f"/sessions/{sid}/metrics").json()
        assert report["saliency_increase_absolute"] >= 0.0
