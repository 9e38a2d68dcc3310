"""HTTP API serving the review UI.

Reads are concurrent over the loaded workspace; the only mutations are
image uploads and plan application, and plan application runs as a single
background job (a second apply request gets 409). Applying a plan runs
augment -> retrain -> compare with the workspace config and then reloads
the enhanced model and comparison.
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from . import augment as aug
from . import cam, metrics, pipeline
from .model import ToyNet


class Workspace:
    def __init__(self, cfg: pipeline.RunConfig):
        self.cfg = cfg
        self.ds = pipeline._load_dataset(cfg)
        self.art = pipeline.Artifacts(cfg.out_dir)
        self.model: ToyNet | None = None
        self.enhanced: ToyNet | None = None
        self.reload_models()
        self.uploads: dict[int, np.ndarray] = {}
        self.plans: dict[str, aug.AugmentationPlan] = {}
        self.jobs: dict[str, dict] = {}
        self.job_lock = threading.Lock()
        self.active_job: str | None = None
        self._iou_cache: dict[str, dict[int, float | None]] = {}

    def reload_models(self) -> None:
        for attr, name in (("model", pipeline.MODEL_ORIGINAL), ("enhanced", pipeline.MODEL_ENHANCED)):
            meta = self.art.path(name) / "meta.json"
            setattr(self, attr, ToyNet.load(self.art.path(name)) if meta.exists() else None)

    # -- images ----------------------------------------------------------

    def image_info(self, image_id: int):
        for ds in (self.ds.train, self.ds.eval):
            for info in ds.images:
                if info.id == image_id:
                    return info, ds
        return None, None

    def load_image(self, image_id: int) -> np.ndarray:
        if image_id in self.uploads:
            return self.uploads[image_id]
        info, _ = self.image_info(image_id)
        if info is None:
            raise KeyError(image_id)
        return self.ds.load_image(image_id)

    def per_image_iou(self, which: str) -> dict[int, float | None]:
        """Per-image mean IoU against each image's own annotations."""
        model = self.model if which == "original" else self.enhanced
        if model is None:
            return {}
        if which in self._iou_cache:
            return self._iou_cache[which]
        out: dict[int, float | None] = {}
        for ds in (self.ds.train, self.ds.eval):
            images = pipeline.load_images(self.ds, ds)
            out.update(metrics.evaluate_segmentation(model, ds, images)["per_image"])
        self._iou_cache[which] = out
        return out

    def invalidate(self) -> None:
        self._iou_cache.clear()


def _new_image_id(ws: Workspace) -> int:
    known = [i.id for i in ws.ds.train.images] + [i.id for i in ws.ds.eval.images] + list(ws.uploads)
    return max(known, default=0) + 1


def create_app(cfg: pipeline.RunConfig, ui_dir: str | None = None) -> FastAPI:
    ws = Workspace(cfg)
    app = FastAPI(title="xaiseg review API")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.workspace = ws

    def got_model() -> ToyNet:
        if ws.model is None:
            raise HTTPException(404, "no trained model; run the `train` stage first")
        return ws.model

    @app.get("/api/images")
    def list_images():
        badges = ws.per_image_iou("original")
        return [
            {
                "id": info.id,
                "file_name": info.file_name,
                "width": info.width,
                "height": info.height,
                "iou": badges.get(info.id),
            }
            for info in ws.ds.train.images
        ]

    @app.get("/api/images/{image_id}/image")
    def get_image(image_id: int):
        info, _ = ws.image_info(image_id)
        if info is not None:
            path = ws.ds.root / "images" / info.file_name
            return Response(content=path.read_bytes(), media_type="image/png")
        if image_id in ws.uploads:
            import io

            buf = io.BytesIO()
            from .synth import image_to_png

            image_to_png(ws.uploads[image_id], buf)
            return Response(content=buf.getvalue(), media_type="image/png")
        raise HTTPException(404, f"unknown image {image_id}")

    @app.get("/api/images/{image_id}/annotations")
    def get_annotations(image_id: int):
        info, ds = ws.image_info(image_id)
        if info is None:
            raise HTTPException(404, f"unknown image {image_id}")
        return {
            "image": {"id": info.id, "width": info.width, "height": info.height},
            "categories": [{"id": c.id, "name": c.name} for c in ds.categories],
            "annotations": [
                {
                    "id": a.id,
                    "category_id": a.category_id,
                    "segmentation": a.segmentation,
                    "bbox": a.bbox,
                    "area": a.area,
                }
                for a in ds.annotations_for_image(image_id)
            ],
        }

    @app.get("/api/images/{image_id}/overlay")
    def image_overlay(image_id: int, request: Request):
        # `class` is a reserved word, so the query string is read by hand.
        net = got_model()
        params = request.query_params
        method = params.get("method", "gradcam")
        if method not in cam.METHOD_KEYS:
            raise HTTPException(404, f"unknown method {method}")
        try:
            category_id = int(params.get("class", "1"))
            alpha = float(params.get("alpha", str(ws.cfg.overlay_alpha)))
        except ValueError:
            raise HTTPException(400, "malformed class or alpha parameter")
        if not 0.0 <= alpha <= 1.0:
            raise HTTPException(400, "alpha must be in [0, 1]")
        try:
            image = ws.load_image(image_id)
        except KeyError:
            raise HTTPException(404, f"unknown image {image_id}")

        info, ds = ws.image_info(image_id)
        channels = metrics.category_channels(ds if ds is not None else ws.ds.train)
        if category_id not in channels:
            raise HTTPException(404, f"unknown category {category_id}")
        channel = channels[category_id]
        scores = net.forward(image)
        region = scores.predicted_mask(channel)
        if not region.any() and info is not None:
            gt = metrics.gt_masks_for_image(ds, image_id).get(category_id)
            if gt is not None:
                region = gt
        if not region.any():
            raise HTTPException(404, f"category {category_id} not present in prediction or ground truth")
        emap = cam.explain(net, image, method, class_id=channel, region=region)
        png = pipeline.export_overlay(image, emap.values, alpha)
        return Response(content=png, media_type="image/png")

    @app.get("/api/methods")
    def get_methods():
        eval_json = ws.art.path("evaluation.json")
        chosen_json = ws.art.path("chosen_method.json")
        if not eval_json.exists() or not chosen_json.exists():
            raise HTTPException(404, "no evaluation artifacts; run the `eval-xai` stage first")
        chosen = json.loads(chosen_json.read_text())
        return {"rows": json.loads(eval_json.read_text()), "chosen": chosen["chosen"], "ranking": chosen["ranking"]}

    @app.post("/api/images")
    async def upload_image(request: Request):
        net = got_model()
        body = await request.body()
        if not body:
            raise HTTPException(400, "empty upload")
        try:
            import io

            from PIL import Image

            arr = np.asarray(Image.open(io.BytesIO(body)).convert("RGB"), dtype=np.float64) / 255.0
        except Exception:
            raise HTTPException(400, "body must be a decodable image")
        image = np.ascontiguousarray(arr.transpose(2, 0, 1))
        image_id = _new_image_id(ws)
        ws.uploads[image_id] = image

        chosen_json = ws.art.path("chosen_method.json")
        method = "gradcam"
        if chosen_json.exists():
            method = json.loads(chosen_json.read_text()).get("key", "gradcam")
        predicted = net.forward(image).logits.argmax(axis=0)
        channels = metrics.category_channels(ws.ds.train)
        counts = {
            c.name: int((predicted == channels[c.id]).sum()) for c in ws.ds.train.categories
        }
        return {
            "id": image_id,
            "width": image.shape[2],
            "height": image.shape[1],
            "predicted_pixels": counts,
            "method": method,
            "overlay": f"/api/images/{image_id}/overlay?method={method}",
        }

    @app.post("/api/plan")
    async def post_plan(request: Request):
        try:
            doc = await request.json()
        except Exception:
            raise HTTPException(400, "body must be JSON")
        try:
            plan = aug.plan_from_json(json.dumps(doc))
            aug.validate_plan(ws.ds.train, plan)
        except (aug.AugmentError, KeyError) as err:
            raise HTTPException(400, f"invalid plan: {err}")
        plan_id = uuid.uuid4().hex[:12]
        ws.plans[plan_id] = plan
        return {"id": plan_id, "ops": len(plan.ops)}

    def _run_apply_job(job_id: str, plan: aug.AugmentationPlan) -> None:
        job = ws.jobs[job_id]
        try:
            job["status"] = "running"
            job["stage"] = "augment"
            plan_path = ws.art.path("plan.json")
            plan_path.write_text(aug.plan_to_json(plan))
            pipeline.run_augment(ws.cfg, plan_path=plan_path)
            job["stage"] = "retrain"
            pipeline.run_retrain(ws.cfg)
            job["stage"] = "compare"
            pipeline.run_compare(ws.cfg)
            ws.reload_models()
            ws.invalidate()
            job["status"] = "done"
            job["stage"] = "finished"
        except Exception as err:  # surfaced through the job status
            job["status"] = "error"
            job["error"] = str(err)
        finally:
            with ws.job_lock:
                ws.active_job = None

    @app.post("/api/plan/{plan_id}/apply")
    def apply_plan(plan_id: str):
        if plan_id not in ws.plans:
            raise HTTPException(404, f"unknown plan {plan_id}")
        with ws.job_lock:
            if ws.active_job is not None:
                raise HTTPException(409, "a plan-apply job is already running")
            job_id = uuid.uuid4().hex[:12]
            ws.active_job = job_id
        ws.jobs[job_id] = {"id": job_id, "status": "pending", "stage": "queued", "error": None}
        thread = threading.Thread(target=_run_apply_job, args=(job_id, ws.plans[plan_id]), daemon=True)
        thread.start()
        return {"job_id": job_id}

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        if job_id not in ws.jobs:
            raise HTTPException(404, f"unknown job {job_id}")
        return ws.jobs[job_id]

    @app.get("/api/comparison")
    def get_comparison():
        got_model()
        images = pipeline.load_images(ws.ds, ws.ds.eval)
        categories = [(c.id, c.name) for c in sorted(ws.ds.eval.categories, key=lambda c: c.id)]
        out = {"categories": [{"id": cid, "name": name} for cid, name in categories]}
        for label, model in (("original", ws.model), ("enhanced", ws.enhanced)):
            if model is None:
                out[label] = None
                continue
            seg = metrics.evaluate_segmentation(model, ws.ds.eval, images)
            per_image = ws.per_image_iou(label)
            out[label] = {
                "per_class": {name: seg["per_class"].get(cid) for cid, name in categories},
                "overall": metrics.mean_iou([v for v in seg["per_class"].values() if v is not None]),
                "per_image": {str(k): v for k, v in per_image.items()},
            }
        if out.get("original") and out.get("enhanced"):
            out["delta"] = {
                name: (
                    None
                    if out["enhanced"]["per_class"][name] is None or out["original"]["per_class"][name] is None
                    else out["enhanced"]["per_class"][name] - out["original"]["per_class"][name]
                )
                for _, name in categories
            }
        else:
            out["delta"] = None
        return out

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
