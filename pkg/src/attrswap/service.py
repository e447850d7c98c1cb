"""HTTP inference service over a loaded checkpoint: schema, sample catalog,
attribute transfer, convex mixing, and interpolation. Images travel as base64
PNG inside JSON. The model is read-only after load, so identical requests
yield identical responses."""
from __future__ import annotations

import base64
import io
from dataclasses import dataclass, field

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from PIL import Image
from pydantic import BaseModel, Field

from . import latent_ops
from .data import denormalize_u8
from .latent_ops import MixRequest, SwapRequest, image_to_tensor
from .errors import ContractError
from .nets import ModelBundle, checkpoint_hash, load_checkpoint
from .schema import Dataset

MAX_INTERPOLATION_STEPS = 32


class TransferBody(BaseModel):
    source_id: int
    donors: dict[str, int]
    attributes: list[str] = Field(min_length=1)


class MixComponent(BaseModel):
    id: int
    weight: float


class MixBody(BaseModel):
    attribute: str
    components: list[MixComponent] = Field(min_length=1)
    base_id: int | None = None


class InterpolateBody(BaseModel):
    attribute: str
    id_i: int
    id_j: int
    steps: int = 8
    base_id: int | None = None


@dataclass
class ServiceState:
    model: ModelBundle
    catalog: Dataset
    checkpoint_hash: str
    request_counters: dict[str, int] = field(default_factory=dict)

    def count(self, endpoint: str) -> None:
        self.request_counters[endpoint] = self.request_counters.get(endpoint, 0) + 1


def _png_b64(image: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(denormalize_u8(image)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(checkpoint_path=None, catalog: Dataset | None = None,
               model: ModelBundle | None = None) -> FastAPI:
    app = FastAPI(title="attrswap inference service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    state: dict[str, ServiceState | None] = {"state": None}

    if model is None and checkpoint_path is not None:
        model, _ = load_checkpoint(checkpoint_path)
        model.eval()
    if model is not None and catalog is not None:
        chash = checkpoint_hash(checkpoint_path) if checkpoint_path else "in-memory"
        state["state"] = ServiceState(model=model, catalog=catalog,
                                      checkpoint_hash=chash)

    def require_state() -> ServiceState:
        if state["state"] is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return state["state"]

    def labels_of(st: ServiceState, i: int) -> dict[str, int]:
        return {name: int(st.catalog.labels[i, m])
                for m, name in enumerate(st.catalog.schema.names)}

    def catalog_image(st: ServiceState, i: int) -> np.ndarray:
        if not 0 <= i < len(st.catalog):
            raise HTTPException(status_code=404, detail=f"unknown sample id {i}")
        return st.catalog.images[i]

    def attr_index(st: ServiceState, name: str) -> int:
        try:
            return st.model.schema.index_of(name)
        except Exception:
            raise HTTPException(status_code=422, detail=f"unknown attribute {name!r}")

    @torch.no_grad()
    def predictions(st: ServiceState, image: np.ndarray) -> dict[str, list[float]]:
        x = image_to_tensor(image)
        return {name: st.model.classify_image(x, m + 1).squeeze(0).tolist()
                for m, name in enumerate(st.model.schema.names)}

    @app.get("/api/schema")
    def get_schema():
        st = require_state()
        st.count("schema")
        return {
            "attributes": [{"name": n, "class_count": c}
                           for n, c in st.model.schema.attributes],
            "image_size": st.model.cfg.image_size,
            "checkpoint_hash": st.checkpoint_hash,
        }

    @app.get("/api/samples")
    def get_samples(limit: int = Query(16, ge=0), offset: int = Query(0, ge=0)):
        st = require_state()
        st.count("samples")
        if offset > len(st.catalog):
            raise HTTPException(status_code=400, detail="offset beyond catalog")
        ids = range(offset, min(offset + limit, len(st.catalog)))
        return {
            "total": len(st.catalog),
            "samples": [{
                "id": i,
                "labels": labels_of(st, i),
                "thumbnail": _png_b64(st.catalog.images[i]),
            } for i in ids],
        }

    @app.post("/api/transfer")
    def post_transfer(body: TransferBody):
        st = require_state()
        st.count("transfer")
        source = catalog_image(st, body.source_id)
        indices = [attr_index(st, a) for a in body.attributes]
        donors = {}
        for name in body.attributes:
            if name not in body.donors:
                raise HTTPException(status_code=422,
                                    detail=f"no donor given for attribute {name!r}")
        for name, donor_id in body.donors.items():
            donors[attr_index(st, name)] = catalog_image(st, donor_id)
        try:
            out = latent_ops.swap(st.model, SwapRequest(
                source=source, donors=donors,
                attributes_to_swap=frozenset(indices)))
        except ContractError as e:
            raise HTTPException(status_code=422, detail=str(e))
        return {"image": _png_b64(out), "predicted": predictions(st, out)}

    @app.post("/api/mix")
    def post_mix(body: MixBody):
        st = require_state()
        st.count("mix")
        m = attr_index(st, body.attribute)
        components = tuple(
            (catalog_image(st, c.id), c.weight) for c in body.components)
        base = catalog_image(st, body.base_id) if body.base_id is not None else None
        try:
            out = latent_ops.mix(st.model, MixRequest(
                attribute=m, components=components, base=base))
        except ContractError as e:
            raise HTTPException(status_code=422, detail=str(e))
        return {"image": _png_b64(out)}

    @app.post("/api/interpolate")
    def post_interpolate(body: InterpolateBody):
        st = require_state()
        st.count("interpolate")
        if not 2 <= body.steps <= MAX_INTERPOLATION_STEPS:
            raise HTTPException(
                status_code=422,
                detail=f"steps must be in [2, {MAX_INTERPOLATION_STEPS}]")
        m = attr_index(st, body.attribute)
        base = catalog_image(st, body.base_id) if body.base_id is not None else None
        frames = latent_ops.interpolate(
            st.model, m, catalog_image(st, body.id_i),
            catalog_image(st, body.id_j), steps=body.steps, base=base)
        return {"images": [_png_b64(f) for f in frames]}

    @app.get("/api/spec")
    def get_spec():
        return {
            "transfer": TransferBody.model_json_schema(),
            "mix": MixBody.model_json_schema(),
            "interpolate": InterpolateBody.model_json_schema(),
        }

    return app
