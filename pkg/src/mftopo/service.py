"""HTTP service wrapping the pipeline drivers.

Endpoints accept filesystem paths (the service is a local compute wrapper;
remote deployments assume a shared filesystem) and wrap the drivers in
``pipeline``. Input problems map to 400, configuration/usage problems to
422, everything else surfaces as 500.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .errors import ConfigError, InputDataError, MFTopoError
from .pipeline import (
    ItemSpec,
    RunConfig,
    run_descriptors,
    run_distance,
    run_evaluate,
    run_matrix,
    run_timeseries,
)

__all__ = ["app", "ConfigModel", "ItemModel"]


class ConfigModel(BaseModel):
    """Pipeline configuration carried by requests."""

    q: int | list[int] = 32
    weights: list[float] = Field(default=[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])
    objective: str = "minimax"
    mode: str = "clip"
    eigen_count: int = 12
    emeasure_cutoff: int = 32
    workers: int = 1

    def to_run_config(self) -> RunConfig:
        q = self.q if isinstance(self.q, int) else tuple(self.q)
        return RunConfig(
            q=q,
            weights=tuple(self.weights),
            objective=self.objective,
            mode=self.mode,
            eigen_count=self.eigen_count,
            emeasure_cutoff=self.emeasure_cutoff,
            workers=self.workers,
        )


class ItemModel(BaseModel):
    """One comparison input: mesh or grid plus field/descriptor sources."""

    id: str
    label: str = ""
    mesh: str | None = None
    grid_dims: list[int] | None = None
    grid_spacing: list[float] | None = None
    fields: list[str] = Field(default_factory=list)
    descriptors: str | None = None

    def to_spec(self) -> ItemSpec:
        return ItemSpec(
            id=self.id,
            label=self.label,
            mesh=self.mesh,
            grid_dims=tuple(self.grid_dims) if self.grid_dims else None,
            grid_spacing=tuple(self.grid_spacing)
            if self.grid_spacing
            else (1.0, 1.0, 1.0),
            fields=tuple(self.fields),
            descriptors=self.descriptors,
        )


class HealthResponse(BaseModel):
    status: str
    version: str


class DescriptorsRequest(BaseModel):
    mesh_path: str
    count: int = 12
    out_path: str | None = None


class DescriptorsResponse(BaseModel):
    vertices: int
    eigenvalues: list[float]
    out_path: str | None = None


class DistanceRequest(BaseModel):
    a: ItemModel
    b: ItemModel
    config: ConfigModel = Field(default_factory=ConfigModel)
    out_path: str | None = None


class DistanceResponse(BaseModel):
    a: str
    b: str
    mode: str
    distance: float
    terms: list[float] | None = None
    report: dict | None = None
    out_path: str | None = None


class MatrixRequest(BaseModel):
    manifest_path: str
    out_path: str
    config: ConfigModel = Field(default_factory=ConfigModel)
    resume: bool = False


class MatrixResponse(BaseModel):
    items: int
    pairs_total: int
    pairs_computed: int
    out_path: str
    labels_path: str


class EvaluateRequest(BaseModel):
    matrix_path: str
    labels_path: str
    emeasure_cutoff: int = 32
    out_path: str | None = None


class EvaluateResponse(BaseModel):
    nn: float
    tier1: float
    tier2: float
    emeasure: float
    dcg: float


class PeakModel(BaseModel):
    t: int
    distance: float
    prominence: float


class TimeseriesRequest(BaseModel):
    manifest_path: str
    config: ConfigModel = Field(default_factory=ConfigModel)
    out_path: str | None = None


class TimeseriesResponse(BaseModel):
    sites: int
    distances: list[float]
    peaks: list[PeakModel]
    out_path: str | None = None


app = FastAPI(title="mftopo", version=__version__)


@app.exception_handler(ConfigError)
async def _config_error(request: Request, exc: ConfigError) -> JSONResponse:
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.exception_handler(InputDataError)
async def _input_error(request: Request, exc: InputDataError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(MFTopoError)
async def _package_error(request: Request, exc: MFTopoError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(OSError)
async def _os_error(request: Request, exc: OSError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/descriptors", response_model=DescriptorsResponse)
def descriptors_endpoint(req: DescriptorsRequest) -> DescriptorsResponse:
    return DescriptorsResponse(**run_descriptors(req.mesh_path, req.count, req.out_path))


@app.post("/distance", response_model=DistanceResponse)
def distance_endpoint(req: DistanceRequest) -> DistanceResponse:
    payload = run_distance(
        req.a.to_spec(), req.b.to_spec(), req.config.to_run_config(), req.out_path
    )
    return DistanceResponse(**payload)


@app.post("/matrix", response_model=MatrixResponse)
def matrix_endpoint(req: MatrixRequest) -> MatrixResponse:
    payload = run_matrix(
        req.manifest_path, req.config.to_run_config(), req.out_path, resume=req.resume
    )
    return MatrixResponse(**payload)


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate_endpoint(req: EvaluateRequest) -> EvaluateResponse:
    return EvaluateResponse(
        **run_evaluate(
            req.matrix_path,
            req.labels_path,
            emeasure_cutoff=req.emeasure_cutoff,
            out_path=req.out_path,
        )
    )


@app.post("/timeseries", response_model=TimeseriesResponse)
def timeseries_endpoint(req: TimeseriesRequest) -> TimeseriesResponse:
    payload = run_timeseries(
        req.manifest_path, req.config.to_run_config(), req.out_path
    )
    return TimeseriesResponse(**payload)
