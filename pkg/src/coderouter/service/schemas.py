"""Pydantic request/response models for the HTTP gateway."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str


class ModelInfo(BaseModel):
    model_id: str
    price_per_mtok: float
    params_b: float | None = None


class ModelsResponse(BaseModel):
    models: list[ModelInfo]
    sample_count: int


class RouteRequest(BaseModel):
    prompt: str
    problem_id: str | None = None


class RouteDecisionModel(BaseModel):
    model_id: str
    probabilities: dict[str, float]
    difficulty_tier: str | None = None
    embedder: str
    embedder_fallback: bool = False
    fingerprints: dict[str, str] = Field(default_factory=dict)


class GenerateRequest(BaseModel):
    prompt: str
    problem_id: str | None = None


class GenerateResponse(BaseModel):
    route: RouteDecisionModel
    completion: dict


class ErrorBody(BaseModel):
    error: str
    detail: str
    route: RouteDecisionModel | None = None
