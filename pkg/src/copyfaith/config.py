"""Pipeline configuration: one TOML file, flags override.

Builds the typed sub-configs (copy score, filter criteria, tournament)
and the three endpoint clients. The ``demo`` backend wires everything
to the deterministic offline rules so the full pipeline runs without
network access.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .demo import DemoBackend, demo_scorers
from .errors import ConfigError
from .filterbank import Direction, FilterCriterion, HttpScorer, MetricId, ScorerSet
from .judge import TournamentConfig
from .llmclient import HttpBackend, LLMClient
from .metrics import CopyScoreConfig
from .prefbuild import Clients
from .promptgen import TemplateSet


@dataclass
class EndpointConfig:
    backend: str = "demo"  # "demo" or "http"
    base_url: str = ""
    model_id: str = "demo-model"
    api_key_env: str = "COPYFAITH_API_KEY"
    temperature: float = 0.0


@dataclass
class PipelineConfig:
    generator: EndpointConfig = field(default_factory=EndpointConfig)
    judge: EndpointConfig = field(default_factory=EndpointConfig)
    embeddings: EndpointConfig = field(default_factory=EndpointConfig)
    score_cfg: CopyScoreConfig = field(default_factory=CopyScoreConfig)
    criteria: list[FilterCriterion] = field(default_factory=list)
    fail_open: list[MetricId] = field(default_factory=list)
    scorer_urls: dict[str, str] = field(default_factory=dict)
    sent_aggregation: str = "mean"
    tournament: TournamentConfig = field(default_factory=TournamentConfig)
    dims: str = "both"  # "twist", "causal", "both"
    t_max: int = 3
    concurrency: int = 1
    capture_k: int = 3
    min_common_len: int = 3
    cache_dir: str = ""
    template_dir: str = ""
    raw: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def templates(self) -> TemplateSet:
        return TemplateSet(self.template_dir or None)

    def _backend_for(self, ep: EndpointConfig, shared_demo: DemoBackend):
        if ep.backend == "demo":
            return shared_demo
        if ep.backend == "http":
            return HttpBackend(base_url=ep.base_url or None, api_key=os.environ.get(ep.api_key_env))
        raise ConfigError(f"unknown backend {ep.backend!r}")

    def make_clients(self) -> Clients:
        shared_demo = DemoBackend()
        cache = self.cache_dir or None

        def client(ep: EndpointConfig) -> LLMClient:
            return LLMClient(
                self._backend_for(ep, shared_demo),
                chat_model_id=ep.model_id,
                embedding_model_id=self.embeddings.model_id,
                cache_dir=cache,
                max_concurrency=max(self.concurrency, 1),
            )

        return Clients(generator=client(self.generator), judge=client(self.judge), embedder=client(self.embeddings))

    def scorers(self) -> ScorerSet:
        if not self.scorer_urls:
            base = demo_scorers()
            base.sent_aggregation = self.sent_aggregation
            return base
        return ScorerSet(
            faith_doc=HttpScorer(self.scorer_urls["faith_doc"]) if "faith_doc" in self.scorer_urls else None,
            faith_sent=HttpScorer(self.scorer_urls["faith_sent"]) if "faith_sent" in self.scorer_urls else None,
            fluency_ppl=HttpScorer(self.scorer_urls["fluency_ppl"]) if "fluency_ppl" in self.scorer_urls else None,
            sent_aggregation=self.sent_aggregation,
        )

    def judge_dimensions(self):
        from .judge import JudgeDimension

        if self.dims == "twist":
            return (JudgeDimension.TWIST,)
        if self.dims == "causal":
            return (JudgeDimension.CAUSAL,)
        return (JudgeDimension.TWIST, JudgeDimension.CAUSAL)


_DEFAULT_THRESHOLDS = {
    "faith_doc": 0.6,
    "faith_sent": 0.6,
    "coverage": 0.5,
    "density": 2.0,
    "relevance": 0.5,
    "fluency_ppl": 60.0,
}


def _endpoint(section: dict, defaults: EndpointConfig) -> EndpointConfig:
    return EndpointConfig(
        backend=section.get("backend", defaults.backend),
        base_url=section.get("base_url", defaults.base_url),
        model_id=section.get("model_id", defaults.model_id),
        api_key_env=section.get("api_key_env", defaults.api_key_env),
        temperature=float(section.get("temperature", defaults.temperature)),
    )


def _criteria_from(section: dict) -> tuple[list[FilterCriterion], list[MetricId]]:
    disabled = set(section.get("disabled", []))
    criteria = []
    for name, default in _DEFAULT_THRESHOLDS.items():
        if name in disabled:
            continue
        metric = MetricId(name)
        direction = Direction.AT_MOST if metric is MetricId.FLUENCY_PPL else Direction.AT_LEAST
        criteria.append(FilterCriterion(metric, float(section.get(name, default)), direction))
    fail_open = [MetricId(n) for n in section.get("fail_open", [])]
    return criteria, fail_open


def load_config(path: str | Path | None = None) -> PipelineConfig:
    """Load a TOML config; ``None`` yields the offline demo defaults."""
    raw: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    try:
        generator = _endpoint(raw.get("generator", {}), EndpointConfig())
        judge_ep = _endpoint(raw.get("judge", {}), EndpointConfig())
        embeddings = _endpoint(raw.get("embeddings", {}), EndpointConfig())
        score_section = raw.get("copy_score", {})
        score_cfg = CopyScoreConfig(
            alpha=float(score_section.get("alpha", 0.5)),
            beta=float(score_section.get("beta", 0.5)),
            gamma=float(score_section.get("gamma", 10.0)),
            epsilon_cap=float(score_section.get("epsilon_cap", 0.5)),
            threshold=float(score_section.get("threshold", 0.8)),
        )
        criteria, fail_open = _criteria_from(raw.get("filters", {}))
        judge_section = raw.get("judge", {})
        tournament = TournamentConfig(
            k_factor=float(judge_section.get("k_factor", 32.0)),
            initial_rating=float(judge_section.get("initial_rating", 1500.0)),
            passes=int(judge_section.get("passes", 1)),
        )
        pipeline = raw.get("pipeline", {})
        cfg = PipelineConfig(
            generator=generator,
            judge=judge_ep,
            embeddings=embeddings,
            score_cfg=score_cfg,
            criteria=criteria,
            fail_open=fail_open,
            scorer_urls={
                k: v for k, v in raw.get("scorers", {}).items() if k in _DEFAULT_THRESHOLDS
            },
            sent_aggregation=raw.get("scorers", {}).get("sent_aggregation", "mean"),
            tournament=tournament,
            dims=pipeline.get("dims", "both"),
            t_max=int(pipeline.get("t_max", 3)),
            concurrency=int(pipeline.get("concurrency", 1)),
            capture_k=int(pipeline.get("capture_k", 3)),
            min_common_len=int(pipeline.get("min_common_len", 3)),
            cache_dir=pipeline.get("cache_dir", ""),
            template_dir=pipeline.get("template_dir", ""),
            raw=raw,
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc

    if cfg.t_max < 1:
        raise ConfigError("pipeline.t_max must be >= 1")
    if cfg.concurrency < 1:
        raise ConfigError("pipeline.concurrency must be >= 1")
    if cfg.capture_k < 1:
        raise ConfigError("pipeline.capture_k must be >= 1")
    if cfg.sent_aggregation not in ("mean", "min"):
        raise ConfigError("scorers.sent_aggregation must be 'mean' or 'min'")
    if cfg.template_dir and not Path(cfg.template_dir).is_dir():
        raise ConfigError(f"template_dir does not exist: {cfg.template_dir}")
    return cfg
