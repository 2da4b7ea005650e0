"""Composition planning: semantic filtering plus LVLM retrieval.

The aesthetic database arrives as precomputed unit-norm embeddings (any
contrastive vision-language encoder can produce the manifest; this
toolkit never computes embeddings itself). Planning filters the
database down to the top-n semantically relevant candidates, assembles
a chain-of-thought prompt with optional exemplar triplets, asks the
endpoint to pick a reference, and grounds the textual answer back to a
candidate by index, caption, or token overlap.
"""

from __future__ import annotations

import base64
import json
import logging
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_CANDIDATES = 32
FUZZY_MIN_OVERLAP = 0.5

INSTRUCTION_TEXT = (
    "You are a master of aesthetic composition. I will provide you with a set of "
    "candidate composition images and a target theme. Your task is to plan a "
    "suitable composition reference image based on the theme. The composition "
    "reference follows a process similar to the following: "
    "<T_theme, I_ref, I_res>."
)

COT_SCAFFOLD = (
    "Let's think step by step:\n"
    "1. Define candidate compositions and color schemes for the given theme.\n"
    "2. Plan the most suitable composition reference based on the theme, "
    "composition, and color scheme. (This avoids reducing the planning process "
    "to simple semantic matching.)\n"
    "Answer with the number or caption of the chosen candidate."
)

DISAMBIGUATION_NOTE = (
    "Your previous answer did not name one of the numbered candidates. "
    "Reply with exactly one candidate number from the list above."
)


class EndpointError(Exception):
    """Raised when the LVLM endpoint stays unreachable across retries."""


@dataclass(frozen=True)
class DatabaseEntry:
    id: str
    image_path: str
    caption: str
    embedding: np.ndarray


@dataclass(frozen=True)
class Candidate:
    entry: DatabaseEntry
    score: float


@dataclass
class EmbeddingIndex:
    entries: list[DatabaseEntry]
    dim: int
    source: str = ""
    _matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.stack([e.embedding for e in self.entries])
        return self._matrix

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ExemplarTriplet:
    """One worked example: theme, the reference chosen, the resulting image.

    Captions are used when the endpoint is text-only; they fall back to
    the file stem if not provided.
    """

    theme: str
    ref_image: str
    result_image: str
    ref_caption: str = ""
    result_caption: str = ""

    def ref_text(self) -> str:
        return self.ref_caption or Path(self.ref_image).stem

    def result_text(self) -> str:
        return self.result_caption or Path(self.result_image).stem


@dataclass
class PlanResult:
    chosen: DatabaseEntry
    candidates: list[Candidate]
    response: str
    match_method: str  # "exact", "fuzzy", or "fuzzy-fallback"


def _normalize_embedding(vec, *, what: str) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64).ravel()
    if not np.isfinite(arr).all():
        raise ValueError(f"{what}: embedding contains non-finite values")
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > 1e-2:
        raise ValueError(f"{what}: embedding norm {norm:.4f} deviates too far from 1")
    return arr / norm


def build_index(manifest: list[dict | DatabaseEntry], source: str = "") -> EmbeddingIndex:
    """Validate and ingest precomputed entries into an in-memory index.

    Embeddings with norm within 1e-2 of unit are renormalized; anything
    further off is rejected. Duplicate ids are reported together.
    """
    entries: list[DatabaseEntry] = []
    dim: int | None = None
    seen: dict[str, int] = {}
    duplicates: set[str] = set()
    for rec in manifest:
        if isinstance(rec, DatabaseEntry):
            eid, path, caption, emb = rec.id, rec.image_path, rec.caption, rec.embedding
        else:
            eid, path, caption, emb = (
                rec["id"],
                rec.get("image_path", ""),
                rec["caption"],
                rec["embedding"],
            )
        eid = str(eid)
        if not caption:
            raise ValueError(f"entry {eid!r}: caption must be non-empty")
        emb = _normalize_embedding(emb, what=f"entry {eid!r}")
        if dim is None:
            dim = emb.size
        elif emb.size != dim:
            raise ValueError(f"entry {eid!r}: dimension {emb.size} != index dimension {dim}")
        if eid in seen:
            duplicates.add(eid)
        seen[eid] = 1
        entries.append(DatabaseEntry(id=eid, image_path=str(path), caption=str(caption), embedding=emb))
    if duplicates:
        raise ValueError(f"duplicate ids in manifest: {sorted(duplicates)}")
    if dim is None:
        raise ValueError("manifest is empty")
    return EmbeddingIndex(entries=entries, dim=dim, source=source)


def semantic_filter(index: EmbeddingIndex, theme_embedding, n: int) -> list[Candidate]:
    """Top-n entries by cosine similarity, descending, ties broken by id."""
    if not (1 <= n <= len(index)):
        raise ValueError(f"n must be in [1, {len(index)}], got {n}")
    theme = _normalize_embedding(theme_embedding, what="theme")
    if theme.size != index.dim:
        raise ValueError(f"theme embedding dimension {theme.size} != index dimension {index.dim}")
    scores = index.matrix @ theme
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.entries[i].id))
    return [Candidate(entry=index.entries[i], score=float(scores[i])) for i in order[:n]]


def assemble_prompt(
    theme: str,
    exemplars: list[ExemplarTriplet],
    candidates: list[Candidate],
    instruction: str = INSTRUCTION_TEXT,
) -> str:
    """Deterministically serialize the retrieval prompt.

    Order: instruction, exemplar triplets (textual form), numbered
    candidates in filter-ranking order, the theme, then the two-step
    reasoning scaffold.
    """
    if not candidates:
        raise ValueError("candidate set is empty")
    for ex in exemplars:
        for p in (ex.ref_image, ex.result_image):
            if p and not Path(p).is_file():
                raise ValueError(f"exemplar file does not exist: {p}")
    parts = [instruction, ""]
    if exemplars:
        parts.append("Examples:")
        for j, ex in enumerate(exemplars, 1):
            parts.append(f"Example {j}: theme: {ex.theme} | reference: {ex.ref_text()} | result: {ex.result_text()}")
        parts.append("")
    parts.append("Candidates:")
    for i, cand in enumerate(candidates, 1):
        parts.append(f"{i}. [{cand.entry.id}] {cand.entry.caption}")
    parts.append("")
    parts.append(f"Theme: {theme}")
    parts.append("")
    parts.append(COT_SCAFFOLD)
    return "\n".join(parts)


def _tokens(text: str) -> set[str]:
    return set(re.findall(r"[a-z0-9]+", text.casefold()))


def match_response(text: str, candidates: list[Candidate]):
    """Ground an endpoint response to one candidate.

    Tries, in order: an explicit candidate number ("image 3", "#3", a
    leading "3."), the full caption as a substring, then token-set
    overlap (case-folded, punctuation-stripped Jaccard), which must reach
    0.5 to count. Returns (entry, method) or (None, None).
    """
    n = len(candidates)
    m = re.search(r"(?:image|candidate|option|reference|#)\s*(\d+)", text, re.IGNORECASE)
    if m and 1 <= int(m.group(1)) <= n:
        return candidates[int(m.group(1)) - 1].entry, "exact"
    folded = text.casefold()
    for cand in candidates:
        if cand.entry.caption and cand.entry.caption.casefold() in folded:
            return cand.entry, "exact"
    m = re.match(r"\W*(\d+)\b", text)
    if m and 1 <= int(m.group(1)) <= n:
        return candidates[int(m.group(1)) - 1].entry, "exact"
    resp_tokens = _tokens(text)
    if resp_tokens:
        best, best_overlap = None, 0.0
        for cand in candidates:
            cap_tokens = _tokens(cand.entry.caption)
            union = resp_tokens | cap_tokens
            if not union:
                continue
            overlap = len(resp_tokens & cap_tokens) / len(union)
            if overlap > best_overlap:
                best, best_overlap = cand, overlap
        if best is not None and best_overlap >= FUZZY_MIN_OVERLAP:
            return best.entry, "fuzzy"
    return None, None


def plan_composition(
    theme: str,
    theme_embedding,
    index: EmbeddingIndex,
    llm,
    n: int = DEFAULT_CANDIDATES,
    exemplars: list[ExemplarTriplet] = (),
    retries: int = 2,
) -> PlanResult:
    """Filter, prompt, invoke, and ground the endpoint's pick.

    Unmatched responses are retried with a disambiguation note appended;
    once retries are spent the top semantic candidate is returned,
    flagged as "fuzzy-fallback". Transport failures keep retrying and
    raise EndpointError only if the endpoint never answers.
    """
    n = min(n, len(index))
    candidates = semantic_filter(index, theme_embedding, n)
    prompt = assemble_prompt(theme, list(exemplars), candidates)
    attempts = 1 + max(0, int(retries))
    response = ""
    transport_failures = 0
    for attempt in range(attempts):
        try:
            response = llm.complete(prompt)
        except EndpointError:
            transport_failures += 1
            if transport_failures >= attempts:
                raise
            continue
        log.debug("planner attempt %d response: %r", attempt + 1, response)
        entry, method = match_response(response, candidates)
        if entry is not None:
            return PlanResult(chosen=entry, candidates=candidates, response=response, match_method=method)
        prompt = prompt + "\n\n" + DISAMBIGUATION_NOTE
    return PlanResult(
        chosen=candidates[0].entry,
        candidates=candidates,
        response=response,
        match_method="fuzzy-fallback",
    )


class HttpLvlmClient:
    """Chat-style JSON-over-HTTP endpoint client.

    Sends {"model": ..., "messages": [{"role": "user", "content": prompt}]}
    and reads choices[0].message.content (with common fallbacks). At most
    max_in_flight requests run concurrently.
    """

    def __init__(self, url: str, model: str = "", token: str = "", timeout: float = 30.0,
                 max_in_flight: int = 4):
        self.url = url
        self.model = model
        self.token = token
        self.timeout = timeout
        self._gate = threading.BoundedSemaphore(max_in_flight)

    def complete(self, prompt: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        body = {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        log.debug("LVLM request to %s: %s", self.url, json.dumps(body)[:2000])
        with self._gate:
            try:
                resp = requests.post(self.url, json=body, headers=headers, timeout=self.timeout)
                resp.raise_for_status()
            except requests.RequestException as exc:
                raise EndpointError(f"LVLM endpoint failed: {exc}") from exc
        data = resp.json()
        log.debug("LVLM response: %s", json.dumps(data)[:2000])
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            for key in ("response", "content", "text"):
                if isinstance(data.get(key), str):
                    return data[key]
        raise EndpointError(f"unrecognized LVLM response shape: {list(data)[:8]}")


class StubLvlmClient:
    """Deterministic stand-in: replays canned responses in order."""

    def __init__(self, responses: list[str]):
        if not responses:
            raise ValueError("stub needs at least one response")
        self.responses = list(responses)
        self.calls = 0

    @classmethod
    def from_fixture(cls, path) -> "StubLvlmClient":
        data = json.loads(Path(path).read_text())
        if isinstance(data, dict) and "responses" in data:
            return cls([str(r) for r in data["responses"]])
        if isinstance(data, dict) and "response" in data:
            return cls([str(data["response"])])
        raise ValueError(f"stub fixture {path} needs a 'response' or 'responses' key")

    def complete(self, prompt: str) -> str:
        idx = min(self.calls, len(self.responses) - 1)
        self.calls += 1
        return self.responses[idx]


def make_llm_client(spec: str, model: str = "", token: str = ""):
    """Build a client from a CLI-style endpoint spec.

    "stub:<fixture.json>" selects the deterministic test stub; anything
    starting with http(s):// becomes an HTTP client.
    """
    if spec.startswith("stub:"):
        return StubLvlmClient.from_fixture(spec[len("stub:"):])
    if spec.startswith("http://") or spec.startswith("https://"):
        return HttpLvlmClient(spec, model=model, token=token)
    raise ValueError(f"unrecognized LVLM endpoint spec: {spec!r}")


def write_manifest(entries: list[DatabaseEntry], path) -> None:
    """Write the line-delimited index manifest (embeddings as base64 f32 LE)."""
    with open(path, "w") as fh:
        for e in entries:
            rec = {
                "id": e.id,
                "image_path": e.image_path,
                "caption": e.caption,
                "embedding": base64.b64encode(
                    np.asarray(e.embedding, dtype="<f4").tobytes()
                ).decode("ascii"),
                "dim": int(np.asarray(e.embedding).size),
            }
            fh.write(json.dumps(rec) + "\n")


def read_manifest(path) -> list[dict]:
    """Read the line-delimited index manifest back into build_index records."""
    records = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                emb = np.frombuffer(base64.b64decode(rec["embedding"]), dtype="<f4")
                if "dim" in rec and int(rec["dim"]) != emb.size:
                    raise ValueError(f"declared dim {rec['dim']} != decoded length {emb.size}")
                rec["embedding"] = emb.astype(np.float64)
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad manifest record: {exc}") from exc
            records.append(rec)
    return records
