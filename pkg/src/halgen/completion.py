"""Fixed-point completion loop and HAL element deletion utilities.

`complete` repeatedly detects missing elements, generates candidates with
retrieved context, vets them, and inserts accepted patches until the
project closes or a limit trips. Projects are treated as immutable values:
every mutation returns a new Project, so callers can reuse a pristine
parse across experiment iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from halgen.errors import HalgenError
from halgen.analysis import (
    ElementKind,
    MissingElement,
    Project,
    build_symbol_table,
    detect_missing,
    infer_signature,
)
from halgen.c_ast import (
    FunctionDef,
    GlobalDecl,
    IncludeDirective,
    LexError,
    MacroConst,
    ParseError,
    TranslationUnit,
    item_name,
    parse,
    pretty_print,
)
from halgen.generation import (
    BackendError,
    EmptyGeneration,
    Rejection,
    VetPolicy,
    VettedPatch,
    generate,
    vet_patch,
)
from halgen.prompting import PromptTemplate, RenderedPrompt, build_prompt
from halgen.retrieval import EmptyIndex, Snippet, VectorIndex, embed, search


class NotFound(HalgenError):
    pass


class NotInHalUnit(HalgenError):
    pass


class InternalError(HalgenError):
    pass


@dataclass
class CompletionLimits:
    max_iterations: int = 10
    max_calls: int = 50
    max_rejections_per_element: int = 3

    def __post_init__(self):
        if min(self.max_iterations, self.max_calls, self.max_rejections_per_element) < 1:
            raise ValueError("completion limits must be positive")


@dataclass
class CompletionReport:
    iterations_used: int = 0
    total_calls: int = 0
    inserted: list[tuple[str, str, str, int]] = field(default_factory=list)  # name, kind, backend, rejections
    failures: list[tuple[str, list[str]]] = field(default_factory=list)
    closed: bool = False
    per_element_similarity: list[tuple[str, float]] | None = None

    def to_json_dict(self) -> dict:
        return {
            "iterations_used": self.iterations_used,
            "total_calls": self.total_calls,
            "inserted": [list(entry) for entry in self.inserted],
            "failures": [[name, list(reasons)] for name, reasons in self.failures],
            "closed": self.closed,
            "per_element_similarity": (
                None if self.per_element_similarity is None
                else [list(entry) for entry in self.per_element_similarity]
            ),
        }


def _retrieve_context(
    index: VectorIndex,
    snippets: list[Snippet],
    elem: MissingElement,
    k: int,
) -> list[Snippet]:
    if not index.entries or k < 1:
        return []
    query = embed(" ".join([elem.name] + elem.sample_args))
    by_id = {s.id: s for s in snippets}
    try:
        ranked = search(index, query, k)
    except EmptyIndex:
        return []
    return [by_id[sid] for sid, _ in ranked if sid in by_id]


def _with_feedback(prompt: RenderedPrompt, reasons: list[str]) -> RenderedPrompt:
    """Append the rejection reasons to the final (user-visible) section."""
    sections = list(prompt.sections)
    name, text = sections[-1]
    note = (
        f"\n\nThe previous attempt was rejected for: {', '.join(reasons)}. "
        "Provide a corrected implementation."
    )
    sections[-1] = (name, text + note)
    flattened = "\n\n".join(sec_text for _, sec_text in sections)
    return RenderedPrompt(sections, flattened)


def complete(
    project: Project,
    backend,
    index: VectorIndex,
    snippets: list[Snippet],
    limits: CompletionLimits | None = None,
    policy: VetPolicy | None = None,
    template: PromptTemplate | None = None,
    retrieval_k: int = 3,
) -> tuple[Project, CompletionReport]:
    """Drive the project to a fixed point of missing-element detection.

    Per element: retrieve context, render the prompt, generate, vet, and
    insert. Rejected candidates are regenerated with the rejection reasons
    appended, up to the per-element limit; each inserted element costs
    exactly one successful generation call (rejected attempts count only
    toward total_calls). Backend failures mark the element failed rather
    than aborting the run. Returns the (possibly unchanged) project and a
    report; `closed` is True only when nothing is missing and nothing
    failed.
    """
    limits = limits or CompletionLimits()
    base_policy = policy or VetPolicy()
    report = CompletionReport()
    failed: dict[str, list[str]] = {}

    current = project
    while report.iterations_used < limits.max_iterations:
        report.iterations_used += 1
        table = build_symbol_table(current)
        missing = detect_missing(table)
        if not missing:
            report.closed = not failed
            break
        pending = [m for m in missing if m.name not in failed]
        if not pending:
            break  # every remaining gap already failed; no progress possible
        progress = False
        pending_names = {m.name for m in missing}
        for elem in pending:
            if report.total_calls >= limits.max_calls:
                failed.setdefault(elem.name, ["limit:max_calls"])
                continue
            table = build_symbol_table(current)
            vet_policy = replace(
                base_policy,
                allowed_external_names=frozenset(base_policy.allowed_external_names)
                | set(table.definitions) | pending_names,
            )
            signature = infer_signature(elem) if elem.kind is ElementKind.FUNCTION else None
            retrieved = _retrieve_context(index, snippets, elem, retrieval_k)
            prompt = build_prompt(elem, signature, retrieved, template)
            rejections = 0
            outcome: VettedPatch | None = None
            reasons: list[str] = []
            while True:
                try:
                    result = generate(backend, prompt)
                    report.total_calls += 1
                    vetted = vet_patch(result.extracted_code, elem, table, vet_policy)
                except BackendError as err:
                    reasons = [f"backend:{err.category}"]
                    break
                except EmptyGeneration:
                    report.total_calls += 1
                    vetted = Rejection(["EmptyGeneration"])
                if isinstance(vetted, Rejection):
                    rejections += 1
                    reasons = vetted.reasons
                    if rejections >= limits.max_rejections_per_element:
                        break
                    prompt = _with_feedback(prompt, vetted.reasons)
                    continue
                outcome = vetted
                break
            if outcome is None:
                failed[elem.name] = reasons
                continue
            current = insert_patch(current, outcome)
            report.inserted.append(
                (elem.name, elem.kind.value, result.backend_id, rejections))
            progress = True
        if not progress:
            break

    if not report.closed:
        table = build_symbol_table(current)
        # a failed element may have been defined anyway by another patch's
        # extra items; such failures are stale
        failed = {name: reasons for name, reasons in failed.items()
                  if name not in table.definitions}
        if not detect_missing(table) and not failed:
            report.closed = True
    report.failures = sorted(failed.items())
    return current, report


def _constant_insert_position(items: list) -> int:
    last_const = -1
    for i, item in enumerate(items):
        if isinstance(item, (MacroConst, GlobalDecl)):
            last_const = i
    if last_const >= 0:
        return last_const + 1
    # top of the unit, below any leading includes
    pos = 0
    while pos < len(items) and isinstance(items[pos], IncludeDirective):
        pos += 1
    return pos


def insert_patch(project: Project, patch: VettedPatch) -> Project:
    """Insert a vetted patch into the HAL unit.

    Constants and globals land after the last existing constant/global
    (top of the unit when there is none); functions append at the end. The
    merged unit is re-rendered and re-parsed, which normalizes spans and
    guarantees the insertion produced valid source.
    """
    hal = project.hal_unit()
    items = list(hal.items)
    for item in patch.items:
        if isinstance(item, FunctionDef):
            items.append(item)
        else:
            items.insert(_constant_insert_position(items), item)
    merged_text = pretty_print(TranslationUnit(items, hal.file_id))
    try:
        merged = parse(merged_text, hal.file_id)
    except (ParseError, LexError) as err:
        raise InternalError(f"inserted patch for '{patch.name}' broke the unit: {err}") from err
    units = tuple(merged if u.file_id == hal.file_id else u for u in project.units)
    return Project(units, project.hal_unit_id)


def delete_element(project: Project, name: str) -> Project:
    """Remove the definition of `name` from the HAL unit."""
    defined_somewhere = any(
        item_name(item) == name for unit in project.units for item in unit.items)
    if not defined_somewhere:
        raise NotFound(f"'{name}' is not defined in this project")
    hal = project.hal_unit()
    kept = [item for item in hal.items if item_name(item) != name]
    if len(kept) == len(hal.items):
        raise NotInHalUnit(f"'{name}' is defined outside the HAL unit and cannot be deleted")
    new_hal = TranslationUnit(kept, hal.file_id)
    units = tuple(new_hal if u.file_id == hal.file_id else u for u in project.units)
    return Project(units, project.hal_unit_id)


def delete_all_hal(project: Project) -> tuple[Project, list[str]]:
    """Strip the HAL unit down to its include directives.

    Returns the new project and the deleted names in source order.
    """
    hal = project.hal_unit()
    deleted = [item_name(item) for item in hal.items if item_name(item) is not None]
    kept = [item for item in hal.items if isinstance(item, IncludeDirective)]
    new_hal = TranslationUnit(kept, hal.file_id)
    units = tuple(new_hal if u.file_id == hal.file_id else u for u in project.units)
    return Project(units, project.hal_unit_id), [n for n in deleted if n is not None]
